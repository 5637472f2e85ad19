#include "gaprune/tape.hpp"

#include "gaprune/errors.hpp"

#include <cmath>

namespace gaprune {

namespace {

constexpr double kGeluCoef  = 0.044715;
constexpr double kSqrt2OverPi = 0.7978845608028653558798921198687; // sqrt(2/pi)

void require_same_or_scalar(const tensor & a, const tensor & b, const char * what) {
    if (!a.same_shape(b) && !a.is_scalar() && !b.is_scalar()) {
        throw shape_error(std::string(what) + ": shapes " + a.shape_str() + " and " +
                          b.shape_str() + " are not broadcastable");
    }
}

} // namespace

tape::var tape::push(node n, tensor value) {
    nodes_.push_back(std::move(n));
    values_.push_back(std::move(value));
    has_grads_ = false;
    return var(nodes_.size() - 1);
}

void tape::check_var(var v) const {
    if (v < 0 || size_t(v) >= nodes_.size()) {
        throw argument_error("tape var " + std::to_string(v) + " out of range");
    }
}

const tensor & tape::value(var v) const {
    check_var(v);
    return values_[size_t(v)];
}

const tensor & tape::grad(var v) const {
    check_var(v);
    if (!has_grads_) {
        throw state_error("grad() before backward()");
    }
    return grads_[size_t(v)];
}

tape::var tape::leaf(tensor t) {
    return push({op::leaf, {}}, std::move(t));
}

tape::var tape::matmul(var a, var b) {
    check_var(a);
    check_var(b);
    const tensor & ta = values_[size_t(a)];
    const tensor & tb = values_[size_t(b)];
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows()) {
        throw shape_error("matmul: inner dimensions disagree for " + ta.shape_str() + " x " +
                          tb.shape_str());
    }
    const int64_t m = ta.rows(), k = ta.cols(), n = tb.cols();
    tensor out = tensor::zeros({m, n});
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < k; ++t) {
                acc += ta.at(i, t) * tb.at(t, j);
            }
            out.at(i, j) = acc;
        }
    }
    return push({op::matmul, {a, b}}, std::move(out));
}

tape::var tape::matmul_nt(var a, var b) {
    check_var(a);
    check_var(b);
    const tensor & ta = values_[size_t(a)];
    const tensor & tb = values_[size_t(b)];
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.cols()) {
        throw shape_error("matmul_nt: inner dimensions disagree for " + ta.shape_str() + " x " +
                          tb.shape_str() + "^T");
    }
    const int64_t m = ta.rows(), k = ta.cols(), n = tb.rows();
    tensor out = tensor::zeros({m, n});
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < k; ++t) {
                acc += ta.at(i, t) * tb.at(j, t);
            }
            out.at(i, j) = acc;
        }
    }
    return push({op::matmul_nt, {a, b}}, std::move(out));
}

tape::var tape::add(var a, var b) {
    check_var(a);
    check_var(b);
    const tensor & ta = values_[size_t(a)];
    const tensor & tb = values_[size_t(b)];
    require_same_or_scalar(ta, tb, "add");
    tensor out = ta.is_scalar() && !tb.is_scalar() ? tb : ta;
    if (ta.same_shape(tb)) {
        for (size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] = ta.values[i] + tb.values[i];
        }
    } else if (tb.is_scalar()) {
        for (size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] = ta.values[i] + tb.values[0];
        }
    } else {
        for (size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] = ta.values[0] + tb.values[i];
        }
    }
    return push({op::add, {a, b}}, std::move(out));
}

tape::var tape::mul(var a, var b) {
    check_var(a);
    check_var(b);
    const tensor & ta = values_[size_t(a)];
    const tensor & tb = values_[size_t(b)];
    require_same_or_scalar(ta, tb, "mul");
    tensor out = ta.is_scalar() && !tb.is_scalar() ? tb : ta;
    if (ta.same_shape(tb)) {
        for (size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] = ta.values[i] * tb.values[i];
        }
    } else if (tb.is_scalar()) {
        for (size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] = ta.values[i] * tb.values[0];
        }
    } else {
        for (size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] = ta.values[0] * tb.values[i];
        }
    }
    return push({op::mul, {a, b}}, std::move(out));
}

tape::var tape::scale(var x, double c) {
    check_var(x);
    tensor out = values_[size_t(x)];
    for (double & v : out.values) {
        v *= c;
    }
    node n{op::scale, {x}};
    n.c = c;
    return push(std::move(n), std::move(out));
}

tape::var tape::tanh(var x) {
    check_var(x);
    tensor out = values_[size_t(x)];
    for (double & v : out.values) {
        v = std::tanh(v);
    }
    return push({op::tanh_op, {x}}, std::move(out));
}

tape::var tape::gelu(var x) {
    check_var(x);
    tensor out = values_[size_t(x)];
    for (double & v : out.values) {
        const double u = kSqrt2OverPi * (v + kGeluCoef * v * v * v);
        v = 0.5 * v * (1.0 + std::tanh(u));
    }
    return push({op::gelu, {x}}, std::move(out));
}

tape::var tape::gather_rows(var table, std::vector<int64_t> ids) {
    check_var(table);
    const tensor & tt = values_[size_t(table)];
    if (tt.rank() != 2) {
        throw shape_error("gather_rows: table must be 2-D, got " + tt.shape_str());
    }
    if (ids.empty()) {
        throw argument_error("gather_rows: empty id list");
    }
    const int64_t d = tt.cols();
    tensor out = tensor::zeros({int64_t(ids.size()), d});
    for (size_t r = 0; r < ids.size(); ++r) {
        const int64_t id = ids[r];
        if (id < 0 || id >= tt.rows()) {
            throw input_error("gather_rows: id " + std::to_string(id) + " out of range [0, " +
                              std::to_string(tt.rows()) + ")");
        }
        for (int64_t c = 0; c < d; ++c) {
            out.at(int64_t(r), c) = tt.at(id, c);
        }
    }
    node n{op::gather_rows, {table}};
    n.ids = std::move(ids);
    return push(std::move(n), std::move(out));
}

tape::var tape::row_scale(var x, var v) {
    check_var(x);
    check_var(v);
    const tensor & tx = values_[size_t(x)];
    const tensor & tv = values_[size_t(v)];
    if (tx.rank() != 2 || tv.rank() != 1 || tv.numel() != tx.cols()) {
        throw shape_error("row_scale: need [t,d] and [d], got " + tx.shape_str() + " and " +
                          tv.shape_str());
    }
    tensor out = tx;
    for (int64_t r = 0; r < tx.rows(); ++r) {
        for (int64_t c = 0; c < tx.cols(); ++c) {
            out.at(r, c) = tx.at(r, c) * tv.values[size_t(c)];
        }
    }
    return push({op::row_scale, {x, v}}, std::move(out));
}

tape::var tape::row_add(var x, var v) {
    check_var(x);
    check_var(v);
    const tensor & tx = values_[size_t(x)];
    const tensor & tv = values_[size_t(v)];
    if (tx.rank() != 2 || tv.rank() != 1 || tv.numel() != tx.cols()) {
        throw shape_error("row_add: need [t,d] and [d], got " + tx.shape_str() + " and " +
                          tv.shape_str());
    }
    tensor out = tx;
    for (int64_t r = 0; r < tx.rows(); ++r) {
        for (int64_t c = 0; c < tx.cols(); ++c) {
            out.at(r, c) = tx.at(r, c) + tv.values[size_t(c)];
        }
    }
    return push({op::row_add, {x, v}}, std::move(out));
}

tape::var tape::mean_pool(var x, int64_t valid) {
    check_var(x);
    const tensor & tx = values_[size_t(x)];
    if (tx.rank() != 2) {
        throw shape_error("mean_pool: need [tokens,dim], got " + tx.shape_str());
    }
    if (valid < 1 || valid > tx.rows()) {
        throw argument_error("mean_pool: valid " + std::to_string(valid) + " out of range [1, " +
                             std::to_string(tx.rows()) + "]");
    }
    tensor out = tensor::zeros({tx.cols()});
    for (int64_t r = 0; r < valid; ++r) {
        for (int64_t c = 0; c < tx.cols(); ++c) {
            out.values[size_t(c)] += tx.at(r, c);
        }
    }
    for (double & v : out.values) {
        v /= double(valid);
    }
    node n{op::mean_pool, {x}};
    n.count = valid;
    return push(std::move(n), std::move(out));
}

tape::var tape::l2_normalize(var x, double eps) {
    check_var(x);
    const tensor & tx = values_[size_t(x)];
    if (tx.rank() != 1) {
        throw shape_error("l2_normalize: need [dim], got " + tx.shape_str());
    }
    if (eps <= 0.0) {
        throw argument_error("l2_normalize: eps must be positive");
    }
    double sq = 0.0;
    for (double v : tx.values) {
        sq += v * v;
    }
    const double norm = std::sqrt(sq);
    tensor out = tx;
    for (double & v : out.values) {
        v /= norm + eps;
    }
    node n{op::l2_normalize, {x}};
    n.c = eps;
    return push(std::move(n), std::move(out));
}

tape::var tape::dot(var a, var b) {
    check_var(a);
    check_var(b);
    const tensor & ta = values_[size_t(a)];
    const tensor & tb = values_[size_t(b)];
    if (!ta.same_shape(tb)) {
        throw shape_error("dot: shapes " + ta.shape_str() + " and " + tb.shape_str() +
                          " disagree");
    }
    double acc = 0.0;
    for (size_t i = 0; i < ta.values.size(); ++i) {
        acc += ta.values[i] * tb.values[i];
    }
    return push({op::dot, {a, b}}, tensor::scalar(acc));
}

tape::var tape::sum(var x) {
    check_var(x);
    const tensor & tx = values_[size_t(x)];
    double acc = 0.0;
    for (double v : tx.values) {
        acc += v;
    }
    return push({op::sum, {x}}, tensor::scalar(acc));
}

tape::var tape::pack(std::span<const var> scalars) {
    if (scalars.empty()) {
        throw argument_error("pack: empty input list");
    }
    node n{op::pack, {}};
    tensor out = tensor::zeros({int64_t(scalars.size())});
    for (size_t i = 0; i < scalars.size(); ++i) {
        check_var(scalars[i]);
        const tensor & t = values_[size_t(scalars[i])];
        if (!t.is_scalar()) {
            throw shape_error("pack: input " + std::to_string(i) + " has shape " + t.shape_str() +
                              ", expected scalar");
        }
        out.values[i] = t.values[0];
        n.inputs.push_back(scalars[i]);
    }
    return push(std::move(n), std::move(out));
}

tape::var tape::infonce_head(var sims, double tau) {
    check_var(sims);
    const tensor & ts = values_[size_t(sims)];
    if (ts.rank() != 1 || ts.numel() < 2) {
        throw shape_error("infonce_head: need [1 + negatives] similarities, got " +
                          ts.shape_str());
    }
    if (tau <= 0.0) {
        throw argument_error("infonce_head: temperature must be positive");
    }
    // loss = -log softmax_0(sims / tau), computed via a stable log-sum-exp
    double m = ts.values[0] / tau;
    for (double v : ts.values) {
        m = std::max(m, v / tau);
    }
    double z = 0.0;
    for (double v : ts.values) {
        z += std::exp(v / tau - m);
    }
    const double lse = m + std::log(z);
    node n{op::infonce_head, {sims}};
    n.c = tau;
    return push(std::move(n), tensor::scalar(lse - ts.values[0] / tau));
}

void tape::backward(var loss) {
    check_var(loss);
    const tensor & lt = values_[size_t(loss)];
    if (!lt.is_scalar()) {
        throw contract_error("backward: loss must be scalar, got shape " + lt.shape_str());
    }

    grads_.assign(values_.size(), tensor{});
    for (size_t i = 0; i < values_.size(); ++i) {
        grads_[i] = tensor::zeros(values_[i].shape);
    }
    std::vector<char> touched(values_.size(), 0);
    grads_[size_t(loss)].values[0] = 1.0;
    touched[size_t(loss)] = 1;

    for (var v = loss; v >= 0; --v) {
        if (!touched[size_t(v)]) {
            continue;
        }
        const node & nd = nodes_[size_t(v)];
        const tensor & g = grads_[size_t(v)];
        for (var in : nd.inputs) {
            touched[size_t(in)] = 1;
        }
        switch (nd.kind) {
            case op::leaf:
                break;
            case op::matmul: {
                const tensor & ta = values_[size_t(nd.inputs[0])];
                const tensor & tb = values_[size_t(nd.inputs[1])];
                tensor & ga = grads_[size_t(nd.inputs[0])];
                tensor & gb = grads_[size_t(nd.inputs[1])];
                const int64_t m = ta.rows(), k = ta.cols(), n = tb.cols();
                for (int64_t i = 0; i < m; ++i) {
                    for (int64_t t = 0; t < k; ++t) {
                        double acc = 0.0;
                        for (int64_t j = 0; j < n; ++j) {
                            acc += g.at(i, j) * tb.at(t, j);
                        }
                        ga.at(i, t) += acc;
                    }
                }
                for (int64_t t = 0; t < k; ++t) {
                    for (int64_t j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (int64_t i = 0; i < m; ++i) {
                            acc += ta.at(i, t) * g.at(i, j);
                        }
                        gb.at(t, j) += acc;
                    }
                }
                break;
            }
            case op::matmul_nt: {
                const tensor & ta = values_[size_t(nd.inputs[0])];
                const tensor & tb = values_[size_t(nd.inputs[1])];
                tensor & ga = grads_[size_t(nd.inputs[0])];
                tensor & gb = grads_[size_t(nd.inputs[1])];
                const int64_t m = ta.rows(), k = ta.cols(), n = tb.rows();
                // y = a b^T: da = g b, db = g^T a
                for (int64_t i = 0; i < m; ++i) {
                    for (int64_t t = 0; t < k; ++t) {
                        double acc = 0.0;
                        for (int64_t j = 0; j < n; ++j) {
                            acc += g.at(i, j) * tb.at(j, t);
                        }
                        ga.at(i, t) += acc;
                    }
                }
                for (int64_t j = 0; j < n; ++j) {
                    for (int64_t t = 0; t < k; ++t) {
                        double acc = 0.0;
                        for (int64_t i = 0; i < m; ++i) {
                            acc += g.at(i, j) * ta.at(i, t);
                        }
                        gb.at(j, t) += acc;
                    }
                }
                break;
            }
            case op::add: {
                const tensor & ta = values_[size_t(nd.inputs[0])];
                const tensor & tb = values_[size_t(nd.inputs[1])];
                tensor & ga = grads_[size_t(nd.inputs[0])];
                tensor & gb = grads_[size_t(nd.inputs[1])];
                if (ta.same_shape(tb)) {
                    for (size_t i = 0; i < g.values.size(); ++i) {
                        ga.values[i] += g.values[i];
                        gb.values[i] += g.values[i];
                    }
                } else if (tb.is_scalar()) {
                    double acc = 0.0;
                    for (size_t i = 0; i < g.values.size(); ++i) {
                        ga.values[i] += g.values[i];
                        acc += g.values[i];
                    }
                    gb.values[0] += acc;
                } else {
                    double acc = 0.0;
                    for (size_t i = 0; i < g.values.size(); ++i) {
                        gb.values[i] += g.values[i];
                        acc += g.values[i];
                    }
                    ga.values[0] += acc;
                }
                break;
            }
            case op::mul: {
                const tensor & ta = values_[size_t(nd.inputs[0])];
                const tensor & tb = values_[size_t(nd.inputs[1])];
                tensor & ga = grads_[size_t(nd.inputs[0])];
                tensor & gb = grads_[size_t(nd.inputs[1])];
                if (ta.same_shape(tb)) {
                    for (size_t i = 0; i < g.values.size(); ++i) {
                        ga.values[i] += g.values[i] * tb.values[i];
                        gb.values[i] += g.values[i] * ta.values[i];
                    }
                } else if (tb.is_scalar()) {
                    double acc = 0.0;
                    for (size_t i = 0; i < g.values.size(); ++i) {
                        ga.values[i] += g.values[i] * tb.values[0];
                        acc += g.values[i] * ta.values[i];
                    }
                    gb.values[0] += acc;
                } else {
                    double acc = 0.0;
                    for (size_t i = 0; i < g.values.size(); ++i) {
                        gb.values[i] += g.values[i] * ta.values[0];
                        acc += g.values[i] * tb.values[i];
                    }
                    ga.values[0] += acc;
                }
                break;
            }
            case op::scale: {
                tensor & gx = grads_[size_t(nd.inputs[0])];
                for (size_t i = 0; i < g.values.size(); ++i) {
                    gx.values[i] += nd.c * g.values[i];
                }
                break;
            }
            case op::tanh_op: {
                const tensor & y = values_[size_t(v)];
                tensor & gx = grads_[size_t(nd.inputs[0])];
                for (size_t i = 0; i < g.values.size(); ++i) {
                    gx.values[i] += g.values[i] * (1.0 - y.values[i] * y.values[i]);
                }
                break;
            }
            case op::gelu: {
                const tensor & x = values_[size_t(nd.inputs[0])];
                tensor & gx = grads_[size_t(nd.inputs[0])];
                for (size_t i = 0; i < g.values.size(); ++i) {
                    const double xv = x.values[i];
                    const double u  = kSqrt2OverPi * (xv + kGeluCoef * xv * xv * xv);
                    const double th = std::tanh(u);
                    const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoef * xv * xv);
                    gx.values[i] += g.values[i] *
                                    (0.5 * (1.0 + th) + 0.5 * xv * (1.0 - th * th) * du);
                }
                break;
            }
            case op::gather_rows: {
                const tensor & table = values_[size_t(nd.inputs[0])];
                tensor & gt = grads_[size_t(nd.inputs[0])];
                const int64_t d = table.cols();
                for (size_t r = 0; r < nd.ids.size(); ++r) {
                    const int64_t id = nd.ids[r];
                    for (int64_t c = 0; c < d; ++c) {
                        gt.at(id, c) += g.at(int64_t(r), c);
                    }
                }
                break;
            }
            case op::row_scale: {
                const tensor & x = values_[size_t(nd.inputs[0])];
                const tensor & w = values_[size_t(nd.inputs[1])];
                tensor & gx = grads_[size_t(nd.inputs[0])];
                tensor & gw = grads_[size_t(nd.inputs[1])];
                for (int64_t r = 0; r < x.rows(); ++r) {
                    for (int64_t c = 0; c < x.cols(); ++c) {
                        gx.at(r, c) += g.at(r, c) * w.values[size_t(c)];
                        gw.values[size_t(c)] += g.at(r, c) * x.at(r, c);
                    }
                }
                break;
            }
            case op::row_add: {
                const tensor & x = values_[size_t(nd.inputs[0])];
                tensor & gx = grads_[size_t(nd.inputs[0])];
                tensor & gw = grads_[size_t(nd.inputs[1])];
                for (int64_t r = 0; r < x.rows(); ++r) {
                    for (int64_t c = 0; c < x.cols(); ++c) {
                        gx.at(r, c) += g.at(r, c);
                        gw.values[size_t(c)] += g.at(r, c);
                    }
                }
                break;
            }
            case op::mean_pool: {
                const tensor & x = values_[size_t(nd.inputs[0])];
                tensor & gx = grads_[size_t(nd.inputs[0])];
                const double inv = 1.0 / double(nd.count);
                for (int64_t r = 0; r < nd.count; ++r) {
                    for (int64_t c = 0; c < x.cols(); ++c) {
                        gx.at(r, c) += g.values[size_t(c)] * inv;
                    }
                }
                break;
            }
            case op::l2_normalize: {
                const tensor & x = values_[size_t(nd.inputs[0])];
                tensor & gx = grads_[size_t(nd.inputs[0])];
                double sq = 0.0;
                for (double xv : x.values) {
                    sq += xv * xv;
                }
                const double norm = std::sqrt(sq);
                const double s    = norm + nd.c;
                double xdotg = 0.0;
                for (size_t i = 0; i < x.values.size(); ++i) {
                    xdotg += x.values[i] * g.values[i];
                }
                for (size_t i = 0; i < x.values.size(); ++i) {
                    double d = g.values[i] / s;
                    if (norm > 0.0) {
                        d -= x.values[i] * xdotg / (norm * s * s);
                    }
                    gx.values[i] += d;
                }
                break;
            }
            case op::dot: {
                const tensor & ta = values_[size_t(nd.inputs[0])];
                const tensor & tb = values_[size_t(nd.inputs[1])];
                tensor & ga = grads_[size_t(nd.inputs[0])];
                tensor & gb = grads_[size_t(nd.inputs[1])];
                const double gv = g.values[0];
                for (size_t i = 0; i < ta.values.size(); ++i) {
                    ga.values[i] += gv * tb.values[i];
                    gb.values[i] += gv * ta.values[i];
                }
                break;
            }
            case op::sum: {
                tensor & gx = grads_[size_t(nd.inputs[0])];
                const double gv = g.values[0];
                for (double & d : gx.values) {
                    d += gv;
                }
                break;
            }
            case op::pack: {
                for (size_t i = 0; i < nd.inputs.size(); ++i) {
                    grads_[size_t(nd.inputs[i])].values[0] += g.values[i];
                }
                break;
            }
            case op::infonce_head: {
                const tensor & sims = values_[size_t(nd.inputs[0])];
                tensor & gs = grads_[size_t(nd.inputs[0])];
                const double tau = nd.c;
                double m = sims.values[0] / tau;
                for (double sv : sims.values) {
                    m = std::max(m, sv / tau);
                }
                double z = 0.0;
                for (double sv : sims.values) {
                    z += std::exp(sv / tau - m);
                }
                const double lse = m + std::log(z);
                const double gv  = g.values[0];
                for (size_t i = 0; i < sims.values.size(); ++i) {
                    const double p = std::exp(sims.values[i] / tau - lse);
                    gs.values[i] += gv * (p - (i == 0 ? 1.0 : 0.0)) / tau;
                }
                break;
            }
        }
    }
    has_grads_ = true;
}

tensor finite_diff_grad(const std::function<double(const tensor &)> & f, const tensor & x,
                        double step) {
    if (step <= 0.0) {
        throw argument_error("finite_diff_grad: step must be positive");
    }
    tensor g = tensor::zeros(x.shape);
    tensor probe = x;
    for (size_t i = 0; i < x.values.size(); ++i) {
        const double orig = probe.values[i];
        probe.values[i] = orig + step;
        const double hi = f(probe);
        probe.values[i] = orig - step;
        const double lo = f(probe);
        probe.values[i] = orig;
        g.values[i] = (hi - lo) / (2.0 * step);
    }
    return g;
}

} // namespace gaprune
