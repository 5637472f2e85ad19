#include "gaprune/errors.hpp"
#include "gaprune/rng.hpp"
#include "gaprune/tape.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace gaprune;
using testutil::random_tensor;

namespace {

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max(std::fabs(b), 1e-6);
}

// Checks tape gradients of loss = sum(out * W) against central finite
// differences for every input, W fixed random. `build` must record the op
// under test (and nothing else that consumes the inputs).
void check_gradients(const std::function<tape::var(tape &, const std::vector<tape::var> &)> & build,
                     const std::vector<tensor> & inputs, uint64_t seed,
                     double tol = 1e-4, double step = 1e-5) {
    tape t;
    std::vector<tape::var> vars;
    for (const tensor & in : inputs) {
        vars.push_back(t.leaf(in));
    }
    const tape::var out = build(t, vars);
    rng wr(seed ^ 0x9e3779b97f4a7c15ull);
    const tensor w = random_tensor(t.value(out).shape, wr);
    const tape::var loss = t.sum(t.mul(out, t.leaf(w)));
    t.backward(loss);

    for (size_t i = 0; i < inputs.size(); ++i) {
        auto f = [&](const tensor & x) {
            tape ft;
            std::vector<tape::var> fvars;
            for (size_t j = 0; j < inputs.size(); ++j) {
                fvars.push_back(ft.leaf(j == i ? x : inputs[j]));
            }
            const tape::var fout = build(ft, fvars);
            return ft.value(ft.sum(ft.mul(fout, ft.leaf(w)))).values[0];
        };
        const tensor fd = finite_diff_grad(f, inputs[i], step);
        const tensor & an = t.grad(vars[i]);
        REQUIRE(an.same_shape(fd));
        for (size_t c = 0; c < fd.values.size(); ++c) {
            INFO("input ", i, " coord ", c);
            CHECK(rel_err(an.values[c], fd.values[c]) < tol);
        }
    }
}

} // namespace

TEST_CASE("matmul values") {
    tape t;
    const tape::var eye = t.leaf(tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    rng r(1);
    const tensor a = random_tensor({3, 3}, r);
    CHECK(t.value(t.matmul(eye, t.leaf(a))).values == a.values);

    const tape::var m = t.matmul(t.leaf(tensor::matrix(2, 2, {1, 2, 3, 4})),
                                 t.leaf(tensor::matrix(2, 1, {1, 1})));
    CHECK(t.value(m).values == std::vector<double>{3, 7});
}

TEST_CASE("matmul shape error names both shapes") {
    tape t;
    const tape::var a = t.leaf(tensor::zeros({2, 3}));
    const tape::var b = t.leaf(tensor::zeros({2, 2}));
    try {
        t.matmul(a, b);
        FAIL("expected shape_error");
    } catch (const shape_error & e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[2x2]") != std::string::npos);
    }
}

TEST_CASE("gradient of sum(A*B) wrt A is row-broadcast of column sums of B") {
    rng r(17);
    const tensor a = random_tensor({3, 4}, r);
    const tensor b = random_tensor({4, 2}, r);
    tape t;
    const tape::var av = t.leaf(a);
    const tape::var loss = t.sum(t.matmul(av, t.leaf(b)));
    t.backward(loss);

    // d sum(AB) / dA[i,t] = sum_j B[t,j]
    const tensor & ga = t.grad(av);
    for (int64_t i = 0; i < 3; ++i) {
        for (int64_t k = 0; k < 4; ++k) {
            double colsum = 0.0;
            for (int64_t j = 0; j < 2; ++j) {
                colsum += b.at(k, j);
            }
            CHECK(ga.at(i, k) == doctest::Approx(colsum).epsilon(1e-12));
        }
    }

    auto f = [&](const tensor & x) {
        tape ft;
        return ft.value(ft.sum(ft.matmul(ft.leaf(x), ft.leaf(b)))).values[0];
    };
    const tensor fd = finite_diff_grad(f, a, 1e-6);
    for (size_t c = 0; c < fd.values.size(); ++c) {
        CHECK(rel_err(ga.values[c], fd.values[c]) < 1e-6);
    }
}

TEST_CASE("pointwise values and derivatives") {
    tape t;
    CHECK(t.value(t.tanh(t.leaf(tensor::scalar(0.0)))).values[0] == 0.0);

    const tape::var x = t.leaf(tensor::scalar(0.0));
    t.backward(t.tanh(x));
    CHECK(t.grad(x).values[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("gelu gradient matches finite differences on 100 random points") {
    rng r(5);
    tensor x = tensor::zeros({100});
    for (double & v : x.values) {
        v = r.uniform(-4.0, 4.0);
    }
    tape t;
    const tape::var xv = t.leaf(x);
    t.backward(t.sum(t.gelu(xv)));
    auto f = [](const tensor & in) {
        tape ft;
        return ft.value(ft.sum(ft.gelu(ft.leaf(in)))).values[0];
    };
    const tensor fd = finite_diff_grad(f, x, 1e-5);
    for (size_t c = 0; c < 100; ++c) {
        CHECK(rel_err(t.grad(xv).values[c], fd.values[c]) < 1e-5);
    }
}

TEST_CASE("broadcast rules") {
    tape t;
    const tape::var a = t.leaf(tensor::row({1, 2, 3}));
    const tape::var s = t.leaf(tensor::scalar(10));
    CHECK(t.value(t.add(a, s)).values == std::vector<double>{11, 12, 13});
    CHECK(t.value(t.mul(s, a)).values == std::vector<double>{10, 20, 30});
    CHECK_THROWS_AS(t.add(a, t.leaf(tensor::row({1, 2}))), shape_error);
    CHECK_THROWS_AS(t.mul(a, t.leaf(tensor::zeros({2, 2}))), shape_error);
}

TEST_CASE("mean_pool values, gradient and range errors") {
    tape t;
    const tape::var single = t.leaf(tensor::matrix(1, 3, {4, 5, 6}));
    CHECK(t.value(t.mean_pool(single, 1)).values == std::vector<double>{4, 5, 6});

    const tape::var two = t.leaf(tensor::matrix(2, 1, {1, 3}));
    CHECK(t.value(t.mean_pool(two, 2)).values[0] == 2.0);

    CHECK_THROWS_AS(t.mean_pool(two, 0), argument_error);
    CHECK_THROWS_AS(t.mean_pool(two, 3), argument_error);

    // gradient: 1/valid on pooled rows, 0 elsewhere
    tape g;
    const tape::var x = g.leaf(tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
    g.backward(g.sum(g.mean_pool(x, 2)));
    const tensor & gx = g.grad(x);
    CHECK(gx.at(0, 0) == 0.5);
    CHECK(gx.at(1, 1) == 0.5);
    CHECK(gx.at(2, 0) == 0.0);
    CHECK(gx.at(2, 1) == 0.0);
}

TEST_CASE("l2_normalize values") {
    tape t;
    const tensor out = t.value(t.l2_normalize(t.leaf(tensor::row({3, 4})), 1e-12));
    CHECK(std::fabs(out.values[0] - 0.6) < 1e-9);
    CHECK(std::fabs(out.values[1] - 0.8) < 1e-9);

    const tensor zero = t.value(t.l2_normalize(t.leaf(tensor::row({0, 0, 0})), 1e-9));
    CHECK(zero.values == std::vector<double>{0, 0, 0});

    CHECK_THROWS_AS(t.l2_normalize(t.leaf(tensor::row({1})), 0.0), argument_error);

    rng r(23);
    for (int i = 0; i < 20; ++i) {
        tape tt;
        const tensor x = random_tensor({5}, r, 3.0);
        const tensor y = tt.value(tt.l2_normalize(tt.leaf(x), 1e-8));
        double norm = 0.0;
        for (double v : y.values) {
            norm += v * v;
        }
        CHECK(std::sqrt(norm) <= 1.0 + 1e-12);
    }
}

TEST_CASE("backward basics and contract error") {
    tape t;
    const tape::var x = t.leaf(tensor::scalar(3.0));
    t.backward(t.mul(x, x));
    CHECK(t.grad(x).values[0] == doctest::Approx(6.0).epsilon(1e-15));

    tape c;
    const tape::var k1 = c.leaf(tensor::scalar(2.0));
    const tape::var k2 = c.leaf(tensor::scalar(5.0));
    const tape::var loss = c.sum(c.add(k1, k2));
    c.backward(loss);
    // constants feeding the loss get gradient 1; an untouched leaf gets 0
    const tape::var unused = c.leaf(tensor::row({1, 2}));
    c.backward(loss);
    CHECK(c.grad(unused).values == std::vector<double>{0, 0});

    tape n;
    const tape::var vec = n.leaf(tensor::row({1, 2}));
    CHECK_THROWS_AS(n.backward(vec), contract_error);
}

TEST_CASE("finite_diff_grad basics") {
    auto square = [](const tensor & x) { return x.values[0] * x.values[0]; };
    const tensor g = finite_diff_grad(square, tensor::scalar(3.0), 1e-5);
    CHECK(std::fabs(g.values[0] - 6.0) < 1e-8);

    auto constant = [](const tensor &) { return 7.5; };
    const tensor gc = finite_diff_grad(constant, tensor::row({1, 2, 3}), 1e-5);
    CHECK(gc.values == std::vector<double>{0, 0, 0});

    auto total = [](const tensor & x) {
        double acc = 0.0;
        for (double v : x.values) {
            acc += v;
        }
        return acc;
    };
    const tensor gs = finite_diff_grad(total, tensor::row({4, 5}), 1e-5);
    CHECK(std::fabs(gs.values[0] - 1.0) < 1e-9);
    CHECK(std::fabs(gs.values[1] - 1.0) < 1e-9);

    CHECK_THROWS_AS(finite_diff_grad(square, tensor::scalar(1.0), 0.0), argument_error);
}

TEST_CASE("gradient check: every primitive, 10 seeds") {
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        rng r(seed);

        check_gradients([](tape & t, const auto & v) { return t.matmul(v[0], v[1]); },
                        {random_tensor({3, 4}, r), random_tensor({4, 2}, r)}, seed);
        check_gradients([](tape & t, const auto & v) { return t.matmul_nt(v[0], v[1]); },
                        {random_tensor({3, 4}, r), random_tensor({2, 4}, r)}, seed);
        check_gradients([](tape & t, const auto & v) { return t.add(v[0], v[1]); },
                        {random_tensor({2, 3}, r), random_tensor({2, 3}, r)}, seed);
        check_gradients([](tape & t, const auto & v) { return t.add(v[0], v[1]); },
                        {random_tensor({2, 3}, r), random_tensor({1}, r)}, seed);
        check_gradients([](tape & t, const auto & v) { return t.mul(v[0], v[1]); },
                        {random_tensor({2, 3}, r), random_tensor({2, 3}, r)}, seed);
        check_gradients([](tape & t, const auto & v) { return t.mul(v[0], v[1]); },
                        {random_tensor({1}, r), random_tensor({2, 3}, r)}, seed);
        check_gradients([](tape & t, const auto & v) { return t.scale(v[0], -1.7); },
                        {random_tensor({5}, r)}, seed);
        check_gradients([](tape & t, const auto & v) { return t.tanh(v[0]); },
                        {random_tensor({6}, r)}, seed);
        check_gradients([](tape & t, const auto & v) { return t.gelu(v[0]); },
                        {random_tensor({6}, r, 2.0)}, seed);
        check_gradients(
            [](tape & t, const auto & v) { return t.gather_rows(v[0], {0, 2, 2, 1}); },
            {random_tensor({4, 3}, r)}, seed);
        check_gradients([](tape & t, const auto & v) { return t.row_scale(v[0], v[1]); },
                        {random_tensor({3, 4}, r), random_tensor({4}, r)}, seed);
        check_gradients([](tape & t, const auto & v) { return t.row_add(v[0], v[1]); },
                        {random_tensor({3, 4}, r), random_tensor({4}, r)}, seed);
        check_gradients([](tape & t, const auto & v) { return t.mean_pool(v[0], 2); },
                        {random_tensor({4, 3}, r)}, seed);

        tensor x = random_tensor({5}, r);
        x.values[0] += 2.0; // keep the norm away from zero
        check_gradients([](tape & t, const auto & v) { return t.l2_normalize(v[0], 1e-8); },
                        {x}, seed);

        check_gradients([](tape & t, const auto & v) { return t.dot(v[0], v[1]); },
                        {random_tensor({6}, r), random_tensor({6}, r)}, seed);
        check_gradients([](tape & t, const auto & v) { return t.sum(v[0]); },
                        {random_tensor({2, 3}, r)}, seed);
        check_gradients(
            [](tape & t, const auto & v) {
                const std::vector<tape::var> parts = {v[0], v[1], v[2]};
                return t.pack(parts);
            },
            {random_tensor({1}, r), random_tensor({1}, r), random_tensor({1}, r)}, seed);

        tensor sims = tensor::zeros({4});
        for (double & v : sims.values) {
            v = r.uniform(-1.0, 1.0);
        }
        check_gradients(
            [](tape & t, const auto & v) { return t.infonce_head(v[0], 0.05); }, {sims}, seed);
    }
}

TEST_CASE("determinism: identical tape gives bit-identical outputs and gradients") {
    auto run = [](std::vector<double> & out_vals, std::vector<double> & out_grads) {
        rng r(99);
        tape t;
        const tape::var a = t.leaf(random_tensor({4, 4}, r));
        const tape::var b = t.leaf(random_tensor({4, 4}, r));
        const tape::var h = t.gelu(t.matmul(a, b));
        const tape::var loss = t.sum(t.l2_normalize(t.mean_pool(h, 3), 1e-8));
        t.backward(loss);
        out_vals = t.value(loss).values;
        out_grads = t.grad(a).values;
    };
    std::vector<double> v1, g1, v2, g2;
    run(v1, g1);
    run(v2, g2);
    CHECK(std::memcmp(v1.data(), v2.data(), v1.size() * 8) == 0);
    CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * 8) == 0);
}

TEST_CASE("linearity of backward") {
    rng r(7);
    const tensor x0 = random_tensor({4}, r);
    const double a = 2.25, b = -0.75;

    auto grad_of = [&](bool first, bool second, double ca, double cb) {
        tape t;
        const tape::var x = t.leaf(x0);
        const tape::var l1 = t.sum(t.tanh(x));
        const tape::var l2 = t.dot(x, x);
        tape::var loss;
        if (first && second) {
            loss = t.add(t.scale(l1, ca), t.scale(l2, cb));
        } else if (first) {
            loss = l1;
        } else {
            loss = l2;
        }
        t.backward(loss);
        return t.grad(x).values;
    };

    const std::vector<double> g1 = grad_of(true, false, 0, 0);
    const std::vector<double> g2 = grad_of(false, true, 0, 0);
    const std::vector<double> gc = grad_of(true, true, a, b);
    for (size_t i = 0; i < g1.size(); ++i) {
        CHECK(std::fabs(gc[i] - (a * g1[i] + b * g2[i])) < 1e-12);
    }
}
