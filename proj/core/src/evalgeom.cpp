#include "gaprune/evalgeom.hpp"

#include "gaprune/checkpoint.hpp"
#include "gaprune/errors.hpp"
#include "gaprune/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace gaprune {

namespace {

double cosine(const tensor & a, const tensor & b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    return denom > 0.0 ? dot / denom : 0.0;
}

double sq_dist(const tensor & a, const tensor & b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        acc += d * d;
    }
    return acc;
}

std::vector<tensor> embed_texts(const param_registry & registry,
                                std::span<const std::string> texts) {
    encoder_session s(registry);
    std::vector<tensor> out;
    out.reserve(texts.size());
    for (const std::string & text : texts) {
        out.push_back(s.t().value(s.embed_text(text)));
    }
    return out;
}

// ranked doc indices for one query embedding: cosine desc, index asc on ties
std::vector<int64_t> rank_docs(const tensor & query, std::span<const tensor> docs) {
    std::vector<std::pair<double, int64_t>> scored;
    scored.reserve(docs.size());
    for (size_t i = 0; i < docs.size(); ++i) {
        scored.emplace_back(cosine(query, docs[i]), int64_t(i));
    }
    std::sort(scored.begin(), scored.end(), [](const auto & a, const auto & b) {
        if (a.first != b.first) {
            return a.first > b.first;
        }
        return a.second < b.second;
    });
    std::vector<int64_t> ranked;
    ranked.reserve(scored.size());
    for (const auto & [score, idx] : scored) {
        ranked.push_back(idx);
    }
    return ranked;
}

double mean_ndcg(std::span<const tensor> query_embs, std::span<const tensor> doc_embs,
                 std::span<const int64_t> gold) {
    double total = 0.0;
    for (size_t i = 0; i < query_embs.size(); ++i) {
        const std::vector<int64_t> ranked = rank_docs(query_embs[i], doc_embs);
        const int64_t rel[1] = {gold[i]};
        total += ndcg_at_10(ranked, rel);
    }
    return total / double(query_embs.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw undefined_error("pearson: constant input");
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

double ndcg_at_10(std::span<const int64_t> ranked, std::span<const int64_t> relevant) {
    if (relevant.empty()) {
        throw undefined_error("ndcg_at_10: no relevant ids");
    }
    double dcg = 0.0;
    const size_t depth = std::min<size_t>(10, ranked.size());
    for (size_t i = 0; i < depth; ++i) {
        const bool rel = std::find(relevant.begin(), relevant.end(), ranked[i]) != relevant.end();
        if (rel) {
            dcg += 1.0 / std::log2(double(i) + 2.0);
        }
    }
    double idcg = 0.0;
    const size_t ideal = std::min<size_t>(10, relevant.size());
    for (size_t i = 0; i < ideal; ++i) {
        idcg += 1.0 / std::log2(double(i) + 2.0);
    }
    return dcg / idcg;
}

double eval_retrieval(const param_registry & registry, const retrieval_fixture & fx) {
    if (fx.queries.empty() || fx.docs.empty()) {
        throw argument_error("eval_retrieval: empty fixture");
    }
    const std::vector<tensor> q = embed_texts(registry, fx.queries);
    const std::vector<tensor> d = embed_texts(registry, fx.docs);
    return mean_ndcg(q, d, fx.gold);
}

std::vector<double> layer_probe_eval(const param_registry & registry,
                                     const retrieval_fixture & fx) {
    const int64_t layers = registry.config.num_layers;
    std::vector<std::vector<tensor>> q_by_layer(size_t(layers), std::vector<tensor>{});
    std::vector<std::vector<tensor>> d_by_layer(size_t(layers), std::vector<tensor>{});

    encoder_session s(registry);
    auto embed_all_layers = [&](const std::string & text, std::vector<std::vector<tensor>> & out) {
        std::vector<tape::var> per_layer;
        s.embed_text(text, &per_layer);
        for (int64_t l = 0; l < layers; ++l) {
            out[size_t(l)].push_back(s.t().value(per_layer[size_t(l)]));
        }
    };
    for (const std::string & text : fx.queries) {
        embed_all_layers(text, q_by_layer);
    }
    for (const std::string & text : fx.docs) {
        embed_all_layers(text, d_by_layer);
    }

    std::vector<double> out;
    for (int64_t l = 0; l < layers; ++l) {
        out.push_back(mean_ndcg(q_by_layer[size_t(l)], d_by_layer[size_t(l)], fx.gold));
    }
    return out;
}

double eval_classification(const param_registry & registry, const classification_fixture & fx,
                           double train_fraction, int64_t k, uint64_t seed) {
    const size_t n = fx.texts.size();
    if (n < 2 || k < 1) {
        throw argument_error("eval_classification: need >= 2 points and k >= 1");
    }
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw argument_error("eval_classification: train_fraction must be in (0, 1)");
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng r(seed);
    for (size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[size_t(r.below(i))]);
    }
    const size_t n_train = std::max<size_t>(1, size_t(train_fraction * double(n)));
    if (n_train >= n) {
        throw argument_error("eval_classification: empty test split");
    }
    if (int64_t(n_train) < k) {
        throw argument_error("eval_classification: fewer train points than k");
    }

    std::vector<int64_t> classes(fx.labels.begin(), fx.labels.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2) {
        throw argument_error("eval_classification: need >= 2 classes");
    }

    std::vector<char> in_train(n, 0);
    for (size_t i = 0; i < n_train; ++i) {
        in_train[order[i]] = 1;
    }
    for (int64_t c : classes) {
        bool present = false;
        for (size_t i = 0; i < n; ++i) {
            if (in_train[i] && fx.labels[i] == c) {
                present = true;
                break;
            }
        }
        if (!present) {
            throw argument_error("eval_classification: class " + std::to_string(c) +
                                 " absent from train split");
        }
    }

    const std::vector<tensor> embs = embed_texts(registry, fx.texts);

    int64_t correct = 0, total = 0;
    for (size_t i = 0; i < n; ++i) {
        if (in_train[i]) {
            continue;
        }
        // neighbors by cosine distance asc, index asc on ties
        std::vector<std::pair<double, size_t>> neigh;
        for (size_t j = 0; j < n; ++j) {
            if (!in_train[j]) {
                continue;
            }
            neigh.emplace_back(1.0 - cosine(embs[i], embs[j]), j);
        }
        std::sort(neigh.begin(), neigh.end(), [](const auto & a, const auto & b) {
            if (a.first != b.first) {
                return a.first < b.first;
            }
            return a.second < b.second;
        });
        const size_t kk = std::min<size_t>(size_t(k), neigh.size());
        std::map<int64_t, int64_t> votes;
        for (size_t j = 0; j < kk; ++j) {
            ++votes[fx.labels[neigh[j].second]];
        }
        int64_t best_votes = 0;
        for (const auto & [label, v] : votes) {
            best_votes = std::max(best_votes, v);
        }
        // tie: label of the closest neighbor among the tied classes
        int64_t pred = -1;
        for (size_t j = 0; j < kk; ++j) {
            const int64_t label = fx.labels[neigh[j].second];
            if (votes[label] == best_votes) {
                pred = label;
                break;
            }
        }
        correct += (pred == fx.labels[i]) ? 1 : 0;
        ++total;
    }
    return double(correct) / double(total);
}

double spearman(std::span<const double> pred, std::span<const double> gold) {
    if (pred.size() != gold.size() || pred.size() < 2) {
        throw argument_error("spearman: need two equal-length series of >= 2 points");
    }
    auto ranks = [](std::span<const double> v) {
        const size_t n = v.size();
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
        std::vector<double> out(n, 0.0);
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) {
                ++j;
            }
            const double avg = double(i + j) / 2.0;
            for (size_t t = i; t <= j; ++t) {
                out[order[t]] = avg;
            }
            i = j + 1;
        }
        return out;
    };
    const std::vector<double> rp = ranks(pred);
    const std::vector<double> rg = ranks(gold);
    return pearson(rp, rg);
}

double eval_sts(const param_registry & registry, const sts_fixture & fx) {
    if (fx.first.size() != fx.second.size() || fx.first.size() != fx.gold.size()) {
        throw argument_error("eval_sts: inconsistent fixture");
    }
    const std::vector<tensor> a = embed_texts(registry, fx.first);
    const std::vector<tensor> b = embed_texts(registry, fx.second);
    std::vector<double> pred;
    pred.reserve(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        pred.push_back(cosine(a[i], b[i]));
    }
    return spearman(pred, fx.gold);
}

double uniformity_loss(std::span<const tensor> embeddings, double t, uint64_t seed) {
    const int64_t n = int64_t(embeddings.size());
    if (n < 2) {
        throw argument_error("uniformity_loss: need >= 2 embeddings");
    }
    double sum = 0.0;
    int64_t pairs = 0;
    if (n <= 1024) {
        for (int64_t i = 0; i < n; ++i) {
            for (int64_t j = 0; j < n; ++j) {
                if (i == j) {
                    continue;
                }
                sum += std::exp(-t * sq_dist(embeddings[size_t(i)], embeddings[size_t(j)]));
                ++pairs;
            }
        }
    } else {
        rng r(seed);
        const int64_t samples = 1024 * 1024;
        for (int64_t s = 0; s < samples; ++s) {
            const int64_t i = int64_t(r.below(uint64_t(n)));
            int64_t j = int64_t(r.below(uint64_t(n - 1)));
            if (j >= i) {
                ++j;
            }
            sum += std::exp(-t * sq_dist(embeddings[size_t(i)], embeddings[size_t(j)]));
            ++pairs;
        }
    }
    return std::log(sum / double(pairs));
}

double alignment_loss(std::span<const tensor> q, std::span<const tensor> p, double power) {
    if (q.size() != p.size() || q.empty()) {
        throw argument_error("alignment_loss: paired inputs of equal nonzero size required");
    }
    double sum = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        sum += std::pow(std::sqrt(sq_dist(q[i], p[i])), power);
    }
    return sum / double(q.size());
}

double cross_dim_corr(std::span<const tensor> q, std::span<const tensor> p, int64_t * skipped) {
    if (q.size() != p.size() || q.size() < 2) {
        throw argument_error("cross_dim_corr: need >= 2 pairs");
    }
    const int64_t d = q[0].numel();
    std::vector<double> qc(q.size()), pc(q.size());
    double total = 0.0;
    int64_t used = 0, skip = 0;
    for (int64_t k = 0; k < d; ++k) {
        for (size_t i = 0; i < q.size(); ++i) {
            qc[i] = q[i].values[size_t(k)];
            pc[i] = p[i].values[size_t(k)];
        }
        try {
            total += std::fabs(pearson(qc, pc));
            ++used;
        } catch (const undefined_error &) {
            ++skip;
        }
    }
    if (skipped) {
        *skipped = skip;
    }
    if (used == 0) {
        throw undefined_error("cross_dim_corr: all dimensions have zero variance");
    }
    return total / double(used);
}

int64_t effective_dim(std::span<const tensor> embeddings, double threshold) {
    const size_t n = embeddings.size();
    if (n < 2) {
        throw argument_error("effective_dim: need >= 2 embeddings");
    }
    const int64_t d = embeddings[0].numel();
    std::vector<double> var(size_t(d), 0.0);
    for (int64_t k = 0; k < d; ++k) {
        double mean = 0.0;
        for (const tensor & e : embeddings) {
            mean += e.values[size_t(k)];
        }
        mean /= double(n);
        double acc = 0.0;
        for (const tensor & e : embeddings) {
            const double dv = e.values[size_t(k)] - mean;
            acc += dv * dv;
        }
        var[size_t(k)] = acc / double(n);
    }
    const double total = std::accumulate(var.begin(), var.end(), 0.0);
    if (total <= 0.0) {
        throw undefined_error("effective_dim: zero total variance");
    }
    std::sort(var.begin(), var.end(), std::greater<double>());
    double cum = 0.0;
    for (int64_t k = 0; k < d; ++k) {
        cum += var[size_t(k)];
        if (cum / total >= threshold) {
            return k + 1;
        }
    }
    return d;
}

double cosine_to_dense(std::span<const tensor> pruned, std::span<const tensor> dense) {
    if (pruned.size() != dense.size() || pruned.empty()) {
        throw argument_error("cosine_to_dense: paired inputs of equal nonzero size required");
    }
    double sum = 0.0;
    for (size_t i = 0; i < pruned.size(); ++i) {
        sum += cosine(pruned[i], dense[i]);
    }
    return sum / double(pruned.size());
}

geometry_report compute_geometry(const param_registry & pruned, const param_registry & dense,
                                 std::span<const triplet_record> sample, double t_param,
                                 double power_param, uint64_t pair_seed) {
    if (sample.empty()) {
        throw argument_error("compute_geometry: empty sample");
    }
    std::vector<std::string> queries, positives;
    for (const triplet_record & r : sample) {
        queries.push_back(r.query);
        positives.push_back(r.positive);
    }
    const std::vector<tensor> q = embed_texts(pruned, queries);
    const std::vector<tensor> p = embed_texts(pruned, positives);
    const std::vector<tensor> q_dense = embed_texts(dense, queries);

    geometry_report rep;
    rep.sample_size = int64_t(sample.size());
    rep.uniformity = uniformity_loss(q, t_param, pair_seed);
    rep.alignment = alignment_loss(q, p, power_param);
    rep.cross_dim = cross_dim_corr(q, p, &rep.cross_dim_skipped);
    rep.cosine_to_dense = gaprune::cosine_to_dense(q, q_dense);
    rep.effective_dim = effective_dim(q);
    return rep;
}

std::vector<double> rank_normalize(std::span<const double> scores) {
    const size_t d = scores.size();
    if (d < 2) {
        throw argument_error("rank_normalize: need >= 2 scores");
    }
    std::vector<size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    std::vector<double> out(d, 0.0);
    size_t i = 0;
    while (i < d) {
        size_t j = i;
        while (j + 1 < d && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        const double avg = double(i + j) / 2.0;
        for (size_t t = i; t <= j; ++t) {
            out[order[t]] = avg / double(d - 1);
        }
        i = j + 1;
    }
    return out;
}

std::vector<double> flatten_scores(const importance_map & map) {
    std::vector<double> out;
    for (const tensor & t : map.scores) {
        out.insert(out.end(), t.values.begin(), t.values.end());
    }
    return out;
}

std::vector<std::vector<double>> method_correlation(std::span<const importance_map> maps) {
    if (maps.empty()) {
        throw argument_error("method_correlation: no maps");
    }
    for (const importance_map & m : maps) {
        if (m.names != maps[0].names || m.shapes != maps[0].shapes ||
            m.registry_fingerprint != maps[0].registry_fingerprint) {
            throw integrity_error("method_correlation: maps cover different element sets");
        }
    }
    std::vector<std::vector<double>> ranked;
    for (const importance_map & m : maps) {
        const std::vector<double> flat = flatten_scores(m);
        ranked.push_back(rank_normalize(flat));
    }
    const size_t n = maps.size();
    std::vector<std::vector<double>> corr(n, std::vector<double>(n, 1.0));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            const double r = pearson(ranked[i], ranked[j]);
            corr[i][j] = r;
            corr[j][i] = r;
        }
    }
    return corr;
}

std::vector<double> layer_avg_importance(const importance_map & map,
                                         const param_registry & registry) {
    if (map.registry_fingerprint != registry_fingerprint(registry)) {
        throw integrity_error("layer_avg_importance: map fingerprint mismatch");
    }
    std::vector<double> sum(size_t(registry.config.num_layers), 0.0);
    std::vector<int64_t> count(size_t(registry.config.num_layers), 0);
    const std::vector<size_t> prunable = registry.prunable_entry_indices();
    for (size_t t = 0; t < prunable.size(); ++t) {
        const int64_t layer = registry.entries[prunable[t]].layer_index;
        if (layer < 0) {
            continue;
        }
        for (double v : map.scores[t].values) {
            sum[size_t(layer)] += v;
        }
        count[size_t(layer)] += map.scores[t].numel();
    }
    std::vector<double> out(sum.size(), 0.0);
    for (size_t l = 0; l < sum.size(); ++l) {
        out[l] = count[l] > 0 ? sum[l] / double(count[l]) : 0.0;
    }
    return out;
}

} // namespace gaprune
