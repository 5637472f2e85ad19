#include "gaprune/analysis.hpp"

#include "gaprune/checkpoint.hpp"
#include "gaprune/errors.hpp"
#include "gaprune/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace gaprune {

using nlohmann::json;

fisher_accum::fisher_accum(std::span<const std::vector<int64_t>> shapes) {
    for (const auto & s : shapes) {
        sq_sum.push_back(tensor::zeros(s));
        grad_sum.push_back(tensor::zeros(s));
    }
}

void fisher_accum::add_sample(std::span<const tensor> grads) {
    if (grads.size() != sq_sum.size()) {
        throw argument_error("fisher_accum: tensor count mismatch");
    }
    for (size_t t = 0; t < grads.size(); ++t) {
        if (!grads[t].same_shape(sq_sum[t])) {
            throw shape_error("fisher_accum: shape mismatch on tensor " + std::to_string(t));
        }
        for (size_t i = 0; i < grads[t].values.size(); ++i) {
            const double g = grads[t].values[i];
            sq_sum[t].values[i] += g * g;
            grad_sum[t].values[i] += g;
        }
    }
    ++count;
}

void fisher_accum::finalize(side_stats & out) const {
    if (count == 0) {
        throw state_error("fisher_accum: no samples accumulated");
    }
    out.fisher.clear();
    out.mean_grad.clear();
    const double inv = 1.0 / double(count);
    for (size_t t = 0; t < sq_sum.size(); ++t) {
        tensor f = sq_sum[t];
        tensor m = grad_sum[t];
        for (double & v : f.values) {
            v *= inv;
        }
        for (double & v : m.values) {
            v *= inv;
        }
        out.fisher.push_back(std::move(f));
        out.mean_grad.push_back(std::move(m));
    }
    out.sample_count = count;
}

namespace {

void init_stats_header(const param_registry & registry, grad_stats & stats) {
    const uint64_t fp = registry_fingerprint(registry);
    if (stats.names.empty()) {
        for (size_t idx : registry.prunable_entry_indices()) {
            stats.names.push_back(registry.entries[idx].name);
            stats.shapes.push_back(registry.entries[idx].weights.shape);
        }
        stats.registry_fingerprint = fp;
    } else if (stats.registry_fingerprint != fp) {
        throw integrity_error("grad_stats fingerprint does not match registry");
    }
}

} // namespace

void estimate_fisher(const param_registry & registry, std::span<const triplet_record> triplets,
                     stat_side side, const infonce_config & nce, grad_stats & stats) {
    if (triplets.empty()) {
        throw argument_error("estimate_fisher: empty triplet set");
    }
    init_stats_header(registry, stats);

    const std::vector<size_t> prunable = registry.prunable_entry_indices();
    fisher_accum acc(stats.shapes);
    std::vector<tensor> sample(prunable.size());
    for (const triplet_record & rec : triplets) {
        grad_map g = triplet_gradient(registry, rec, nce);
        for (size_t t = 0; t < prunable.size(); ++t) {
            sample[t] = std::move(g.grads[prunable[t]]);
        }
        acc.add_sample(sample);
    }
    acc.finalize(stats.side(side));
}

grad_stats merge_stat_shards(std::span<const grad_stats> shards) {
    if (shards.empty()) {
        throw argument_error("merge_stat_shards: no shards");
    }
    grad_stats out;
    out.names = shards[0].names;
    out.shapes = shards[0].shapes;
    out.registry_fingerprint = shards[0].registry_fingerprint;

    for (stat_side s : {stat_side::general, stat_side::domain}) {
        int64_t total = 0;
        std::vector<tensor> fisher, mean_grad;
        for (const grad_stats & shard : shards) {
            if (shard.names != out.names || shard.registry_fingerprint != out.registry_fingerprint) {
                throw integrity_error("merge_stat_shards: shard layout mismatch");
            }
            const side_stats & ss = shard.side(s);
            if (!ss.populated()) {
                continue;
            }
            if (fisher.empty()) {
                for (const auto & shape : out.shapes) {
                    fisher.push_back(tensor::zeros(shape));
                    mean_grad.push_back(tensor::zeros(shape));
                }
            }
            const double w = double(ss.sample_count);
            for (size_t t = 0; t < fisher.size(); ++t) {
                for (size_t i = 0; i < fisher[t].values.size(); ++i) {
                    fisher[t].values[i] += w * ss.fisher[t].values[i];
                    mean_grad[t].values[i] += w * ss.mean_grad[t].values[i];
                }
            }
            total += ss.sample_count;
        }
        if (total == 0) {
            continue;
        }
        const double inv = 1.0 / double(total);
        for (size_t t = 0; t < fisher.size(); ++t) {
            for (double & v : fisher[t].values) {
                v *= inv;
            }
            for (double & v : mean_grad[t].values) {
                v *= inv;
            }
        }
        side_stats & os = out.side(s);
        os.fisher = std::move(fisher);
        os.mean_grad = std::move(mean_grad);
        os.sample_count = total;
    }
    return out;
}

const char * granularity_name(align_granularity g) {
    switch (g) {
        case align_granularity::element: return "element";
        case align_granularity::row:     return "row";
        case align_granularity::tensor:  return "tensor";
    }
    return "?";
}

align_granularity granularity_from_name(std::string_view s) {
    if (s == "element") return align_granularity::element;
    if (s == "row")     return align_granularity::row;
    if (s == "tensor")  return align_granularity::tensor;
    throw parse_error("unknown alignment granularity '" + std::string(s) + "'");
}

void dai_config::validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) {
        throw config_error("dai alpha/beta/gamma must be >= 0");
    }
    if (epsilon <= 0.0) {
        throw config_error("dai epsilon must be positive");
    }
}

namespace {

double group_cosine(const double * a, const double * b, int64_t n, double eps) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double s = dot / (std::sqrt(na) * std::sqrt(nb) + eps);
    return std::clamp(s, -1.0, 1.0);
}

} // namespace

std::vector<tensor> alignment_scores(const grad_stats & stats, const dai_config & config) {
    config.validate();
    if (!stats.general.populated() || !stats.domain.populated()) {
        throw state_error("alignment_scores: mean gradients missing on one side");
    }
    std::vector<tensor> out;
    out.reserve(stats.shapes.size());
    for (size_t t = 0; t < stats.shapes.size(); ++t) {
        const tensor & g = stats.general.mean_grad[t];
        const tensor & d = stats.domain.mean_grad[t];
        tensor s = tensor::zeros(g.shape);
        switch (config.granularity) {
            case align_granularity::element: {
                for (size_t i = 0; i < g.values.size(); ++i) {
                    s.values[i] = group_cosine(&g.values[i], &d.values[i], 1, config.epsilon);
                }
                break;
            }
            case align_granularity::row: {
                if (g.rank() != 2) {
                    throw internal_error("row granularity on tensor '" + stats.names[t] +
                                         "' of shape " + g.shape_str());
                }
                const int64_t rows = g.rows(), cols = g.cols();
                for (int64_t r = 0; r < rows; ++r) {
                    const double sc = group_cosine(g.values.data() + r * cols,
                                                   d.values.data() + r * cols, cols,
                                                   config.epsilon);
                    for (int64_t c = 0; c < cols; ++c) {
                        s.at(r, c) = sc;
                    }
                }
                break;
            }
            case align_granularity::tensor: {
                const double sc = group_cosine(g.values.data(), d.values.data(), g.numel(),
                                               config.epsilon);
                for (double & v : s.values) {
                    v = sc;
                }
                break;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

const char * method_name(score_method m) {
    switch (m) {
        case score_method::dai:        return "dai";
        case score_method::random:     return "random";
        case score_method::magnitude:  return "magnitude";
        case score_method::fisher_gen: return "fisher_gen";
        case score_method::fisher_dom: return "fisher_dom";
    }
    return "?";
}

score_method method_from_name(std::string_view s) {
    if (s == "dai")        return score_method::dai;
    if (s == "random")     return score_method::random;
    if (s == "magnitude")  return score_method::magnitude;
    if (s == "fisher_gen") return score_method::fisher_gen;
    if (s == "fisher_dom") return score_method::fisher_dom;
    throw parse_error("unknown scoring method '" + std::string(s) + "'");
}

namespace {

importance_map make_map(const param_registry & registry, score_method method,
                        std::string config_json) {
    importance_map map;
    map.method = method;
    map.registry_fingerprint = registry_fingerprint(registry);
    for (size_t idx : registry.prunable_entry_indices()) {
        map.names.push_back(registry.entries[idx].name);
        map.shapes.push_back(registry.entries[idx].weights.shape);
    }
    map.config_json = std::move(config_json);
    return map;
}

} // namespace

importance_map dai_scores(const param_registry & registry, const grad_stats & stats,
                          std::span<const tensor> alignment, const dai_config & config) {
    config.validate();
    if (!stats.general.populated() || !stats.domain.populated()) {
        throw state_error("dai_scores: fisher statistics missing on one side");
    }
    if (stats.registry_fingerprint != registry_fingerprint(registry)) {
        throw integrity_error("dai_scores: stats fingerprint does not match registry");
    }
    if (alignment.size() != stats.shapes.size()) {
        throw argument_error("dai_scores: alignment tensor count mismatch");
    }

    json cfg = {{"alpha", config.alpha},
                {"beta", config.beta},
                {"gamma", config.gamma},
                {"epsilon", config.epsilon},
                {"granularity", granularity_name(config.granularity)}};
    importance_map map = make_map(registry, score_method::dai, cfg.dump());

    const std::vector<size_t> prunable = registry.prunable_entry_indices();
    for (size_t t = 0; t < prunable.size(); ++t) {
        const tensor & w = registry.entries[prunable[t]].weights;
        const tensor & f_dom = stats.domain.fisher[t];
        const tensor & f_gen = stats.general.fisher[t];
        const tensor & align = alignment[t];
        if (!w.same_shape(f_dom) || !w.same_shape(align)) {
            throw shape_error("dai_scores: shape mismatch on '" + map.names[t] + "'");
        }
        tensor s = tensor::zeros(w.shape);
        for (size_t i = 0; i < w.values.size(); ++i) {
            const double mag = std::fabs(w.values[i]);
            s.values[i] = ((f_dom.values[i] - config.beta * f_gen.values[i]) * mag +
                           config.gamma * std::sqrt(mag)) *
                          (1.0 + config.alpha * align.values[i]);
        }
        map.scores.push_back(std::move(s));
    }
    return map;
}

importance_map baseline_scores(const param_registry & registry, const grad_stats * stats,
                               score_method method, uint64_t seed) {
    if (method == score_method::dai) {
        throw argument_error("baseline_scores: use dai_scores for the dai method");
    }
    const bool needs_stats = method == score_method::fisher_gen ||
                             method == score_method::fisher_dom;
    if (needs_stats) {
        if (stats == nullptr) {
            throw state_error("baseline_scores: fisher method requires gradient statistics");
        }
        const side_stats & s = method == score_method::fisher_gen ? stats->general
                                                                  : stats->domain;
        if (!s.populated()) {
            throw state_error(std::string("baseline_scores: ") + method_name(method) +
                              " side not populated");
        }
        if (stats->registry_fingerprint != registry_fingerprint(registry)) {
            throw integrity_error("baseline_scores: stats fingerprint mismatch");
        }
    }

    json cfg = json::object();
    if (method == score_method::random) {
        cfg["seed"] = seed;
    }
    importance_map map = make_map(registry, method, cfg.dump());

    rng r(seed);
    const std::vector<size_t> prunable = registry.prunable_entry_indices();
    for (size_t t = 0; t < prunable.size(); ++t) {
        const tensor & w = registry.entries[prunable[t]].weights;
        tensor s = tensor::zeros(w.shape);
        switch (method) {
            case score_method::random:
                for (double & v : s.values) {
                    v = r.uniform();
                }
                break;
            case score_method::magnitude:
                for (size_t i = 0; i < w.values.size(); ++i) {
                    s.values[i] = std::fabs(w.values[i]);
                }
                break;
            case score_method::fisher_gen:
            case score_method::fisher_dom: {
                const side_stats & ss = method == score_method::fisher_gen ? stats->general
                                                                           : stats->domain;
                for (size_t i = 0; i < w.values.size(); ++i) {
                    s.values[i] = ss.fisher[t].values[i] * std::fabs(w.values[i]);
                }
                break;
            }
            case score_method::dai:
                break; // unreachable
        }
        map.scores.push_back(std::move(s));
    }
    return map;
}

prune_mask build_mask(const importance_map & scores, double sparsity) {
    if (sparsity < 0.0 || sparsity >= 1.0) {
        throw argument_error("build_mask: sparsity " + std::to_string(sparsity) +
                             " outside [0, 1)");
    }
    int64_t total = 0;
    for (const tensor & t : scores.scores) {
        total += t.numel();
    }
    if (total == 0) {
        throw argument_error("build_mask: importance map is empty");
    }
    const int64_t k = int64_t(std::floor((1.0 - sparsity) * double(total)));

    // global order: score desc, then (tensor, element) asc for ties
    std::vector<std::pair<double, int64_t>> order;
    order.reserve(size_t(total));
    int64_t global = 0;
    for (const tensor & t : scores.scores) {
        for (double v : t.values) {
            if (!std::isfinite(v)) {
                throw argument_error("build_mask: non-finite importance score");
            }
            order.emplace_back(v, global++);
        }
    }
    std::sort(order.begin(), order.end(), [](const auto & a, const auto & b) {
        if (a.first != b.first) {
            return a.first > b.first;
        }
        return a.second < b.second;
    });

    std::vector<uint8_t> keep_flat(size_t(total), 0);
    for (int64_t i = 0; i < k; ++i) {
        keep_flat[size_t(order[size_t(i)].second)] = 1;
    }

    prune_mask mask;
    mask.target_sparsity = sparsity;
    mask.retained = k;
    mask.registry_fingerprint = scores.registry_fingerprint;
    mask.method = method_name(scores.method);
    mask.names = scores.names;
    mask.shapes = scores.shapes;
    size_t cursor = 0;
    for (const tensor & t : scores.scores) {
        mask.keep.emplace_back(keep_flat.begin() + long(cursor),
                               keep_flat.begin() + long(cursor + size_t(t.numel())));
        cursor += size_t(t.numel());
    }
    return mask;
}

gaprune_result run_gaprune(const param_registry & registry,
                           std::span<const triplet_record> general_triplets,
                           std::span<const triplet_record> domain_triplets,
                           const dai_config & dai, double sparsity,
                           const infonce_config & nce, const sampling_config & sampling) {
    if (general_triplets.empty() || domain_triplets.empty()) {
        throw argument_error("run_gaprune: calibration sets must be non-empty");
    }

    // analysis-phase gradients are per-triplet; in-batch negatives stay off
    infonce_config analysis_nce = nce;
    analysis_nce.in_batch_negatives = false;

    gaprune_result res;

    const std::vector<tensor> emb_gen = embed_queries(registry, general_triplets);
    res.selection_general = kmeans_sample(emb_gen, std::min<int64_t>(sampling.k, int64_t(emb_gen.size())),
                                          sampling.iterations, sampling.seed);
    for (int64_t idx : res.selection_general.indices) {
        res.calib_general.push_back(general_triplets[size_t(idx)]);
    }

    const std::vector<tensor> emb_dom = embed_queries(registry, domain_triplets);
    res.selection_domain = kmeans_sample(emb_dom, std::min<int64_t>(sampling.k, int64_t(emb_dom.size())),
                                         sampling.iterations, sampling.seed + 1);
    for (int64_t idx : res.selection_domain.indices) {
        res.calib_domain.push_back(domain_triplets[size_t(idx)]);
    }

    estimate_fisher(registry, res.calib_general, stat_side::general, analysis_nce, res.stats);
    estimate_fisher(registry, res.calib_domain, stat_side::domain, analysis_nce, res.stats);

    res.alignment = alignment_scores(res.stats, dai);
    res.scores = dai_scores(registry, res.stats, res.alignment, dai);
    res.mask = build_mask(res.scores, sparsity);
    return res;
}

} // namespace gaprune
