#pragma once

#include "gaprune/data.hpp"
#include "gaprune/encoder.hpp"
#include "gaprune/kmeans.hpp"
#include "gaprune/mask.hpp"
#include "gaprune/objective.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gaprune {

enum class stat_side { general, domain };

// Per prunable tensor: diagonal Fisher (mean of squared per-triplet loss
// gradients) and mean gradient, for each calibration side.
struct side_stats {
    std::vector<tensor> fisher;
    std::vector<tensor> mean_grad;
    int64_t sample_count = 0;

    bool populated() const { return sample_count > 0 && !fisher.empty(); }
};

struct grad_stats {
    std::vector<std::string> names;              // prunable entry names, registry order
    std::vector<std::vector<int64_t>> shapes;
    uint64_t registry_fingerprint = 0;
    side_stats general;
    side_stats domain;

    side_stats & side(stat_side s) { return s == stat_side::general ? general : domain; }
    const side_stats & side(stat_side s) const {
        return s == stat_side::general ? general : domain;
    }
};

// Incremental square-and-average accumulator; also usable directly with
// injected gradients in tests.
struct fisher_accum {
    std::vector<tensor> sq_sum;
    std::vector<tensor> grad_sum;
    int64_t count = 0;

    explicit fisher_accum(std::span<const std::vector<int64_t>> shapes);
    void add_sample(std::span<const tensor> grads);
    void finalize(side_stats & out) const; // divides both sums by count
};

// Per-triplet (batch size 1) gradient passes of the contrastive loss; fills
// fisher, mean_grad and sample_count for the given side.
void estimate_fisher(const param_registry & registry, std::span<const triplet_record> triplets,
                     stat_side side, const infonce_config & nce, grad_stats & stats);

// N-weighted average of shard statistics, fixed shard order.
grad_stats merge_stat_shards(std::span<const grad_stats> shards);

enum class align_granularity { element, row, tensor };

const char * granularity_name(align_granularity g);
align_granularity granularity_from_name(std::string_view s);

struct dai_config {
    double alpha = 0.2;
    double beta = 1.0;
    double gamma = 0.5;
    double epsilon = 1e-8;
    align_granularity granularity = align_granularity::row;

    void validate() const;
};

// Cosine of general vs. domain mean gradients over each granularity group,
// broadcast to every element of the group. Results lie in [-1, 1].
std::vector<tensor> alignment_scores(const grad_stats & stats, const dai_config & config);

enum class score_method { dai, random, magnitude, fisher_gen, fisher_dom };

const char * method_name(score_method m);
score_method method_from_name(std::string_view s);

struct importance_map {
    score_method method = score_method::magnitude;
    std::vector<std::string> names;
    std::vector<std::vector<int64_t>> shapes;
    std::vector<tensor> scores; // aligned to prunable tensors
    uint64_t registry_fingerprint = 0;
    std::string config_json; // snapshot of whatever produced the scores
};

// score_j = ((F_dom_j - beta * F_gen_j) * |w_j| + gamma * sqrt(|w_j|))
//           * (1 + alpha * alignment_j)
importance_map dai_scores(const param_registry & registry, const grad_stats & stats,
                          std::span<const tensor> alignment, const dai_config & config);

// random -> seeded uniform, magnitude -> |w|, fisher_* -> F * |w|
importance_map baseline_scores(const param_registry & registry, const grad_stats * stats,
                               score_method method, uint64_t seed);

// Global top-k over all prunable elements, k = floor((1-s) * d). Ties break
// by (tensor order, element index) ascending.
prune_mask build_mask(const importance_map & scores, double sparsity);

struct sampling_config {
    int64_t k = 256;
    int64_t iterations = 20;
    uint64_t seed = 11;
};

struct gaprune_result {
    sample_selection selection_general;
    sample_selection selection_domain;
    std::vector<triplet_record> calib_general;
    std::vector<triplet_record> calib_domain;
    grad_stats stats;
    std::vector<tensor> alignment;
    importance_map scores;
    prune_mask mask;
};

// Full scoring pipeline: representative sampling per side, per-side gradient
// statistics, alignment, importance scores, mask.
gaprune_result run_gaprune(const param_registry & registry,
                           std::span<const triplet_record> general_triplets,
                           std::span<const triplet_record> domain_triplets,
                           const dai_config & dai, double sparsity,
                           const infonce_config & nce, const sampling_config & sampling);

} // namespace gaprune
