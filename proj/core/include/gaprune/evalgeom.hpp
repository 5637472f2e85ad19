#pragma once

#include "gaprune/analysis.hpp"
#include "gaprune/data.hpp"
#include "gaprune/encoder.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gaprune {

// binary-relevance DCG@10 / ideal DCG@10; `ranked` must be deduplicated
double ndcg_at_10(std::span<const int64_t> ranked, std::span<const int64_t> relevant);

// embed queries and docs, rank by cosine (ties toward the lower doc index),
// average nDCG@10 with the query's gold doc as the single relevant item
double eval_retrieval(const param_registry & registry, const retrieval_fixture & fx);

// eval_retrieval against encode_at_layer(l) embeddings, one score per layer
std::vector<double> layer_probe_eval(const param_registry & registry,
                                     const retrieval_fixture & fx);

// k-NN vote under cosine distance; vote ties resolve to the nearest neighbor
// among the tied classes, then to the lowest class id
double eval_classification(const param_registry & registry, const classification_fixture & fx,
                           double train_fraction, int64_t k, uint64_t seed);

// Pearson correlation of average-ranked values (ties averaged)
double spearman(std::span<const double> pred, std::span<const double> gold);

double eval_sts(const param_registry & registry, const sts_fixture & fx);

// log E_{i != j} exp(-t |z_i - z_j|^2); all ordered pairs when n <= 1024,
// otherwise a seeded subsample of 1024^2 pairs
double uniformity_loss(std::span<const tensor> embeddings, double t = 2.0, uint64_t seed = 0);

// E_i |q_i - p_i|^power
double alignment_loss(std::span<const tensor> q, std::span<const tensor> p, double power = 2.0);

// mean over dimensions of |pearson(q_col, p_col)|; zero-variance dimensions
// are skipped and counted in *skipped when provided
double cross_dim_corr(std::span<const tensor> q, std::span<const tensor> p,
                      int64_t * skipped = nullptr);

// smallest k whose top-k per-dimension variance share reaches `threshold`
int64_t effective_dim(std::span<const tensor> embeddings, double threshold = 0.95);

double cosine_to_dense(std::span<const tensor> pruned, std::span<const tensor> dense);

struct geometry_report {
    double uniformity = 0.0;
    double alignment = 0.0;
    double cross_dim = 0.0;
    int64_t cross_dim_skipped = 0;
    double cosine_to_dense = 0.0;
    int64_t effective_dim = 0;
    int64_t sample_size = 0;
};

// query/positive embeddings of `sample` under the pruned model, compared to
// dense-model embeddings of the same texts
geometry_report compute_geometry(const param_registry & pruned, const param_registry & dense,
                                 std::span<const triplet_record> sample, double t_param,
                                 double power_param, uint64_t pair_seed);

// ascending ranks with ties averaged, scaled to [0, 1]
std::vector<double> rank_normalize(std::span<const double> scores);
std::vector<double> flatten_scores(const importance_map & map);

// pairwise Pearson over rank-normalized scores; diagonal == 1
std::vector<std::vector<double>> method_correlation(std::span<const importance_map> maps);

// mean score over prunable elements grouped by the owning entry's layer index
std::vector<double> layer_avg_importance(const importance_map & map,
                                         const param_registry & registry);

} // namespace gaprune
