#pragma once

#include "gaprune/data.hpp"
#include "gaprune/encoder.hpp"
#include "gaprune/mask.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace gaprune {

struct infonce_config {
    // not pinned by the contrastive-loss literature this follows; the chosen
    // default is recorded in every run manifest
    double temperature = 0.05;
    bool in_batch_negatives = false;

    void validate() const;
};

struct train_config {
    int64_t steps = 100;
    int64_t batch_size = 16;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 7;

    void validate() const;
};

// -log( exp(cos(q,p)/tau) / (exp(cos(q,p)/tau) + sum_j exp(cos(q,n_j)/tau)) ),
// recorded on the tape. Embeddings are expected unit-normalized so dot == cos.
tape::var infonce_loss(tape & t, tape::var q, tape::var p, std::span<const tape::var> negs,
                       const infonce_config & config);
double infonce_loss_value(const tensor & q, const tensor & p, std::span<const tensor> negs,
                          const infonce_config & config);

// per-entry gradients aligned to registry.entries
struct grad_map {
    std::vector<tensor> grads;
    double loss = 0.0; // mean loss over the contributing examples
};

grad_map triplet_gradient(const param_registry & registry, const triplet_record & rec,
                          const infonce_config & config);
grad_map batch_gradient(const param_registry & registry, std::span<const triplet_record> batch,
                        const infonce_config & config);

// arithmetic mean over per-batch gradients, fixed left-to-right order
grad_map avg_batch_gradients(const param_registry & registry,
                             std::span<const std::vector<triplet_record>> batches,
                             const infonce_config & config);

struct loss_trace {
    std::vector<double> losses; // one entry per step
};

void save_loss_trace_csv(const std::filesystem::path & path, const loss_trace & trace);

// called after each optimizer step with the step number (1-based)
using step_observer = std::function<void(int64_t, const param_registry &)>;

loss_trace train_dense(param_registry & registry, std::span<const triplet_record> corpus,
                       const train_config & tc, const infonce_config & nc,
                       const step_observer & on_step = {});

// Gradients and optimizer state are zeroed at masked positions before every
// update, so masked elements stay exactly 0.0 at every step.
loss_trace retrain_masked(param_registry & registry, const prune_mask & mask,
                          std::span<const triplet_record> corpus, const train_config & tc,
                          const infonce_config & nc, const step_observer & on_step = {});

} // namespace gaprune
