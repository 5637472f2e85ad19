#include "gaprune/objective.hpp"

#include "gaprune/checkpoint.hpp"
#include "gaprune/errors.hpp"
#include "gaprune/io.hpp"
#include "gaprune/rng.hpp"

#include <cmath>
#include <cstdio>

namespace gaprune {

void infonce_config::validate() const {
    if (temperature <= 0.0) {
        throw config_error("infonce temperature must be positive");
    }
}

void train_config::validate() const {
    if (steps < 1 || batch_size < 1) {
        throw config_error("train steps and batch_size must be >= 1");
    }
    if (learning_rate <= 0.0) {
        throw config_error("learning_rate must be positive");
    }
    if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 || adam_beta2 >= 1.0) {
        throw config_error("adam betas must lie in (0, 1)");
    }
}

tape::var infonce_loss(tape & t, tape::var q, tape::var p, std::span<const tape::var> negs,
                       const infonce_config & config) {
    config.validate();
    if (negs.empty()) {
        throw argument_error("infonce_loss: need at least one negative");
    }
    std::vector<tape::var> sims;
    sims.reserve(negs.size() + 1);
    sims.push_back(t.dot(q, p));
    for (tape::var n : negs) {
        sims.push_back(t.dot(q, n));
    }
    return t.infonce_head(t.pack(sims), config.temperature);
}

double infonce_loss_value(const tensor & q, const tensor & p, std::span<const tensor> negs,
                          const infonce_config & config) {
    tape t;
    const tape::var qv = t.leaf(q);
    const tape::var pv = t.leaf(p);
    std::vector<tape::var> nv;
    for (const tensor & n : negs) {
        nv.push_back(t.leaf(n));
    }
    return t.value(infonce_loss(t, qv, pv, nv, config)).values[0];
}

namespace {

// Forward + backward for a batch on one tape; mean loss over examples. With
// in-batch negatives, example i also contrasts against the other positives.
grad_map batch_gradient_impl(const param_registry & registry,
                             std::span<const triplet_record> batch,
                             const infonce_config & config) {
    if (batch.empty()) {
        throw argument_error("batch_gradient: empty batch");
    }
    encoder_session s(registry);
    tape & t = s.t();

    std::vector<tape::var> q_vars, p_vars, n_vars;
    q_vars.reserve(batch.size());
    for (const triplet_record & rec : batch) {
        q_vars.push_back(s.embed_text(rec.query));
        p_vars.push_back(s.embed_text(rec.positive));
        n_vars.push_back(s.embed_text(rec.negative));
    }

    tape::var total = -1;
    for (size_t i = 0; i < batch.size(); ++i) {
        std::vector<tape::var> negs;
        negs.push_back(n_vars[i]);
        if (config.in_batch_negatives) {
            for (size_t j = 0; j < batch.size(); ++j) {
                if (j != i) {
                    negs.push_back(p_vars[j]);
                }
            }
        }
        const tape::var loss = infonce_loss(t, q_vars[i], p_vars[i], negs, config);
        total = (total < 0) ? loss : t.add(total, loss);
    }
    const tape::var mean = t.scale(total, 1.0 / double(batch.size()));
    t.backward(mean);

    grad_map out;
    out.loss = t.value(mean).values[0];
    out.grads.reserve(registry.entries.size());
    for (size_t e = 0; e < registry.entries.size(); ++e) {
        out.grads.push_back(t.grad(s.param_var(e)));
    }
    return out;
}

} // namespace

grad_map triplet_gradient(const param_registry & registry, const triplet_record & rec,
                          const infonce_config & config) {
    return batch_gradient_impl(registry, {&rec, 1}, config);
}

grad_map batch_gradient(const param_registry & registry, std::span<const triplet_record> batch,
                        const infonce_config & config) {
    return batch_gradient_impl(registry, batch, config);
}

grad_map avg_batch_gradients(const param_registry & registry,
                             std::span<const std::vector<triplet_record>> batches,
                             const infonce_config & config) {
    if (batches.empty()) {
        throw argument_error("avg_batch_gradients: empty batch list");
    }
    grad_map acc;
    for (size_t e = 0; e < registry.entries.size(); ++e) {
        acc.grads.push_back(tensor::zeros(registry.entries[e].weights.shape));
    }
    for (const auto & batch : batches) {
        const grad_map g = batch_gradient_impl(registry, batch, config);
        for (size_t e = 0; e < acc.grads.size(); ++e) {
            for (size_t i = 0; i < acc.grads[e].values.size(); ++i) {
                acc.grads[e].values[i] += g.grads[e].values[i];
            }
        }
        acc.loss += g.loss;
    }
    const double inv = 1.0 / double(batches.size());
    for (auto & g : acc.grads) {
        for (double & v : g.values) {
            v *= inv;
        }
    }
    acc.loss *= inv;
    return acc;
}

void save_loss_trace_csv(const std::filesystem::path & path, const loss_trace & trace) {
    std::string out = "step,loss\n";
    char buf[64];
    for (size_t i = 0; i < trace.losses.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, trace.losses[i]);
        out += buf;
    }
    write_file(path, out);
}

namespace {

struct adam_state {
    std::vector<tensor> m;
    std::vector<tensor> v;

    explicit adam_state(const param_registry & reg) {
        for (const auto & e : reg.entries) {
            m.push_back(tensor::zeros(e.weights.shape));
            v.push_back(tensor::zeros(e.weights.shape));
        }
    }
};

loss_trace train_loop(param_registry & registry, const prune_mask * mask,
                      std::span<const triplet_record> corpus, const train_config & tc,
                      const infonce_config & nc, const step_observer & on_step) {
    tc.validate();
    nc.validate();
    if (corpus.empty()) {
        throw argument_error("training corpus is empty");
    }

    // masked positions per entry index, empty when training dense
    std::vector<const std::vector<uint8_t> *> keep_of(registry.entries.size(), nullptr);
    if (mask) {
        const uint64_t fp = registry_fingerprint(registry);
        if (mask->registry_fingerprint != fp) {
            throw integrity_error("retrain_masked: mask fingerprint does not match registry");
        }
        const std::vector<size_t> prunable = registry.prunable_entry_indices();
        if (prunable.size() != mask->keep.size()) {
            throw integrity_error("retrain_masked: mask tensor count mismatch");
        }
        for (size_t t = 0; t < prunable.size(); ++t) {
            keep_of[prunable[t]] = &mask->keep[t];
            const auto & keep = mask->keep[t];
            const auto & w = registry.entries[prunable[t]].weights;
            for (size_t i = 0; i < keep.size(); ++i) {
                if (!keep[i] && w.values[i] != 0.0) {
                    throw argument_error("retrain_masked: mask not applied to registry (entry '" +
                                         registry.entries[prunable[t]].name + "')");
                }
            }
        }
    }

    adam_state st(registry);
    rng r(tc.seed);
    loss_trace trace;
    trace.losses.reserve(size_t(tc.steps));

    for (int64_t step = 1; step <= tc.steps; ++step) {
        std::vector<triplet_record> batch;
        batch.reserve(size_t(tc.batch_size));
        for (int64_t b = 0; b < tc.batch_size; ++b) {
            batch.push_back(corpus[size_t(r.below(corpus.size()))]);
        }
        grad_map g = batch_gradient_impl(registry, batch, nc);
        if (!std::isfinite(g.loss)) {
            throw training_error("non-finite loss at step " + std::to_string(step));
        }
        trace.losses.push_back(g.loss);

        const double bc1 = 1.0 - std::pow(tc.adam_beta1, double(step));
        const double bc2 = 1.0 - std::pow(tc.adam_beta2, double(step));
        for (size_t e = 0; e < registry.entries.size(); ++e) {
            tensor & w = registry.entries[e].weights;
            const std::vector<uint8_t> * keep = keep_of[e];
            for (size_t i = 0; i < w.values.size(); ++i) {
                if (keep && !(*keep)[i]) {
                    // pruned position: no grad, no moment, stays exactly zero
                    st.m[e].values[i] = 0.0;
                    st.v[e].values[i] = 0.0;
                    continue;
                }
                const double gv = g.grads[e].values[i];
                double & m = st.m[e].values[i];
                double & v = st.v[e].values[i];
                m = tc.adam_beta1 * m + (1.0 - tc.adam_beta1) * gv;
                v = tc.adam_beta2 * v + (1.0 - tc.adam_beta2) * gv * gv;
                const double mh = m / bc1;
                const double vh = v / bc2;
                w.values[i] -= tc.learning_rate * mh / (std::sqrt(vh) + tc.adam_eps);
            }
        }
        if (on_step) {
            on_step(step, registry);
        }
    }
    return trace;
}

} // namespace

loss_trace train_dense(param_registry & registry, std::span<const triplet_record> corpus,
                       const train_config & tc, const infonce_config & nc,
                       const step_observer & on_step) {
    return train_loop(registry, nullptr, corpus, tc, nc, on_step);
}

loss_trace retrain_masked(param_registry & registry, const prune_mask & mask,
                          std::span<const triplet_record> corpus, const train_config & tc,
                          const infonce_config & nc, const step_observer & on_step) {
    return train_loop(registry, &mask, corpus, tc, nc, on_step);
}

} // namespace gaprune
