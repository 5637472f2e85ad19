#include "gaprune/encoder.hpp"

#include "gaprune/checkpoint.hpp"
#include "gaprune/errors.hpp"
#include "gaprune/fnv.hpp"
#include "gaprune/rng.hpp"

#include <cmath>

namespace gaprune {

namespace {

constexpr double kEmbedNormEps = 1e-12;

} // namespace

void encoder_config::validate() const {
    if (vocab_size < 2 || embed_dim < 1 || hidden_dim < 1 || max_tokens < 1) {
        throw config_error("encoder dimensions must be positive (vocab_size >= 2)");
    }
    if (hidden_dim < embed_dim) {
        throw config_error("hidden_dim (" + std::to_string(hidden_dim) +
                           ") must be >= embed_dim (" + std::to_string(embed_dim) + ")");
    }
    if (num_layers < 2) {
        throw config_error("num_layers must be >= 2 for layer-probe analysis, got " +
                           std::to_string(num_layers));
    }
}

const char * role_name(param_role r) {
    switch (r) {
        case param_role::embedding: return "embedding";
        case param_role::mlp_in:    return "mlp_in";
        case param_role::mlp_out:   return "mlp_out";
        case param_role::norm:      return "norm";
    }
    return "?";
}

param_role role_from_name(std::string_view s) {
    if (s == "embedding") return param_role::embedding;
    if (s == "mlp_in")    return param_role::mlp_in;
    if (s == "mlp_out")   return param_role::mlp_out;
    if (s == "norm")      return param_role::norm;
    throw parse_error("unknown parameter role '" + std::string(s) + "'");
}

const param_entry & param_registry::find(std::string_view name) const {
    for (const auto & e : entries) {
        if (e.name == name) {
            return e;
        }
    }
    throw argument_error("no parameter named '" + std::string(name) + "'");
}

param_entry & param_registry::find(std::string_view name) {
    for (auto & e : entries) {
        if (e.name == name) {
            return e;
        }
    }
    throw argument_error("no parameter named '" + std::string(name) + "'");
}

std::vector<size_t> param_registry::prunable_entry_indices() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].prunable) {
            out.push_back(i);
        }
    }
    return out;
}

int64_t param_registry::prunable_elem_count() const {
    int64_t n = 0;
    for (const auto & e : entries) {
        if (e.prunable) {
            n += e.weights.numel();
        }
    }
    return n;
}

param_registry init_encoder(const encoder_config & config) {
    config.validate();
    param_registry reg;
    reg.config = config;

    rng r(config.seed);
    auto normal_tensor = [&](std::vector<int64_t> shape, double stddev) {
        tensor t = tensor::zeros(std::move(shape));
        for (double & v : t.values) {
            v = r.normal(0.0, stddev);
        }
        return t;
    };

    const double embed_std = 1.0 / std::sqrt(double(config.embed_dim));
    const double in_std    = 1.0 / std::sqrt(double(config.embed_dim));
    const double out_std   = 1.0 / std::sqrt(double(config.hidden_dim));

    reg.entries.push_back({"embed.weight", -1, param_role::embedding, false,
                           normal_tensor({config.vocab_size, config.embed_dim}, embed_std)});
    for (int64_t l = 0; l < config.num_layers; ++l) {
        const std::string prefix = "layers." + std::to_string(l) + ".";
        reg.entries.push_back({prefix + "gain", l, param_role::norm, false,
                               tensor::full({config.embed_dim}, 1.0)});
        reg.entries.push_back({prefix + "mlp_in.weight", l, param_role::mlp_in, true,
                               normal_tensor({config.hidden_dim, config.embed_dim}, in_std)});
        reg.entries.push_back({prefix + "mlp_in.bias", l, param_role::norm, false,
                               tensor::zeros({config.hidden_dim})});
        reg.entries.push_back({prefix + "mlp_out.weight", l, param_role::mlp_out, true,
                               normal_tensor({config.embed_dim, config.hidden_dim}, out_std)});
        reg.entries.push_back({prefix + "mlp_out.bias", l, param_role::norm, false,
                               tensor::zeros({config.embed_dim})});
    }
    return reg;
}

std::vector<int64_t> tokenize(std::string_view text, const encoder_config & config) {
    std::vector<int64_t> ids;
    size_t i = 0;
    while (i < text.size() && int64_t(ids.size()) < config.max_tokens) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        const size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        if (i > start) {
            const uint64_t h = fnv1a64(text.substr(start, i - start));
            ids.push_back(int64_t(h % uint64_t(config.vocab_size)));
        }
    }
    return ids;
}

encoder_session::encoder_session(const param_registry & registry) : registry_(&registry) {
    param_vars_.reserve(registry.entries.size());
    for (const auto & e : registry.entries) {
        param_vars_.push_back(tape_.leaf(e.weights));
    }
}

tape::var encoder_session::param_var(size_t entry_index) const {
    if (entry_index >= param_vars_.size()) {
        throw argument_error("param entry index out of range");
    }
    return param_vars_[entry_index];
}

tape::var encoder_session::embed_tokens(std::span<const int64_t> tokens,
                                        std::vector<tape::var> * per_layer,
                                        tape::var * final_tokens) {
    const encoder_config & cfg = registry_->config;
    if (tokens.empty() || int64_t(tokens.size()) > cfg.max_tokens) {
        throw argument_error("token count " + std::to_string(tokens.size()) +
                             " outside [1, " + std::to_string(cfg.max_tokens) + "]");
    }
    for (int64_t id : tokens) {
        if (id < 0 || id >= cfg.vocab_size) {
            throw input_error("token id " + std::to_string(id) + " outside vocab of size " +
                              std::to_string(cfg.vocab_size));
        }
    }

    // entry layout per layer: gain, mlp_in.weight, mlp_in.bias, mlp_out.weight, mlp_out.bias
    tape::var x = tape_.gather_rows(param_vars_[0],
                                    std::vector<int64_t>(tokens.begin(), tokens.end()));
    const int64_t valid = int64_t(tokens.size());
    for (int64_t l = 0; l < cfg.num_layers; ++l) {
        const size_t base = 1 + size_t(l) * 5;
        tape::var g = tape_.row_scale(x, param_vars_[base + 0]);
        tape::var h = tape_.row_add(tape_.matmul_nt(g, param_vars_[base + 1]),
                                    param_vars_[base + 2]);
        tape::var a = tape_.gelu(h);
        tape::var y = tape_.row_add(tape_.matmul_nt(a, param_vars_[base + 3]),
                                    param_vars_[base + 4]);
        x = tape_.add(x, y);
        if (per_layer) {
            per_layer->push_back(
                tape_.l2_normalize(tape_.mean_pool(x, valid), kEmbedNormEps));
        }
    }
    if (final_tokens) {
        *final_tokens = x;
    }
    if (per_layer) {
        return per_layer->back(); // last block's pooled state is the embedding
    }
    return tape_.l2_normalize(tape_.mean_pool(x, valid), kEmbedNormEps);
}

tape::var encoder_session::embed_text(std::string_view text,
                                      std::vector<tape::var> * per_layer) {
    const std::vector<int64_t> ids = tokenize(text, registry_->config);
    if (ids.empty()) {
        throw input_error("text produced no tokens: '" + std::string(text) + "'");
    }
    return embed_tokens(ids, per_layer);
}

encoder_output encode(const param_registry & registry, std::span<const int64_t> tokens,
                      bool capture) {
    encoder_session s(registry);
    std::vector<tape::var> layer_vars;
    tape::var final_tokens = -1;
    tape::var emb = s.embed_tokens(tokens, capture ? &layer_vars : nullptr,
                                   capture ? &final_tokens : nullptr);
    encoder_output out;
    out.embedding = s.t().value(emb);
    if (capture) {
        for (tape::var v : layer_vars) {
            out.per_layer.push_back(s.t().value(v));
        }
        out.final_tokens = s.t().value(final_tokens);
    }
    return out;
}

encoder_output encode_text(const param_registry & registry, std::string_view text,
                           bool capture) {
    const std::vector<int64_t> ids = tokenize(text, registry.config);
    if (ids.empty()) {
        throw input_error("text produced no tokens: '" + std::string(text) + "'");
    }
    return encode(registry, ids, capture);
}

tensor encode_at_layer(const param_registry & registry, std::span<const int64_t> tokens,
                       int64_t layer) {
    if (layer < 0 || layer >= registry.config.num_layers) {
        throw argument_error("layer " + std::to_string(layer) + " outside [0, " +
                             std::to_string(registry.config.num_layers) + ")");
    }
    encoder_session s(registry);
    std::vector<tape::var> layer_vars;
    s.embed_tokens(tokens, &layer_vars);
    return s.t().value(layer_vars[size_t(layer)]);
}

void apply_mask(param_registry & registry, const prune_mask & mask) {
    const uint64_t fp = registry_fingerprint(registry);
    if (mask.registry_fingerprint != fp) {
        throw integrity_error("mask fingerprint does not match registry");
    }
    const std::vector<size_t> prunable = registry.prunable_entry_indices();
    if (prunable.size() != mask.keep.size()) {
        throw integrity_error("mask tensor count does not match registry");
    }
    for (size_t t = 0; t < prunable.size(); ++t) {
        param_entry & e = registry.entries[prunable[t]];
        const auto & keep = mask.keep[t];
        if (keep.size() != size_t(e.weights.numel())) {
            throw integrity_error("mask size mismatch on '" + e.name + "'");
        }
        for (size_t i = 0; i < keep.size(); ++i) {
            if (!keep[i]) {
                e.weights.values[i] = 0.0;
            }
        }
    }
}

double measure_sparsity(const param_registry & registry) {
    int64_t zeros = 0;
    int64_t total = 0;
    for (const auto & e : registry.entries) {
        if (!e.prunable) {
            continue;
        }
        total += e.weights.numel();
        for (double v : e.weights.values) {
            if (v == 0.0) {
                ++zeros;
            }
        }
    }
    if (total == 0) {
        return 0.0;
    }
    return double(zeros) / double(total);
}

} // namespace gaprune
