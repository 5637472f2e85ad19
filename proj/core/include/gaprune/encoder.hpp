#pragma once

#include "gaprune/mask.hpp"
#include "gaprune/tape.hpp"
#include "gaprune/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gaprune {

struct encoder_config {
    int64_t vocab_size = 2048;
    int64_t embed_dim  = 32;
    int64_t num_layers = 3;
    int64_t hidden_dim = 64;
    int64_t max_tokens = 16;
    uint64_t seed      = 1;

    void validate() const;
};

enum class param_role { embedding, mlp_in, mlp_out, norm };

const char * role_name(param_role r);
param_role role_from_name(std::string_view s);

struct param_entry {
    std::string name;
    int64_t layer_index = -1; // -1 for non-layer params
    param_role role = param_role::norm;
    bool prunable = false;
    tensor weights;
};

// Named parameter store for the encoder. Entry order is fixed at init time
// and is the canonical order for masks, score dumps and checkpoints.
struct param_registry {
    encoder_config config;
    std::vector<param_entry> entries;

    const param_entry & find(std::string_view name) const;
    param_entry & find(std::string_view name);
    std::vector<size_t> prunable_entry_indices() const;
    int64_t prunable_elem_count() const;
};

param_registry init_encoder(const encoder_config & config);

// token -> id via 64-bit FNV-1a mod vocab_size; whitespace-separated tokens,
// truncated to max_tokens
std::vector<int64_t> tokenize(std::string_view text, const encoder_config & config);

struct encoder_output {
    tensor embedding;                  // [embed_dim], unit-normalized
    std::vector<tensor> per_layer;     // pooled+normalized hidden per block (when captured)
    std::optional<tensor> final_tokens; // [tokens, embed_dim] before pooling (when captured)
};

// Shared-tape forward state: the registry's tensors are recorded as leaves
// once, then any number of sequences can be embedded against them. Used for
// bulk inference and for building losses with parameter gradients.
class encoder_session {
  public:
    explicit encoder_session(const param_registry & registry);

    tape & t() { return tape_; }
    tape::var param_var(size_t entry_index) const;
    const param_registry & registry() const { return *registry_; }

    tape::var embed_tokens(std::span<const int64_t> tokens,
                           std::vector<tape::var> * per_layer = nullptr,
                           tape::var * final_tokens = nullptr);
    tape::var embed_text(std::string_view text,
                         std::vector<tape::var> * per_layer = nullptr);

  private:
    const param_registry * registry_;
    tape tape_;
    std::vector<tape::var> param_vars_;
};

encoder_output encode(const param_registry & registry, std::span<const int64_t> tokens,
                      bool capture = false);
encoder_output encode_text(const param_registry & registry, std::string_view text,
                           bool capture = false);
tensor encode_at_layer(const param_registry & registry, std::span<const int64_t> tokens,
                       int64_t layer);

void apply_mask(param_registry & registry, const prune_mask & mask);
double measure_sparsity(const param_registry & registry);

} // namespace gaprune
