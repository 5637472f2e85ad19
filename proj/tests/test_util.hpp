#pragma once

#include "gaprune/checkpoint.hpp"
#include "gaprune/encoder.hpp"
#include "gaprune/rng.hpp"
#include "gaprune/tensor.hpp"

#include <filesystem>
#include <functional>
#include <string>

namespace testutil {

inline gaprune::tensor random_tensor(std::vector<int64_t> shape, gaprune::rng & r,
                                     double scale = 1.0) {
    gaprune::tensor t = gaprune::tensor::zeros(std::move(shape));
    for (double & v : t.values) {
        v = r.normal(0.0, scale);
    }
    return t;
}

inline gaprune::encoder_config tiny_encoder_config(uint64_t seed = 3) {
    gaprune::encoder_config cfg;
    cfg.vocab_size = 64;
    cfg.embed_dim  = 6;
    cfg.num_layers = 2;
    cfg.hidden_dim = 8;
    cfg.max_tokens = 6;
    cfg.seed       = seed;
    return cfg;
}

// mask whose bit for (tensor t, element i) is fn(t, i)
inline gaprune::prune_mask manual_mask(const gaprune::param_registry & reg,
                                       const std::function<uint8_t(size_t, size_t)> & fn) {
    gaprune::prune_mask mask;
    mask.registry_fingerprint = gaprune::registry_fingerprint(reg);
    int64_t kept = 0, total = 0;
    size_t t = 0;
    for (size_t idx : reg.prunable_entry_indices()) {
        const auto & e = reg.entries[idx];
        mask.names.push_back(e.name);
        mask.shapes.push_back(e.weights.shape);
        std::vector<uint8_t> keep(size_t(e.weights.numel()), 0);
        for (size_t i = 0; i < keep.size(); ++i) {
            keep[i] = fn(t, i);
            kept += keep[i] ? 1 : 0;
        }
        total += e.weights.numel();
        mask.keep.push_back(std::move(keep));
        ++t;
    }
    mask.retained = kept;
    mask.target_sparsity = total > 0 ? 1.0 - double(kept) / double(total) : 0.0;
    mask.method = "manual";
    return mask;
}

// scratch directory under the system temp dir, cleaned on destruction
struct temp_dir {
    std::filesystem::path path;

    explicit temp_dir(const std::string & tag) {
        path = std::filesystem::temp_directory_path() /
               ("gaprune_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~temp_dir() { std::filesystem::remove_all(path); }
};

} // namespace testutil
