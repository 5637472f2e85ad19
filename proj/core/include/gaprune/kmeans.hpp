#pragma once

#include "gaprune/data.hpp"
#include "gaprune/encoder.hpp"
#include "gaprune/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gaprune {

struct sample_selection {
    int64_t k = 0;
    int64_t iterations = 0;
    uint64_t seed = 0;
    std::vector<int64_t> indices; // distinct, |indices| == k
};

// Lloyd's algorithm with seeded random-point initialization and a fixed
// iteration count (no early stop), Euclidean metric. Each final centroid
// selects its nearest dataset point; collisions fall back to the
// next-nearest unselected point. Ties break toward the lowest index.
sample_selection kmeans_sample(std::span<const tensor> embeddings, int64_t k,
                               int64_t iterations, uint64_t seed);

void save_selection(const std::filesystem::path & path, const sample_selection & sel);
sample_selection load_selection(const std::filesystem::path & path);

// one embedding per record's query, in record order
std::vector<tensor> embed_queries(const param_registry & registry,
                                  std::span<const triplet_record> records);

} // namespace gaprune
