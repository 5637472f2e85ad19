#pragma once

#include "gaprune/analysis.hpp"
#include "gaprune/encoder.hpp"
#include "gaprune/objective.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gaprune {

// Everything a run needs, with every default materialized. The manifest
// echoes the full config so no stage relies on implicit defaults.
struct experiment_config {
    uint64_t seed = 42;
    std::vector<double> sparsities = {0.3, 0.5};
    std::vector<double> retrain_sparsities = {0.5};
    std::vector<score_method> methods = {score_method::random, score_method::magnitude,
                                         score_method::fisher_gen, score_method::fisher_dom,
                                         score_method::dai};

    encoder_config encoder; // encoder.seed is derived from `seed` at init time

    int64_t corpus_size = 512;
    int64_t concept_vocab = 96;
    double overlap_ratio = 0.5;
    int64_t polysemy_tokens = 8;

    int64_t retrieval_queries = 64;
    int64_t gold_overlap = 0;
    int64_t classification_per_cluster = 16;
    int64_t sts_pairs = 64;
    int64_t knn_k = 5;
    double train_fraction = 0.75;

    sampling_config sampling;

    double nce_temperature = 0.05;
    bool train_in_batch_negatives = true;

    train_config train;   // dense training
    train_config retrain; // defaults to 100 steps

    dai_config dai;

    int64_t geometry_sample = 256;
    double geometry_t = 2.0;
    double geometry_power = 2.0;

    void validate() const;

    infonce_config train_nce() const;    // temperature + configured in-batch flag
    infonce_config analysis_nce() const; // temperature, in-batch negatives off
};

// stage seeds are labeled hashes of the master seed
uint64_t derive_seed(uint64_t master, std::string_view label);

// TOML-style key/value document: [section] headers, `key = value` lines,
// `#` comments; values are numbers, booleans, quoted strings or flat arrays.
// Unknown sections or keys are rejected.
experiment_config parse_config_text(const std::string & text, const std::string & origin);
experiment_config load_config_file(const std::filesystem::path & path);

std::string config_to_json(const experiment_config & cfg);
experiment_config config_from_json(const std::string & json_text);

} // namespace gaprune
