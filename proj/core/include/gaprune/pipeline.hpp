#pragma once

#include "gaprune/config.hpp"
#include "gaprune/manifest.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace gaprune {

// One run directory per experiment. The manifest pins the config; reopening
// an existing run with a different config is an error.
struct run_context {
    std::filesystem::path dir;
    experiment_config config;
    run_manifest manifest;
    std::ostream * log = nullptr; // progress notes; may be null

    void note(const std::string & line) const;
};

run_context open_run(const std::filesystem::path & dir,
                     const std::optional<experiment_config> & provided,
                     std::ostream * log = nullptr);

void cmd_synth(run_context & ctx);
void cmd_train_dense(run_context & ctx);
void cmd_sample(run_context & ctx);
void cmd_analyze(run_context & ctx);
void cmd_prune(run_context & ctx);
void cmd_retrain(run_context & ctx);
void cmd_eval(run_context & ctx);
void cmd_geom(run_context & ctx);
void cmd_correlate(run_context & ctx);
void cmd_layer_probe(run_context & ctx);
void cmd_report(run_context & ctx);

// invariant checks over stored artifacts; prints one line per check to the
// context log and returns the number of failures
int cmd_verify(run_context & ctx);

// the full protocol in stage order
void cmd_all(run_context & ctx);

// artifact key helpers shared with tests
std::string cell_key(const std::string & prefix, score_method method, double sparsity);
std::string sparsity_label(double sparsity);

} // namespace gaprune
