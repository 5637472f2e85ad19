// gaprune: gradient-alignment pruning experiments on a desk-scale contrastive
// encoder. Each subcommand is one stage of the protocol; artifacts live in a
// run directory with a manifest pinning config, seeds and fingerprints.

#include "gaprune/analysis.hpp"
#include "gaprune/config.hpp"
#include "gaprune/errors.hpp"
#include "gaprune/pipeline.hpp"
#include "gaprune/version.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct cli_options {
    std::string run_dir;
    std::string config_path;
    std::optional<uint64_t> seed;
    std::vector<double> sparsities;
    std::vector<std::string> methods;
    std::string granularity;
    std::optional<int64_t> steps; // retrain step override
};

gaprune::experiment_config build_config(const cli_options & opt) {
    gaprune::experiment_config cfg;
    if (!opt.config_path.empty()) {
        cfg = gaprune::load_config_file(opt.config_path);
    }
    if (opt.seed) {
        cfg.seed = *opt.seed;
    }
    if (!opt.sparsities.empty()) {
        cfg.sparsities = opt.sparsities;
        cfg.retrain_sparsities.clear();
        for (double s : cfg.sparsities) {
            if (s > 0.0) {
                cfg.retrain_sparsities.push_back(s);
            }
        }
    }
    if (!opt.methods.empty()) {
        cfg.methods.clear();
        for (const std::string & m : opt.methods) {
            cfg.methods.push_back(gaprune::method_from_name(m));
        }
    }
    if (!opt.granularity.empty()) {
        cfg.dai.granularity = gaprune::granularity_from_name(opt.granularity);
    }
    if (opt.steps) {
        cfg.retrain.steps = *opt.steps;
    }
    cfg.validate();
    return cfg;
}

bool cli_overrides_config(const cli_options & opt) {
    return !opt.config_path.empty() || opt.seed || !opt.sparsities.empty() ||
           !opt.methods.empty() || !opt.granularity.empty() || opt.steps.has_value();
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"gradient-alignment pruning toolkit"};
    app.set_version_flag("--version", gaprune::kToolVersion);
    app.require_subcommand(1);

    cli_options opt;
    app.add_option("--run", opt.run_dir, "run directory")->required();
    app.add_option("--config", opt.config_path, "config file (TOML-style key/value)");
    app.add_option("--seed", opt.seed, "master seed override");
    app.add_option("--sparsity", opt.sparsities, "sparsity list override")->delimiter(',');
    app.add_option("--method", opt.methods, "method list override")->delimiter(',');
    app.add_option("--granularity", opt.granularity,
                   "alignment granularity: element|row|tensor");
    app.add_option("--steps", opt.steps, "retraining step count override");

    struct subcommand {
        const char * name;
        const char * help;
        void (*fn)(gaprune::run_context &);
    };
    const subcommand stages[] = {
        {"synth", "generate the two-domain corpora and eval fixtures", gaprune::cmd_synth},
        {"train-dense", "train the dense reference encoder", gaprune::cmd_train_dense},
        {"sample", "k-means representative sampling of calibration sets", gaprune::cmd_sample},
        {"analyze", "gradient statistics, alignment and importance scores",
         gaprune::cmd_analyze},
        {"prune", "build masks and one-shot pruned checkpoints", gaprune::cmd_prune},
        {"retrain", "masked retraining on the domain corpus", gaprune::cmd_retrain},
        {"eval", "retrieval/classification/STS evaluation per model", gaprune::cmd_eval},
        {"geom", "embedding-geometry report for pruned models", gaprune::cmd_geom},
        {"correlate", "rank-score correlation matrix across methods", gaprune::cmd_correlate},
        {"layer-probe", "per-layer retrieval probe and importance profile",
         gaprune::cmd_layer_probe},
        {"report", "aggregate result table", gaprune::cmd_report},
        {"all", "run every stage in order", gaprune::cmd_all},
    };

    CLI::App * chosen = nullptr;
    void (*chosen_fn)(gaprune::run_context &) = nullptr;
    for (const subcommand & sc : stages) {
        CLI::App * sub = app.add_subcommand(sc.name, sc.help);
        sub->callback([&chosen, &chosen_fn, sub, fn = sc.fn]() {
            chosen = sub;
            chosen_fn = fn;
        });
    }
    CLI::App * verify = app.add_subcommand("verify", "check stored artifacts and invariants");
    bool verify_chosen = false;
    verify->callback([&verify_chosen]() { verify_chosen = true; });

    CLI11_PARSE(app, argc, argv);

    try {
        std::optional<gaprune::experiment_config> cfg;
        if (cli_overrides_config(opt)) {
            cfg = build_config(opt);
        }
        gaprune::run_context ctx = gaprune::open_run(opt.run_dir, cfg, &std::cout);
        if (verify_chosen) {
            return gaprune::cmd_verify(ctx) == 0 ? 0 : 1;
        }
        chosen_fn(ctx);
        return 0;
    } catch (const gaprune::error & e) {
        std::cerr << "gaprune: error: [" << e.category() << "] " << e.what() << std::endl;
        return 1;
    } catch (const std::exception & e) {
        std::cerr << "gaprune: error: [internal] " << e.what() << std::endl;
        return 1;
    }
}
