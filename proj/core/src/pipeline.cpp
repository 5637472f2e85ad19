#include "gaprune/pipeline.hpp"

#include "gaprune/artifact_io.hpp"
#include "gaprune/checkpoint.hpp"
#include "gaprune/errors.hpp"
#include "gaprune/evalgeom.hpp"
#include "gaprune/fnv.hpp"
#include "gaprune/io.hpp"
#include "gaprune/report.hpp"
#include "gaprune/rng.hpp"
#include "gaprune/version.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>

namespace gaprune {

using nlohmann::json;

void run_context::note(const std::string & line) const {
    if (log) {
        (*log) << line << "\n";
    }
}

std::string sparsity_label(double sparsity) {
    return std::to_string(int64_t(std::llround(sparsity * 100.0)));
}

std::string cell_key(const std::string & prefix, score_method method, double sparsity) {
    return prefix + "." + method_name(method) + "." + sparsity_label(sparsity);
}

run_context open_run(const std::filesystem::path & dir,
                     const std::optional<experiment_config> & provided, std::ostream * log) {
    run_context ctx;
    ctx.dir = dir;
    ctx.log = log;
    if (manifest_exists(dir)) {
        ctx.manifest = load_manifest(dir);
        ctx.config = config_from_json(ctx.manifest.config_json);
        if (provided) {
            const std::string given = config_to_json(*provided);
            if (given != ctx.manifest.config_json) {
                throw config_error("run directory " + dir.string() +
                                   " was created with a different config");
            }
        }
    } else {
        ctx.config = provided.value_or(experiment_config{});
        ctx.config.validate();
        std::filesystem::create_directories(dir);
        ctx.manifest.config_json = config_to_json(ctx.config);
        ctx.manifest.tool_version = kToolVersion;
        ctx.manifest.run_id = "run-" + fingerprint_hex(fnv1a64(ctx.manifest.config_json));
        save_manifest(dir, ctx.manifest);
    }
    return ctx;
}

namespace {

bool reuse_stage(run_context & ctx, const std::string & stage) {
    if (stage_reusable(ctx.manifest, ctx.dir, stage)) {
        ctx.note(stage + ": artifacts up to date, reusing");
        return true;
    }
    return false;
}

void finish_stage(run_context & ctx, const std::string & stage) {
    ctx.manifest.stages[stage].done = true;
    save_manifest(ctx.dir, ctx.manifest);
    ctx.note(stage + ": done");
}

corpus_spec corpus_spec_for(const experiment_config & cfg, corpus_kind kind) {
    corpus_spec spec;
    spec.kind = kind;
    spec.size = cfg.corpus_size;
    spec.overlap_ratio = cfg.overlap_ratio;
    spec.polysemy_tokens = cfg.polysemy_tokens;
    spec.seed = derive_seed(cfg.seed, kind == corpus_kind::general ? "corpus.general"
                                                                    : "corpus.domain");
    return spec;
}

encoder_config encoder_config_for(const experiment_config & cfg) {
    encoder_config ec = cfg.encoder;
    ec.seed = derive_seed(cfg.seed, "encoder.init");
    return ec;
}

std::vector<triplet_record> load_corpus(run_context & ctx, const char * key) {
    return load_triplets(require_artifact(ctx.manifest, ctx.dir, key, "synth"));
}

param_registry load_ckpt(run_context & ctx, const std::string & key,
                         const std::string & producer) {
    return load_checkpoint(require_artifact(ctx.manifest, ctx.dir, key, producer));
}

// task scores for one model against the stored eval fixtures
std::vector<task_score> run_eval_tasks(run_context & ctx, const param_registry & registry) {
    const retrieval_fixture retr =
        load_retrieval_fixture(require_artifact(ctx.manifest, ctx.dir, "eval.retrieval", "synth"));
    const classification_fixture cls = load_classification_fixture(
        require_artifact(ctx.manifest, ctx.dir, "eval.classification", "synth"));
    const sts_fixture sts =
        load_sts_fixture(require_artifact(ctx.manifest, ctx.dir, "eval.sts", "synth"));

    std::vector<task_score> tasks;
    tasks.push_back({"SynthRetrieval", "retrieval", eval_retrieval(registry, retr)});
    tasks.push_back({"SynthClassification", "classification",
                     eval_classification(registry, cls, ctx.config.train_fraction,
                                         ctx.config.knn_k,
                                         derive_seed(ctx.config.seed, "eval.split"))});
    tasks.push_back({"SynthSTS", "sts", eval_sts(registry, sts)});
    return tasks;
}

std::vector<triplet_record> geometry_sample_of(run_context & ctx,
                                               const std::vector<triplet_record> & corpus) {
    std::vector<triplet_record> sample = corpus;
    rng r(derive_seed(ctx.config.seed, "geometry.sample"));
    for (size_t i = sample.size(); i > 1; --i) {
        std::swap(sample[i - 1], sample[size_t(r.below(i))]);
    }
    if (int64_t(sample.size()) > ctx.config.geometry_sample) {
        sample.resize(size_t(ctx.config.geometry_sample));
    }
    return sample;
}

} // namespace

void cmd_synth(run_context & ctx) {
    const std::string stage = "synth";
    if (reuse_stage(ctx, stage)) {
        return;
    }
    const experiment_config & cfg = ctx.config;

    const corpus_spec gen_spec = corpus_spec_for(cfg, corpus_kind::general);
    const corpus_spec dom_spec = corpus_spec_for(cfg, corpus_kind::domain);
    save_triplets(ctx.dir / "corpora/general.jsonl", synth_corpus(gen_spec, cfg.concept_vocab));
    save_triplets(ctx.dir / "corpora/domain.jsonl", synth_corpus(dom_spec, cfg.concept_vocab));
    record_artifact(ctx.manifest, ctx.dir, stage, "corpus.general", "corpora/general.jsonl");
    record_artifact(ctx.manifest, ctx.dir, stage, "corpus.domain", "corpora/domain.jsonl");

    // evaluation fixtures live on the domain side of the world
    corpus_spec fx_spec = dom_spec;
    fx_spec.seed = derive_seed(cfg.seed, "eval.retrieval");
    save_retrieval_fixture(ctx.dir / "eval/retrieval.jsonl",
                           make_retrieval_fixture(fx_spec, cfg.concept_vocab,
                                                  cfg.retrieval_queries, cfg.gold_overlap));
    fx_spec.seed = derive_seed(cfg.seed, "eval.classification");
    save_classification_fixture(ctx.dir / "eval/classification.jsonl",
                                make_classification_fixture(fx_spec, cfg.concept_vocab,
                                                            cfg.classification_per_cluster));
    fx_spec.seed = derive_seed(cfg.seed, "eval.sts");
    save_sts_fixture(ctx.dir / "eval/sts.jsonl",
                     make_sts_fixture(fx_spec, cfg.concept_vocab, cfg.sts_pairs));
    record_artifact(ctx.manifest, ctx.dir, stage, "eval.retrieval", "eval/retrieval.jsonl");
    record_artifact(ctx.manifest, ctx.dir, stage, "eval.classification",
                    "eval/classification.jsonl");
    record_artifact(ctx.manifest, ctx.dir, stage, "eval.sts", "eval/sts.jsonl");

    finish_stage(ctx, stage);
}

void cmd_train_dense(run_context & ctx) {
    const std::string stage = "train_dense";
    if (reuse_stage(ctx, stage)) {
        return;
    }
    require_stage(ctx.manifest, "synth", "synth");

    // the dense model sees both sides, like a broadly pretrained encoder
    std::vector<triplet_record> corpus = load_corpus(ctx, "corpus.general");
    const std::vector<triplet_record> domain = load_corpus(ctx, "corpus.domain");
    corpus.insert(corpus.end(), domain.begin(), domain.end());

    param_registry registry = init_encoder(encoder_config_for(ctx.config));
    train_config tc = ctx.config.train;
    tc.seed = derive_seed(ctx.config.seed, "train.dense");
    ctx.note("train_dense: " + std::to_string(tc.steps) + " steps on " +
             std::to_string(corpus.size()) + " triplets");
    const loss_trace trace = train_dense(registry, corpus, tc, ctx.config.train_nce());

    save_checkpoint(ctx.dir / "checkpoints/dense.ckpt", registry);
    save_loss_trace_csv(ctx.dir / "traces/dense.csv", trace);
    record_artifact(ctx.manifest, ctx.dir, stage, "ckpt.dense", "checkpoints/dense.ckpt");
    record_artifact(ctx.manifest, ctx.dir, stage, "trace.dense", "traces/dense.csv");
    finish_stage(ctx, stage);
}

void cmd_sample(run_context & ctx) {
    const std::string stage = "sample";
    if (reuse_stage(ctx, stage)) {
        return;
    }
    require_stage(ctx.manifest, "train_dense", "train-dense");

    const param_registry registry = load_ckpt(ctx, "ckpt.dense", "train-dense");
    const std::vector<triplet_record> general = load_corpus(ctx, "corpus.general");
    const std::vector<triplet_record> domain = load_corpus(ctx, "corpus.domain");

    const sampling_config & sc = ctx.config.sampling;
    const sample_selection sel_gen =
        kmeans_sample(embed_queries(registry, general), sc.k, sc.iterations,
                      derive_seed(ctx.config.seed, "sample.general"));
    const sample_selection sel_dom =
        kmeans_sample(embed_queries(registry, domain), sc.k, sc.iterations,
                      derive_seed(ctx.config.seed, "sample.domain"));
    save_selection(ctx.dir / "samples/general.json", sel_gen);
    save_selection(ctx.dir / "samples/domain.json", sel_dom);
    record_artifact(ctx.manifest, ctx.dir, stage, "sel.general", "samples/general.json");
    record_artifact(ctx.manifest, ctx.dir, stage, "sel.domain", "samples/domain.json");
    finish_stage(ctx, stage);
}

void cmd_analyze(run_context & ctx) {
    const std::string stage = "analyze";
    if (reuse_stage(ctx, stage)) {
        return;
    }
    require_stage(ctx.manifest, "sample", "sample");

    const param_registry registry = load_ckpt(ctx, "ckpt.dense", "train-dense");
    const std::vector<triplet_record> general = load_corpus(ctx, "corpus.general");
    const std::vector<triplet_record> domain = load_corpus(ctx, "corpus.domain");
    const sample_selection sel_gen =
        load_selection(require_artifact(ctx.manifest, ctx.dir, "sel.general", "sample"));
    const sample_selection sel_dom =
        load_selection(require_artifact(ctx.manifest, ctx.dir, "sel.domain", "sample"));

    std::vector<triplet_record> calib_gen, calib_dom;
    for (int64_t idx : sel_gen.indices) {
        calib_gen.push_back(general[size_t(idx)]);
    }
    for (int64_t idx : sel_dom.indices) {
        calib_dom.push_back(domain[size_t(idx)]);
    }

    const infonce_config nce = ctx.config.analysis_nce();
    grad_stats stats;
    ctx.note("analyze: fisher over " + std::to_string(calib_gen.size()) + "+" +
             std::to_string(calib_dom.size()) + " calibration triplets");
    estimate_fisher(registry, calib_gen, stat_side::general, nce, stats);
    estimate_fisher(registry, calib_dom, stat_side::domain, nce, stats);
    save_stats(ctx.dir / "analysis/stats.bin", stats);
    record_artifact(ctx.manifest, ctx.dir, stage, "stats", "analysis/stats.bin");

    const std::vector<tensor> alignment = alignment_scores(stats, ctx.config.dai);
    save_alignment(ctx.dir / "analysis/alignment.bin", stats, alignment, ctx.config.dai);
    record_artifact(ctx.manifest, ctx.dir, stage, "alignment", "analysis/alignment.bin");

    for (score_method m : ctx.config.methods) {
        importance_map map;
        if (m == score_method::dai) {
            map = dai_scores(registry, stats, alignment, ctx.config.dai);
        } else {
            map = baseline_scores(registry, &stats, m,
                                  derive_seed(ctx.config.seed, "score.random"));
        }
        const std::string rel = std::string("analysis/scores_") + method_name(m) + ".bin";
        save_scores(ctx.dir / rel, map);
        record_artifact(ctx.manifest, ctx.dir, stage, std::string("scores.") + method_name(m),
                        rel);
    }
    finish_stage(ctx, stage);
}

void cmd_prune(run_context & ctx) {
    const std::string stage = "prune";
    if (reuse_stage(ctx, stage)) {
        return;
    }
    require_stage(ctx.manifest, "analyze", "analyze");

    const param_registry dense = load_ckpt(ctx, "ckpt.dense", "train-dense");
    for (score_method m : ctx.config.methods) {
        const importance_map scores = load_scores(require_artifact(
            ctx.manifest, ctx.dir, std::string("scores.") + method_name(m), "analyze"));
        for (double s : ctx.config.sparsities) {
            const prune_mask mask = build_mask(scores, s);
            const std::string tag = std::string(method_name(m)) + "_s" + sparsity_label(s);
            save_mask(ctx.dir / ("masks/" + tag + ".mask"), mask);
            record_artifact(ctx.manifest, ctx.dir, stage, cell_key("mask", m, s),
                            "masks/" + tag + ".mask");

            param_registry pruned = dense;
            apply_mask(pruned, mask);
            save_checkpoint(ctx.dir / ("checkpoints/oneshot_" + tag + ".ckpt"), pruned);
            record_artifact(ctx.manifest, ctx.dir, stage, cell_key("ckpt.oneshot", m, s),
                            "checkpoints/oneshot_" + tag + ".ckpt");
        }
    }
    finish_stage(ctx, stage);
}

void cmd_retrain(run_context & ctx) {
    const std::string stage = "retrain";
    if (reuse_stage(ctx, stage)) {
        return;
    }
    require_stage(ctx.manifest, "prune", "prune");

    const std::vector<triplet_record> domain = load_corpus(ctx, "corpus.domain");
    for (score_method m : ctx.config.methods) {
        for (double s : ctx.config.retrain_sparsities) {
            const std::string tag = std::string(method_name(m)) + "_s" + sparsity_label(s);
            param_registry registry =
                load_ckpt(ctx, cell_key("ckpt.oneshot", m, s), "prune");
            const prune_mask mask = load_mask(
                require_artifact(ctx.manifest, ctx.dir, cell_key("mask", m, s), "prune"));

            train_config tc = ctx.config.retrain;
            tc.seed = derive_seed(ctx.config.seed, "retrain." + tag);
            const loss_trace trace =
                retrain_masked(registry, mask, domain, tc, ctx.config.train_nce());

            save_checkpoint(ctx.dir / ("checkpoints/retrained_" + tag + ".ckpt"), registry);
            save_loss_trace_csv(ctx.dir / ("traces/retrain_" + tag + ".csv"), trace);
            record_artifact(ctx.manifest, ctx.dir, stage, cell_key("ckpt.retrained", m, s),
                            "checkpoints/retrained_" + tag + ".ckpt");
            record_artifact(ctx.manifest, ctx.dir, stage, cell_key("trace.retrain", m, s),
                            "traces/retrain_" + tag + ".csv");
        }
    }
    finish_stage(ctx, stage);
}

void cmd_eval(run_context & ctx) {
    const std::string stage = "eval";
    if (reuse_stage(ctx, stage)) {
        return;
    }
    require_stage(ctx.manifest, "prune", "prune");
    const bool retrained = ctx.manifest.stages.count("retrain") &&
                           ctx.manifest.stages.at("retrain").done;

    const param_registry dense = load_ckpt(ctx, "ckpt.dense", "train-dense");
    const eval_report dense_rep =
        aggregate_report("dense", run_eval_tasks(ctx, dense), nullptr);
    save_report_json(ctx.dir / "reports/eval_dense.json", dense_rep);
    record_artifact(ctx.manifest, ctx.dir, stage, "report.dense", "reports/eval_dense.json");

    auto eval_cell = [&](const std::string & prefix, const std::string & ckpt_prefix,
                         score_method m, double s, const std::string & producer) {
        const std::string tag = std::string(method_name(m)) + "_s" + sparsity_label(s);
        const param_registry registry = load_ckpt(ctx, cell_key(ckpt_prefix, m, s), producer);
        const std::string label = prefix + " " + method_name(m) + " " + sparsity_label(s) + "%";
        const eval_report rep =
            aggregate_report(label, run_eval_tasks(ctx, registry), &dense_rep);
        const std::string rel = "reports/eval_" + prefix + "_" + tag + ".json";
        save_report_json(ctx.dir / rel, rep);
        record_artifact(ctx.manifest, ctx.dir, stage, cell_key("report." + prefix, m, s), rel);
        ctx.note("eval: " + label + " avg " + std::to_string(rep.overall));
    };

    for (score_method m : ctx.config.methods) {
        for (double s : ctx.config.sparsities) {
            eval_cell("oneshot", "ckpt.oneshot", m, s, "prune");
        }
        if (retrained) {
            for (double s : ctx.config.retrain_sparsities) {
                eval_cell("retrained", "ckpt.retrained", m, s, "retrain");
            }
        }
    }
    finish_stage(ctx, stage);
}

void cmd_geom(run_context & ctx) {
    const std::string stage = "geom";
    if (reuse_stage(ctx, stage)) {
        return;
    }
    require_stage(ctx.manifest, "prune", "prune");

    const param_registry dense = load_ckpt(ctx, "ckpt.dense", "train-dense");
    const std::vector<triplet_record> sample =
        geometry_sample_of(ctx, load_corpus(ctx, "corpus.domain"));
    const uint64_t pair_seed = derive_seed(ctx.config.seed, "geometry.pairs");

    json rows = json::array();
    std::string table = "model  uniformity  alignment  cross_dim  cosine_sim  effective_dim\n";
    char buf[160];
    auto add_row = [&](const std::string & label, const geometry_report & rep,
                       bool has_cosine) {
        json jr;
        jr["label"]            = label;
        jr["uniformity_loss"]  = rep.uniformity;
        jr["alignment_loss"]   = rep.alignment;
        jr["cross_dim_corr"]   = rep.cross_dim;
        jr["cross_dim_skipped"] = rep.cross_dim_skipped;
        if (has_cosine) {
            jr["cosine_to_dense"] = rep.cosine_to_dense;
        }
        jr["effective_dim"] = rep.effective_dim;
        jr["sample_size"]   = rep.sample_size;
        rows.push_back(std::move(jr));
        std::snprintf(buf, sizeof(buf), "%-24s  %+.4f  %.4f  %.4f  %s  %lld\n", label.c_str(),
                      rep.uniformity, rep.alignment, rep.cross_dim,
                      has_cosine ? std::to_string(rep.cosine_to_dense).c_str() : "--",
                      static_cast<long long>(rep.effective_dim));
        table += buf;
    };

    const geometry_report dense_rep = compute_geometry(dense, dense, sample, ctx.config.geometry_t,
                                                       ctx.config.geometry_power, pair_seed);
    add_row("dense", dense_rep, false);

    for (score_method m : ctx.config.methods) {
        for (double s : ctx.config.sparsities) {
            const param_registry pruned = load_ckpt(ctx, cell_key("ckpt.oneshot", m, s), "prune");
            const geometry_report rep =
                compute_geometry(pruned, dense, sample, ctx.config.geometry_t,
                                 ctx.config.geometry_power, pair_seed);
            add_row(std::string(method_name(m)) + " " + sparsity_label(s) + "%", rep, true);
        }
    }

    write_file(ctx.dir / "reports/geometry.json", json({{"rows", rows}}).dump(2) + "\n");
    write_file(ctx.dir / "reports/geometry.txt", table);
    record_artifact(ctx.manifest, ctx.dir, stage, "geometry.json", "reports/geometry.json");
    record_artifact(ctx.manifest, ctx.dir, stage, "geometry.txt", "reports/geometry.txt");
    finish_stage(ctx, stage);
}

void cmd_correlate(run_context & ctx) {
    const std::string stage = "correlate";
    if (reuse_stage(ctx, stage)) {
        return;
    }
    require_stage(ctx.manifest, "analyze", "analyze");

    std::vector<importance_map> maps;
    for (score_method m : ctx.config.methods) {
        maps.push_back(load_scores(require_artifact(
            ctx.manifest, ctx.dir, std::string("scores.") + method_name(m), "analyze")));
    }
    const std::vector<std::vector<double>> corr = method_correlation(maps);

    std::string csv = "method";
    for (const importance_map & m : maps) {
        csv += std::string(",") + method_name(m.method);
    }
    csv += "\n";
    char buf[64];
    for (size_t i = 0; i < maps.size(); ++i) {
        csv += method_name(maps[i].method);
        for (size_t j = 0; j < maps.size(); ++j) {
            std::snprintf(buf, sizeof(buf), ",%.6f", corr[i][j]);
            csv += buf;
        }
        csv += "\n";
    }
    write_file(ctx.dir / "reports/method_correlation.csv", csv);
    record_artifact(ctx.manifest, ctx.dir, stage, "correlation",
                    "reports/method_correlation.csv");
    finish_stage(ctx, stage);
}

void cmd_layer_probe(run_context & ctx) {
    const std::string stage = "layer_probe";
    if (reuse_stage(ctx, stage)) {
        return;
    }
    require_stage(ctx.manifest, "train_dense", "train-dense");

    const param_registry dense = load_ckpt(ctx, "ckpt.dense", "train-dense");
    const retrieval_fixture retr =
        load_retrieval_fixture(require_artifact(ctx.manifest, ctx.dir, "eval.retrieval", "synth"));
    const std::vector<double> per_layer = layer_probe_eval(dense, retr);

    std::string csv = "layer,ndcg_at_10\n";
    char buf[64];
    for (size_t l = 0; l < per_layer.size(); ++l) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", l, per_layer[l]);
        csv += buf;
    }
    write_file(ctx.dir / "reports/layer_probe.csv", csv);
    record_artifact(ctx.manifest, ctx.dir, stage, "layer_probe", "reports/layer_probe.csv");

    // per-layer mean importance per method, when the analyze stage has run
    if (ctx.manifest.stages.count("analyze") && ctx.manifest.stages.at("analyze").done) {
        std::string imp_csv = "method,layer,mean_score\n";
        for (score_method m : ctx.config.methods) {
            const importance_map map = load_scores(require_artifact(
                ctx.manifest, ctx.dir, std::string("scores.") + method_name(m), "analyze"));
            const std::vector<double> means = layer_avg_importance(map, dense);
            for (size_t l = 0; l < means.size(); ++l) {
                std::snprintf(buf, sizeof(buf), "%s,%zu,%.9g\n", method_name(m), l, means[l]);
                imp_csv += buf;
            }
        }
        write_file(ctx.dir / "reports/layer_importance.csv", imp_csv);
        record_artifact(ctx.manifest, ctx.dir, stage, "layer_importance",
                        "reports/layer_importance.csv");
    }
    finish_stage(ctx, stage);
}

void cmd_report(run_context & ctx) {
    const std::string stage = "report";
    if (reuse_stage(ctx, stage)) {
        return;
    }
    require_stage(ctx.manifest, "eval", "eval");

    std::vector<eval_report> rows;
    rows.push_back(report_from_json_file(
        require_artifact(ctx.manifest, ctx.dir, "report.dense", "eval")));
    for (double s : ctx.config.sparsities) {
        for (score_method m : ctx.config.methods) {
            rows.push_back(report_from_json_file(require_artifact(
                ctx.manifest, ctx.dir, cell_key("report.oneshot", m, s), "eval")));
        }
    }
    for (double s : ctx.config.retrain_sparsities) {
        for (score_method m : ctx.config.methods) {
            const std::string key = cell_key("report.retrained", m, s);
            if (ctx.manifest.artifacts.count(key)) {
                rows.push_back(report_from_json_file(
                    require_artifact(ctx.manifest, ctx.dir, key, "eval")));
            }
        }
    }

    const std::string table = render_report_table(rows);
    json j = json::array();
    for (const eval_report & rep : rows) {
        j.push_back(json::parse(report_to_json(rep)));
    }
    write_file(ctx.dir / "reports/report.txt", table);
    write_file(ctx.dir / "reports/report.json", j.dump(2) + "\n");
    record_artifact(ctx.manifest, ctx.dir, stage, "report.table", "reports/report.txt");
    record_artifact(ctx.manifest, ctx.dir, stage, "report.combined", "reports/report.json");
    ctx.note("report:\n" + table);
    finish_stage(ctx, stage);
}

int cmd_verify(run_context & ctx) {
    int failures = 0;
    auto check = [&](const std::string & name, bool ok, const std::string & detail) {
        ctx.note(std::string(ok ? "[ok]   " : "[FAIL] ") + name +
                 (detail.empty() ? "" : ": " + detail));
        if (!ok) {
            ++failures;
        }
    };

    // artifact fingerprints
    for (const auto & [key, info] : ctx.manifest.artifacts) {
        const std::filesystem::path path = ctx.dir / info.path;
        if (!std::filesystem::exists(path)) {
            check("artifact " + key, false, "file missing");
            continue;
        }
        const std::string actual = fingerprint_hex(file_fingerprint(path));
        check("artifact " + key, actual == info.fingerprint,
              actual == info.fingerprint ? "" : "fingerprint mismatch");
    }

    const bool pruned_done = ctx.manifest.stages.count("prune") &&
                             ctx.manifest.stages.at("prune").done;
    if (pruned_done) {
        const param_registry dense = load_ckpt(ctx, "ckpt.dense", "train-dense");
        const int64_t d = dense.prunable_elem_count();
        for (score_method m : ctx.config.methods) {
            for (double s : ctx.config.sparsities) {
                const std::string key = cell_key("mask", m, s);
                if (!ctx.manifest.artifacts.count(key)) {
                    continue;
                }
                prune_mask mask;
                try {
                    mask = load_mask(require_artifact(ctx.manifest, ctx.dir, key, "prune"));
                } catch (const error & e) {
                    check("mask " + key, false, e.what());
                    continue;
                }
                const int64_t expect = int64_t(std::floor((1.0 - s) * double(d)));
                check("mask cardinality " + key, mask.popcount() == expect,
                      std::to_string(mask.popcount()) + " vs " + std::to_string(expect));
                check("mask fingerprint " + key,
                      mask.registry_fingerprint == registry_fingerprint(dense), "");

                const std::string ck = cell_key("ckpt.oneshot", m, s);
                if (ctx.manifest.artifacts.count(ck)) {
                    const param_registry pruned = load_ckpt(ctx, ck, "prune");
                    const double want = 1.0 - double(expect) / double(d);
                    const double got = measure_sparsity(pruned);
                    check("oneshot sparsity " + ck, std::fabs(got - want) < 1e-12,
                          std::to_string(got));
                }
                const std::string rk = cell_key("ckpt.retrained", m, s);
                if (ctx.manifest.artifacts.count(rk)) {
                    const param_registry retrained = load_ckpt(ctx, rk, "retrain");
                    const double want = 1.0 - double(expect) / double(d);
                    const double got = measure_sparsity(retrained);
                    check("retrained sparsity " + rk, std::fabs(got - want) < 1e-12,
                          std::to_string(got));
                }
            }
        }
    }

    if (ctx.manifest.artifacts.count("stats")) {
        const grad_stats stats =
            load_stats(require_artifact(ctx.manifest, ctx.dir, "stats", "analyze"));
        bool nonneg = true;
        for (const side_stats * side : {&stats.general, &stats.domain}) {
            for (const tensor & f : side->fisher) {
                for (double v : f.values) {
                    if (!(v >= 0.0)) {
                        nonneg = false;
                    }
                }
            }
        }
        check("fisher non-negative", nonneg, "");
    }
    if (ctx.manifest.artifacts.count("alignment")) {
        const std::vector<tensor> alignment =
            load_alignment(require_artifact(ctx.manifest, ctx.dir, "alignment", "analyze"));
        bool in_range = true;
        for (const tensor & t : alignment) {
            for (double v : t.values) {
                if (v < -1.0 || v > 1.0) {
                    in_range = false;
                }
            }
        }
        check("alignment in [-1,1]", in_range, "");
    }

    // delta% arithmetic of every stored report
    if (ctx.manifest.artifacts.count("report.dense")) {
        const eval_report dense = report_from_json_file(
            require_artifact(ctx.manifest, ctx.dir, "report.dense", "eval"));
        for (const auto & [key, info] : ctx.manifest.artifacts) {
            if (key.rfind("report.oneshot", 0) != 0 && key.rfind("report.retrained", 0) != 0) {
                continue;
            }
            const eval_report rep =
                report_from_json_file(require_artifact(ctx.manifest, ctx.dir, key, "eval"));
            if (!rep.delta_pct) {
                check("delta% " + key, false, "missing");
                continue;
            }
            const double want = 100.0 * (rep.overall - dense.overall) / dense.overall;
            check("delta% " + key, std::fabs(*rep.delta_pct - want) < 1e-9, "");
        }
    }

    ctx.note(failures == 0 ? "verify: all checks passed"
                           : "verify: " + std::to_string(failures) + " check(s) failed");
    return failures;
}

void cmd_all(run_context & ctx) {
    cmd_synth(ctx);
    cmd_train_dense(ctx);
    cmd_sample(ctx);
    cmd_analyze(ctx);
    cmd_prune(ctx);
    cmd_retrain(ctx);
    cmd_eval(ctx);
    cmd_geom(ctx);
    cmd_correlate(ctx);
    cmd_layer_probe(ctx);
    cmd_report(ctx);
}

} // namespace gaprune
