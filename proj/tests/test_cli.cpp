#include "gaprune/config.hpp"
#include "gaprune/errors.hpp"
#include "gaprune/io.hpp"
#include "gaprune/manifest.hpp"
#include "gaprune/pipeline.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace gaprune;

namespace {

// small but complete config: full pipeline in a few seconds
const char * kTinyConfig = R"(
# desk-scale smoke configuration
[run]
seed = 13
sparsities = [0.5]
retrain_sparsities = [0.5]
methods = ["random", "magnitude", "dai"]

[encoder]
vocab_size = 256
embed_dim = 8
num_layers = 2
hidden_dim = 12
max_tokens = 8

[corpus]
size = 64
concept_vocab = 32
overlap_ratio = 0.5
polysemy_tokens = 2

[eval]
retrieval_queries = 12
gold_overlap = 2
classification_per_cluster = 4
sts_pairs = 16
knn_k = 3
train_fraction = 0.7

[sampling]
k = 24
iterations = 5

[train]
steps = 25
batch_size = 6
learning_rate = 0.003

[retrain]
steps = 10
batch_size = 6

[geometry]
sample_size = 16
)";

std::string cli_path() {
    return GAPRUNE_CLI_PATH;
}

int run_cli(const std::string & args, std::string * err_out = nullptr) {
    testutil::temp_dir tmp("cli_io");
    const std::string err_file = (tmp.path / "stderr.txt").string();
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>" + err_file;
    const int rc = std::system(cmd.c_str());
    if (err_out) {
        *err_out = read_file(err_file);
    }
    return WEXITSTATUS(rc);
}

experiment_config tiny_config() {
    return parse_config_text(kTinyConfig, "tiny");
}

} // namespace

TEST_CASE("config parser: defaults, overrides, rejection of unknown keys") {
    const experiment_config cfg = tiny_config();
    CHECK(cfg.seed == 13);
    CHECK(cfg.sparsities == std::vector<double>{0.5});
    CHECK(cfg.methods.size() == 3);
    CHECK(cfg.methods[2] == score_method::dai);
    CHECK(cfg.encoder.embed_dim == 8);
    CHECK(cfg.train.steps == 25);
    CHECK(cfg.retrain.steps == 10);
    // untouched defaults survive
    CHECK(cfg.dai.alpha == 0.2);
    CHECK(cfg.dai.beta == 1.0);
    CHECK(cfg.dai.gamma == 0.5);
    CHECK(cfg.dai.epsilon == 1e-8);
    CHECK(cfg.nce_temperature == 0.05);

    CHECK_THROWS_AS(parse_config_text("[run]\nbogus = 1\n", "x"), config_error);
    CHECK_THROWS_AS(parse_config_text("[nope]\nseed = 1\n", "x"), config_error);
    CHECK_THROWS_AS(parse_config_text("[run]\nseed = \"abc\"\n", "x"), parse_error);
    CHECK_THROWS_AS(parse_config_text("[run]\nseed = 1\nseed = 2\n", "x"), parse_error);
    CHECK_THROWS_AS(parse_config_text("[dai]\ngranularity = \"diagonal\"\n", "x"), parse_error);
    CHECK_THROWS_AS(parse_config_text("[run]\nsparsities = [0.5, 1.5]\n", "x"), config_error);

    // granularity and arrays parse
    const experiment_config g =
        parse_config_text("[dai]\ngranularity = \"tensor\"\n", "x");
    CHECK(g.dai.granularity == align_granularity::tensor);
}

TEST_CASE("config json round-trip preserves every field") {
    const experiment_config cfg = tiny_config();
    const std::string js = config_to_json(cfg);
    const experiment_config back = config_from_json(js);
    CHECK(config_to_json(back) == js);
}

TEST_CASE("manifest artifact accounting") {
    testutil::temp_dir dir("manifest");
    run_manifest m;
    m.run_id = "run-x";
    m.tool_version = "0.0test";
    m.config_json = config_to_json(tiny_config());

    write_file(dir.path / "a.bin", "hello");
    record_artifact(m, dir.path, "stage1", "art.a", "a.bin");
    save_manifest(dir.path, m);

    const run_manifest loaded = load_manifest(dir.path);
    CHECK(loaded.artifacts.at("art.a").path == "a.bin");
    CHECK(require_artifact(loaded, dir.path, "art.a", "stage1") == dir.path / "a.bin");

    // missing key names the producer
    try {
        require_artifact(loaded, dir.path, "art.b", "other-stage");
        FAIL("expected dependency_error");
    } catch (const dependency_error & e) {
        CHECK(std::string(e.what()).find("other-stage") != std::string::npos);
    }

    // tampering is caught
    write_file(dir.path / "a.bin", "tampered");
    CHECK_THROWS_AS(require_artifact(loaded, dir.path, "art.a", "stage1"), integrity_error);
    CHECK(!stage_reusable(loaded, dir.path, "stage1"));
}

TEST_CASE("stage dependency errors name the missing producer") {
    testutil::temp_dir dir("deps");
    run_context ctx = open_run(dir.path / "run", tiny_config());
    try {
        cmd_prune(ctx);
        FAIL("expected dependency_error");
    } catch (const dependency_error & e) {
        CHECK(std::string(e.what()).find("analyze") != std::string::npos);
    }
    try {
        cmd_retrain(ctx);
        FAIL("expected dependency_error");
    } catch (const dependency_error & e) {
        CHECK(std::string(e.what()).find("prune") != std::string::npos);
    }
}

TEST_CASE("open_run rejects a different config for an existing run") {
    testutil::temp_dir dir("reopen");
    open_run(dir.path / "run", tiny_config());
    experiment_config other = tiny_config();
    other.seed = 14;
    CHECK_THROWS_AS(open_run(dir.path / "run", other), config_error);
    // reopening without a config uses the stored one
    const run_context ctx = open_run(dir.path / "run", std::nullopt);
    CHECK(ctx.config.seed == 13);
}

TEST_CASE("full pipeline: idempotent stages, verify, determinism across runs") {
    testutil::temp_dir dir("pipeline");
    const auto write_cfg = [&](const std::filesystem::path & p) {
        write_file(p, kTinyConfig);
    };
    write_cfg(dir.path / "cfg.toml");

    const std::string base = " --config " + (dir.path / "cfg.toml").string();
    const std::string run1 = (dir.path / "run1").string();
    const std::string run2 = (dir.path / "run2").string();

    std::string err;
    CHECK(run_cli("all --run " + run1 + base, &err) == 0);
    CHECK(run_cli("verify --run " + run1, &err) == 0);

    // re-running a stage reuses artifacts and exits cleanly
    CHECK(run_cli("synth --run " + run1 + base, &err) == 0);
    CHECK(run_cli("prune --run " + run1 + base, &err) == 0);

    // dependency error from the binary: single-line, machine-parsable prefix
    const std::string run3 = (dir.path / "run3").string();
    CHECK(run_cli("prune --run " + run3 + base, &err) != 0);
    CHECK(err.rfind("gaprune: error: [dependency]", 0) == 0);
    CHECK(err.find('\n') == err.size() - 1);

    // byte-identical artifacts across two fresh runs of the full pipeline
    CHECK(run_cli("all --run " + run2 + base, &err) == 0);
    for (const char * rel : {
             "masks/dai_s50.mask",
             "masks/magnitude_s50.mask",
             "masks/random_s50.mask",
             "analysis/scores_dai.bin",
             "analysis/stats.bin",
             "checkpoints/dense.ckpt",
             "checkpoints/retrained_dai_s50.ckpt",
             "reports/report.txt",
             "reports/report.json",
             "reports/geometry.json",
             "reports/method_correlation.csv",
             "reports/layer_probe.csv",
         }) {
        INFO(rel);
        CHECK(read_file(std::filesystem::path(run1) / rel) ==
              read_file(std::filesystem::path(run2) / rel));
    }

    // corrupting a mask bit makes verify fail
    {
        const std::filesystem::path mask_path =
            std::filesystem::path(run1) / "masks/dai_s50.mask";
        std::string bytes = read_file(mask_path);
        bytes[bytes.size() - 1] = char(uint8_t(bytes[bytes.size() - 1]) ^ 0x01);
        write_file(mask_path, bytes);
    }
    CHECK(run_cli("verify --run " + run1, &err) != 0);
}

TEST_CASE("cli rejects bad invocations") {
    std::string err;
    CHECK(run_cli("synth", &err) != 0);                      // missing --run
    testutil::temp_dir dir("badflags");
    const std::string run = (dir.path / "r").string();
    CHECK(run_cli("analyze --run " + run, &err) != 0);       // no stages yet
    CHECK(err.rfind("gaprune: error: [", 0) == 0);
}
