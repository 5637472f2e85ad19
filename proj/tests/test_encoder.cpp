#include "gaprune/checkpoint.hpp"
#include "gaprune/encoder.hpp"
#include "gaprune/errors.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace gaprune;
using testutil::manual_mask;
using testutil::tiny_encoder_config;

namespace {

double norm_of(const tensor & t) {
    double acc = 0.0;
    for (double v : t.values) {
        acc += v * v;
    }
    return std::sqrt(acc);
}

double cosine(const tensor & a, const tensor & b) {
    double dot = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
    }
    return dot / (norm_of(a) * norm_of(b));
}

bool registries_equal(const param_registry & a, const param_registry & b) {
    if (a.entries.size() != b.entries.size()) {
        return false;
    }
    for (size_t i = 0; i < a.entries.size(); ++i) {
        const auto & ea = a.entries[i];
        const auto & eb = b.entries[i];
        if (ea.name != eb.name || ea.layer_index != eb.layer_index || ea.role != eb.role ||
            ea.prunable != eb.prunable || ea.weights.shape != eb.weights.shape ||
            ea.weights.values != eb.weights.values) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("init_encoder is seeded and deterministic") {
    const encoder_config cfg = tiny_encoder_config();
    CHECK(registries_equal(init_encoder(cfg), init_encoder(cfg)));

    encoder_config other = cfg;
    other.seed = cfg.seed + 1;
    CHECK(!registries_equal(init_encoder(cfg), init_encoder(other)));
}

TEST_CASE("prunable element count is 2 * layers * embed * hidden") {
    encoder_config cfg = tiny_encoder_config();
    cfg.num_layers = 2;
    const param_registry reg = init_encoder(cfg);
    CHECK(reg.prunable_elem_count() == 4 * cfg.embed_dim * cfg.hidden_dim);

    // prunable exactly for mlp weight roles
    for (const auto & e : reg.entries) {
        const bool weight_role = e.role == param_role::mlp_in || e.role == param_role::mlp_out;
        CHECK(e.prunable == weight_role);
    }
}

TEST_CASE("config validation") {
    encoder_config cfg = tiny_encoder_config();
    cfg.hidden_dim = cfg.embed_dim - 1;
    CHECK_THROWS_AS(init_encoder(cfg), config_error);

    cfg = tiny_encoder_config();
    cfg.num_layers = 1;
    CHECK_THROWS_AS(init_encoder(cfg), config_error);

    cfg = tiny_encoder_config();
    cfg.vocab_size = 0;
    CHECK_THROWS_AS(init_encoder(cfg), config_error);
}

TEST_CASE("encode basics") {
    const param_registry reg = init_encoder(tiny_encoder_config());
    const std::vector<int64_t> tokens = {1, 7, 3};

    const encoder_output a = encode(reg, tokens);
    const encoder_output b = encode(reg, tokens);
    CHECK(a.embedding.values == b.embedding.values);
    CHECK(norm_of(a.embedding) > 1.0 - 1e-6);
    CHECK(norm_of(a.embedding) <= 1.0 + 1e-12);
    CHECK(cosine(a.embedding, b.embedding) == doctest::Approx(1.0).epsilon(1e-9));

    const std::vector<int64_t> oov = {1, 64};
    CHECK_THROWS_AS(encode(reg, oov), input_error);
    const std::vector<int64_t> too_long(10, 1);
    CHECK_THROWS_AS(encode(reg, too_long), argument_error);
    const std::vector<int64_t> empty;
    CHECK_THROWS_AS(encode(reg, empty), argument_error);
}

TEST_CASE("tokenize hashes into vocab and truncates") {
    const encoder_config cfg = tiny_encoder_config();
    const std::vector<int64_t> ids = tokenize("alpha beta gamma alpha", cfg);
    REQUIRE(ids.size() == 4);
    CHECK(ids[0] == ids[3]);
    for (int64_t id : ids) {
        CHECK(id >= 0);
        CHECK(id < cfg.vocab_size);
    }
    const std::vector<int64_t> truncated = tokenize("a b c d e f g h i", cfg);
    CHECK(int64_t(truncated.size()) == cfg.max_tokens);
}

TEST_CASE("embedding depends only on the multiset of final token states") {
    const param_registry reg = init_encoder(tiny_encoder_config());
    const std::vector<int64_t> tokens = {2, 9, 5, 11};
    const encoder_output out = encode(reg, tokens, /*capture=*/true);
    REQUIRE(out.final_tokens.has_value());
    const tensor & ft = *out.final_tokens;

    // re-pool the captured states in a permuted row order
    auto pool_rows = [&](const std::vector<int64_t> & order) {
        tensor mean = tensor::zeros({ft.cols()});
        for (int64_t r : order) {
            for (int64_t c = 0; c < ft.cols(); ++c) {
                mean.values[size_t(c)] += ft.at(r, c);
            }
        }
        for (double & v : mean.values) {
            v /= double(order.size());
        }
        const double n = norm_of(mean);
        for (double & v : mean.values) {
            v /= n + 1e-12;
        }
        return mean;
    };
    const tensor straight = pool_rows({0, 1, 2, 3});
    const tensor permuted = pool_rows({3, 0, 2, 1});
    for (size_t i = 0; i < straight.values.size(); ++i) {
        CHECK(std::fabs(straight.values[i] - out.embedding.values[i]) < 1e-12);
        CHECK(std::fabs(permuted.values[i] - out.embedding.values[i]) < 1e-12);
    }
}

TEST_CASE("encode_at_layer") {
    const param_registry reg = init_encoder(tiny_encoder_config());
    const std::vector<int64_t> tokens = {4, 8, 15};

    const tensor last = encode_at_layer(reg, tokens, reg.config.num_layers - 1);
    const encoder_output full = encode(reg, tokens);
    for (size_t i = 0; i < last.values.size(); ++i) {
        CHECK(std::fabs(last.values[i] - full.embedding.values[i]) < 1e-12);
    }

    for (int64_t l = 0; l < reg.config.num_layers; ++l) {
        CHECK(norm_of(encode_at_layer(reg, tokens, l)) == doctest::Approx(1.0).epsilon(1e-9));
    }

    CHECK_THROWS_AS(encode_at_layer(reg, tokens, -1), argument_error);
    CHECK_THROWS_AS(encode_at_layer(reg, tokens, reg.config.num_layers), argument_error);

    // layer 0 output must not depend on deeper layers' parameters
    param_registry perturbed = init_encoder(tiny_encoder_config());
    perturbed.find("layers.1.mlp_in.weight").weights.values[0] += 10.0;
    const tensor l0_a = encode_at_layer(reg, tokens, 0);
    const tensor l0_b = encode_at_layer(perturbed, tokens, 0);
    CHECK(l0_a.values == l0_b.values);
    const tensor l1_a = encode_at_layer(reg, tokens, 1);
    const tensor l1_b = encode_at_layer(perturbed, tokens, 1);
    CHECK(l1_a.values != l1_b.values);
}

TEST_CASE("apply_mask and measure_sparsity") {
    param_registry reg = init_encoder(tiny_encoder_config());
    CHECK(measure_sparsity(reg) == 0.0);

    const param_registry before = reg;
    apply_mask(reg, manual_mask(reg, [](size_t, size_t) { return 1; }));
    CHECK(registries_equal(reg, before));

    // every second element dropped
    param_registry half = init_encoder(tiny_encoder_config());
    const prune_mask hm = manual_mask(half, [](size_t, size_t i) { return uint8_t(i % 2); });
    apply_mask(half, hm);
    const int64_t d = half.prunable_elem_count();
    CHECK(measure_sparsity(half) == doctest::Approx(1.0 - double(hm.retained) / double(d))
                                        .epsilon(1e-15));

    // all-zero mask: prunables zeroed, everything else untouched
    param_registry zeroed = init_encoder(tiny_encoder_config());
    apply_mask(zeroed, manual_mask(zeroed, [](size_t, size_t) { return 0; }));
    CHECK(measure_sparsity(zeroed) == 1.0);
    for (size_t i = 0; i < zeroed.entries.size(); ++i) {
        if (zeroed.entries[i].prunable) {
            for (double v : zeroed.entries[i].weights.values) {
                CHECK(v == 0.0);
            }
        } else {
            CHECK(zeroed.entries[i].weights.values == before.entries[i].weights.values);
        }
    }

    // fingerprint mismatch
    encoder_config other_cfg = tiny_encoder_config();
    other_cfg.num_layers = 3;
    param_registry other = init_encoder(other_cfg);
    CHECK_THROWS_AS(apply_mask(other, hm), integrity_error);
}

TEST_CASE("checkpoint round-trip is bit-identical") {
    testutil::temp_dir dir("ckpt");
    const param_registry reg = init_encoder(tiny_encoder_config(77));
    const auto path = dir.path / "enc.ckpt";
    save_checkpoint(path, reg);
    const param_registry loaded = load_checkpoint(path);
    CHECK(registries_equal(reg, loaded));
    CHECK(registry_fingerprint(reg) == registry_fingerprint(loaded));

    // structure fingerprint ignores values: masking does not change it
    param_registry masked = reg;
    apply_mask(masked, manual_mask(masked, [](size_t, size_t i) { return uint8_t(i % 3 != 0); }));
    CHECK(registry_fingerprint(masked) == registry_fingerprint(reg));

    CHECK_THROWS_AS(load_checkpoint(dir.path / "missing.ckpt"), io_error);
}
