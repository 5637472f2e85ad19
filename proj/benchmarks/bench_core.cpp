#include "gaprune/analysis.hpp"
#include "gaprune/data.hpp"
#include "gaprune/encoder.hpp"
#include "gaprune/evalgeom.hpp"
#include "gaprune/kmeans.hpp"
#include "gaprune/objective.hpp"
#include "gaprune/rng.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace gaprune;

encoder_config bench_encoder_config() {
    encoder_config cfg;
    cfg.vocab_size = 2048;
    cfg.embed_dim = 32;
    cfg.num_layers = 3;
    cfg.hidden_dim = 64;
    cfg.max_tokens = 16;
    cfg.seed = 1;
    return cfg;
}

std::vector<triplet_record> bench_corpus(int64_t size) {
    corpus_spec spec;
    spec.kind = corpus_kind::domain;
    spec.size = size;
    spec.seed = 2;
    spec.overlap_ratio = 0.5;
    spec.polysemy_tokens = 8;
    return synth_corpus(spec, 96);
}

void BM_encode(benchmark::State & state) {
    const param_registry reg = init_encoder(bench_encoder_config());
    const std::vector<int64_t> tokens = {5, 17, 99, 256, 1023, 7, 64, 2};
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode(reg, tokens));
    }
}
BENCHMARK(BM_encode);

void BM_triplet_gradient(benchmark::State & state) {
    const param_registry reg = init_encoder(bench_encoder_config());
    const std::vector<triplet_record> corpus = bench_corpus(4);
    const infonce_config nce{0.05, false};
    size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(triplet_gradient(reg, corpus[i++ % corpus.size()], nce));
    }
}
BENCHMARK(BM_triplet_gradient);

void BM_kmeans_sample(benchmark::State & state) {
    rng r(3);
    std::vector<tensor> embs;
    for (int i = 0; i < 512; ++i) {
        tensor t = tensor::zeros({32});
        for (double & v : t.values) {
            v = r.normal();
        }
        embs.push_back(std::move(t));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(kmeans_sample(embs, state.range(0), 20, 7));
    }
}
BENCHMARK(BM_kmeans_sample)->Arg(32)->Arg(128);

void BM_dai_and_mask(benchmark::State & state) {
    const param_registry reg = init_encoder(bench_encoder_config());
    grad_stats stats;
    stats.registry_fingerprint = registry_fingerprint(reg);
    rng r(5);
    for (size_t idx : reg.prunable_entry_indices()) {
        stats.names.push_back(reg.entries[idx].name);
        stats.shapes.push_back(reg.entries[idx].weights.shape);
    }
    for (stat_side side : {stat_side::general, stat_side::domain}) {
        side_stats & ss = stats.side(side);
        for (const auto & shape : stats.shapes) {
            tensor f = tensor::zeros(shape);
            tensor m = tensor::zeros(shape);
            for (size_t i = 0; i < f.values.size(); ++i) {
                const double g = r.normal();
                f.values[i] = g * g;
                m.values[i] = g;
            }
            ss.fisher.push_back(std::move(f));
            ss.mean_grad.push_back(std::move(m));
        }
        ss.sample_count = 128;
    }
    const dai_config cfg;
    for (auto _ : state) {
        const std::vector<tensor> align = alignment_scores(stats, cfg);
        const importance_map map = dai_scores(reg, stats, align, cfg);
        benchmark::DoNotOptimize(build_mask(map, 0.5));
    }
}
BENCHMARK(BM_dai_and_mask);

void BM_uniformity(benchmark::State & state) {
    rng r(9);
    std::vector<tensor> embs;
    for (int64_t i = 0; i < state.range(0); ++i) {
        tensor t = tensor::zeros({32});
        double n = 0.0;
        for (double & v : t.values) {
            v = r.normal();
            n += v * v;
        }
        n = std::sqrt(n);
        for (double & v : t.values) {
            v /= n;
        }
        embs.push_back(std::move(t));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(uniformity_loss(embs, 2.0, 1));
    }
}
BENCHMARK(BM_uniformity)->Arg(128)->Arg(512);

} // namespace

BENCHMARK_MAIN();
