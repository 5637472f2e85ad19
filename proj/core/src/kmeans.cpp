#include "gaprune/kmeans.hpp"

#include "gaprune/errors.hpp"
#include "gaprune/io.hpp"
#include "gaprune/rng.hpp"

#include <json.hpp>

#include <limits>

namespace gaprune {

using nlohmann::json;

namespace {

double sq_dist(const double * a, const double * b, int64_t d) {
    double acc = 0.0;
    for (int64_t i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

} // namespace

sample_selection kmeans_sample(std::span<const tensor> embeddings, int64_t k,
                               int64_t iterations, uint64_t seed) {
    const int64_t n = int64_t(embeddings.size());
    if (k < 1 || k > n) {
        throw argument_error("kmeans_sample: k=" + std::to_string(k) + " outside [1, n=" +
                             std::to_string(n) + "]");
    }
    if (iterations < 1) {
        throw argument_error("kmeans_sample: iterations must be >= 1");
    }
    const int64_t d = embeddings[0].numel();
    for (const tensor & e : embeddings) {
        if (e.numel() != d) {
            throw shape_error("kmeans_sample: embedding dimension mismatch");
        }
    }

    // init: k distinct random points
    rng r(seed);
    std::vector<int64_t> perm(size_t(n), 0);
    for (int64_t i = 0; i < n; ++i) {
        perm[size_t(i)] = i;
    }
    for (size_t i = size_t(n); i > 1; --i) {
        std::swap(perm[i - 1], perm[size_t(r.below(i))]);
    }
    std::vector<double> centroids(size_t(k * d));
    for (int64_t c = 0; c < k; ++c) {
        const tensor & e = embeddings[size_t(perm[size_t(c)])];
        std::copy(e.values.begin(), e.values.end(), centroids.begin() + c * d);
    }

    std::vector<int64_t> assign(size_t(n), 0);
    std::vector<double> sums(size_t(k * d), 0.0);
    std::vector<int64_t> counts(size_t(k), 0);
    for (int64_t it = 0; it < iterations; ++it) {
        for (int64_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int64_t best_c = 0;
            for (int64_t c = 0; c < k; ++c) {
                const double dist = sq_dist(embeddings[size_t(i)].values.data(),
                                            centroids.data() + c * d, d);
                if (dist < best) {
                    best = dist;
                    best_c = c;
                }
            }
            assign[size_t(i)] = best_c;
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int64_t i = 0; i < n; ++i) {
            const int64_t c = assign[size_t(i)];
            ++counts[size_t(c)];
            const double * e = embeddings[size_t(i)].values.data();
            double * s = sums.data() + c * d;
            for (int64_t j = 0; j < d; ++j) {
                s[j] += e[j];
            }
        }
        for (int64_t c = 0; c < k; ++c) {
            if (counts[size_t(c)] == 0) {
                continue; // empty cluster keeps its centroid
            }
            for (int64_t j = 0; j < d; ++j) {
                centroids[size_t(c * d + j)] = sums[size_t(c * d + j)] / double(counts[size_t(c)]);
            }
        }
    }

    // nearest dataset point per centroid, deduplicated to the next-nearest
    // unselected point; ties break to the lowest index
    sample_selection sel;
    sel.k = k;
    sel.iterations = iterations;
    sel.seed = seed;
    std::vector<char> taken(size_t(n), 0);
    for (int64_t c = 0; c < k; ++c) {
        double best = std::numeric_limits<double>::infinity();
        int64_t best_i = -1;
        for (int64_t i = 0; i < n; ++i) {
            if (taken[size_t(i)]) {
                continue;
            }
            const double dist = sq_dist(embeddings[size_t(i)].values.data(),
                                        centroids.data() + c * d, d);
            if (dist < best) {
                best = dist;
                best_i = i;
            }
        }
        taken[size_t(best_i)] = 1;
        sel.indices.push_back(best_i);
    }
    return sel;
}

void save_selection(const std::filesystem::path & path, const sample_selection & sel) {
    json j;
    j["k"]          = sel.k;
    j["iterations"] = sel.iterations;
    j["seed"]       = sel.seed;
    j["indices"]    = sel.indices;
    write_file(path, j.dump() + "\n");
}

sample_selection load_selection(const std::filesystem::path & path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception & e) {
        throw parse_error(path.string() + ": " + e.what());
    }
    sample_selection sel;
    sel.k          = j.at("k").get<int64_t>();
    sel.iterations = j.at("iterations").get<int64_t>();
    sel.seed       = j.at("seed").get<uint64_t>();
    sel.indices    = j.at("indices").get<std::vector<int64_t>>();
    if (int64_t(sel.indices.size()) != sel.k) {
        throw integrity_error(path.string() + ": index count does not match k");
    }
    return sel;
}

std::vector<tensor> embed_queries(const param_registry & registry,
                                  std::span<const triplet_record> records) {
    encoder_session s(registry);
    std::vector<tensor> out;
    out.reserve(records.size());
    for (const triplet_record & rec : records) {
        out.push_back(s.t().value(s.embed_text(rec.query)));
    }
    return out;
}

} // namespace gaprune
