#include "gaprune/data.hpp"
#include "gaprune/encoder.hpp"
#include "gaprune/errors.hpp"
#include "gaprune/io.hpp"
#include "gaprune/kmeans.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace gaprune;

namespace {

std::set<std::string> split_tokens(const std::string & text) {
    std::set<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        out.insert(tok);
    }
    return out;
}

// concept tokens of `text` on one side of the world, with their clusters
std::vector<int64_t> concept_clusters(const concept_world::side_tokens & side,
                                      const std::string & text) {
    std::vector<int64_t> out;
    const std::set<std::string> toks = split_tokens(text);
    for (size_t i = 0; i < side.tokens.size(); ++i) {
        if (toks.count(side.tokens[i])) {
            out.push_back(side.cluster_of[i]);
        }
    }
    return out;
}

int64_t shared_concept_tokens(const concept_world::side_tokens & side, const std::string & a,
                              const std::string & b) {
    const std::set<std::string> ta = split_tokens(a);
    const std::set<std::string> tb = split_tokens(b);
    int64_t n = 0;
    for (const std::string & tok : side.tokens) {
        if (ta.count(tok) && tb.count(tok)) {
            ++n;
        }
    }
    return n;
}

} // namespace

TEST_CASE("load_triplets parses well-formed JSONL in order") {
    testutil::temp_dir dir("triplets");
    const auto path = dir.path / "t.jsonl";
    write_file(path, R"({"query":"q1","pos":"p1","neg":"n1"}
{"query":"q2","pos":"p2","neg":"n2"}
{"query":"q3","pos":"p3","neg":"n3"}
)");
    const std::vector<triplet_record> recs = load_triplets(path);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].query == "q1");
    CHECK(recs[2].negative == "n3");
}

TEST_CASE("load_triplets reports the offending line") {
    testutil::temp_dir dir("badtriplets");
    const auto path = dir.path / "bad.jsonl";
    write_file(path, R"({"query":"q1","pos":"p1","neg":"n1"}
{"query":"q2","pos":"p2"}
)");
    try {
        load_triplets(path);
        FAIL("expected parse_error");
    } catch (const parse_error & e) {
        const std::string msg = e.what();
        CHECK(msg.find(":2") != std::string::npos);
        CHECK(msg.find("neg") != std::string::npos);
    }

    write_file(path, "");
    CHECK_THROWS_AS(load_triplets(path), parse_error);
}

TEST_CASE("triplet save/load round-trip preserves strings byte-exactly") {
    testutil::temp_dir dir("roundtrip");
    const std::vector<triplet_record> recs = {
        {"query with  spaces", "positive \"quoted\"", "negative\ttabbed"},
        {"unicode \xc3\xa9", "b", "c"},
    };
    const auto path = dir.path / "rt.jsonl";
    save_triplets(path, recs);
    const std::vector<triplet_record> loaded = load_triplets(path);
    REQUIRE(loaded.size() == recs.size());
    for (size_t i = 0; i < recs.size(); ++i) {
        CHECK(loaded[i].query == recs[i].query);
        CHECK(loaded[i].positive == recs[i].positive);
        CHECK(loaded[i].negative == recs[i].negative);
    }
}

TEST_CASE("synth_corpus is deterministic and respects the concept contract") {
    corpus_spec spec;
    spec.kind = corpus_kind::domain;
    spec.size = 64;
    spec.seed = 5;
    spec.overlap_ratio = 0.5;
    spec.polysemy_tokens = 4;
    const int64_t vocab = 48;

    const std::vector<triplet_record> a = synth_corpus(spec, vocab);
    const std::vector<triplet_record> b = synth_corpus(spec, vocab);
    REQUIRE(a.size() == 64);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].query == b[i].query);
        CHECK(a[i].positive == b[i].positive);
        CHECK(a[i].negative == b[i].negative);
    }

    const concept_world w = build_concept_world(vocab, spec.overlap_ratio, spec.polysemy_tokens);
    for (const triplet_record & rec : a) {
        CHECK(shared_concept_tokens(w.domain, rec.query, rec.positive) >= 1);
        CHECK(shared_concept_tokens(w.domain, rec.query, rec.negative) == 0);

        // label consistency: positives nearer the query than negatives under
        // the generating concept metric
        CHECK(shared_concept_tokens(w.domain, rec.query, rec.positive) >
              shared_concept_tokens(w.domain, rec.query, rec.negative));

        // negatives come from a different cluster
        const std::vector<int64_t> qc = concept_clusters(w.domain, rec.query);
        const std::vector<int64_t> nc = concept_clusters(w.domain, rec.negative);
        REQUIRE(!qc.empty());
        REQUIRE(!nc.empty());
        for (int64_t c : nc) {
            CHECK(c != qc[0]);
        }
    }
}

TEST_CASE("world overlap and polysemy accounting") {
    const int64_t vocab = 40;

    const concept_world disjoint = build_concept_world(vocab, 0.0, 0);
    std::set<std::string> gen(disjoint.general.tokens.begin(), disjoint.general.tokens.end());
    for (const std::string & tok : disjoint.domain.tokens) {
        CHECK(gen.count(tok) == 0);
    }
    CHECK(disjoint.shared.empty());

    const concept_world half = build_concept_world(vocab, 0.5, 3);
    CHECK(int64_t(half.shared.size()) == int64_t(std::ceil(0.5 * double(vocab))));
    CHECK(half.polysemy.size() == 3);
    // polysemy tokens sit in different clusters on the two sides
    for (const std::string & tok : half.polysemy) {
        int64_t cg = -1, cd = -1;
        for (size_t i = 0; i < half.general.tokens.size(); ++i) {
            if (half.general.tokens[i] == tok) {
                cg = half.general.cluster_of[i];
            }
        }
        for (size_t i = 0; i < half.domain.tokens.size(); ++i) {
            if (half.domain.tokens[i] == tok) {
                cd = half.domain.cluster_of[i];
            }
        }
        CHECK(cg >= 0);
        CHECK(cd >= 0);
        CHECK(cg != cd);
    }

    CHECK_THROWS_AS(build_concept_world(vocab, 0.0, 1), argument_error);
}

TEST_CASE("kmeans_sample selects every point when k == n") {
    std::vector<tensor> pts;
    gaprune::rng r(3);
    for (int i = 0; i < 8; ++i) {
        pts.push_back(testutil::random_tensor({3}, r));
    }
    const sample_selection sel = kmeans_sample(pts, 8, 5, 1);
    std::set<int64_t> got(sel.indices.begin(), sel.indices.end());
    CHECK(got.size() == 8);
}

TEST_CASE("kmeans_sample with one centroid picks the point nearest the mean") {
    const std::vector<tensor> pts = {tensor::row({0.0}), tensor::row({1.0}),
                                     tensor::row({10.0})};
    // centroid converges to the grand mean 11/3; nearest point is index 1
    for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        const sample_selection sel = kmeans_sample(pts, 1, 20, seed);
        REQUIRE(sel.indices.size() == 1);
        CHECK(sel.indices[0] == 1);
    }
}

TEST_CASE("kmeans_sample selection matches an exhaustive nearest scan") {
    gaprune::rng r(11);
    std::vector<tensor> pts;
    for (int i = 0; i < 40; ++i) {
        pts.push_back(testutil::random_tensor({4}, r));
    }
    const int64_t k = 12, iters = 20;
    const uint64_t seed = 7;
    const sample_selection sel = kmeans_sample(pts, k, iters, seed);
    REQUIRE(int64_t(sel.indices.size()) == k);
    std::set<int64_t> distinct(sel.indices.begin(), sel.indices.end());
    CHECK(int64_t(distinct.size()) == k);

    // determinism
    const sample_selection again = kmeans_sample(pts, k, iters, seed);
    CHECK(sel.indices == again.indices);

    CHECK_THROWS_AS(kmeans_sample(pts, 41, 20, 1), argument_error);
    CHECK_THROWS_AS(kmeans_sample(pts, 5, 0, 1), argument_error);
}

TEST_CASE("kmeans_sample covers well-separated clusters") {
    // 4 tight clusters at the corners of a square, 6 points each
    std::vector<tensor> pts;
    gaprune::rng r(21);
    const double centers[4][2] = {{0, 0}, {0, 50}, {50, 0}, {50, 50}};
    for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 6; ++i) {
            pts.push_back(tensor::row({centers[c][0] + r.normal(0.0, 0.5),
                                       centers[c][1] + r.normal(0.0, 0.5)}));
        }
    }
    for (uint64_t seed : {1ull, 9ull, 33ull}) {
        const sample_selection sel = kmeans_sample(pts, 4, 20, seed);
        std::set<int64_t> covered;
        for (int64_t idx : sel.indices) {
            covered.insert(idx / 6);
        }
        CHECK(covered.size() == 4);
    }
}

TEST_CASE("selection file round-trip") {
    testutil::temp_dir dir("sel");
    sample_selection sel;
    sel.k = 3;
    sel.iterations = 20;
    sel.seed = 42;
    sel.indices = {5, 1, 9};
    const auto path = dir.path / "sel.json";
    save_selection(path, sel);
    const sample_selection loaded = load_selection(path);
    CHECK(loaded.k == sel.k);
    CHECK(loaded.iterations == sel.iterations);
    CHECK(loaded.seed == sel.seed);
    CHECK(loaded.indices == sel.indices);
}

TEST_CASE("embed_queries embeds one query per record in order") {
    const param_registry reg = init_encoder(testutil::tiny_encoder_config());
    std::vector<triplet_record> recs = {
        {"alpha beta", "p", "n"},
        {"gamma", "p", "n"},
        {"alpha beta", "p", "n"},
    };
    const std::vector<tensor> embs = embed_queries(reg, recs);
    REQUIRE(embs.size() == recs.size());
    CHECK(embs[0].values == embs[2].values);
    CHECK(embs[0].values != embs[1].values);
    for (const tensor & e : embs) {
        double n = 0.0;
        for (double v : e.values) {
            n += v * v;
        }
        CHECK(std::fabs(std::sqrt(n) - 1.0) < 1e-9);
    }
}

TEST_CASE("eval fixtures are generated on the requested side") {
    corpus_spec spec;
    spec.kind = corpus_kind::domain;
    spec.seed = 13;
    spec.overlap_ratio = 0.25;
    spec.polysemy_tokens = 2;
    const int64_t vocab = 64;

    const retrieval_fixture retr = make_retrieval_fixture(spec, vocab, 10, 0);
    REQUIRE(retr.queries.size() == 10);
    REQUIRE(retr.docs.size() == 10);
    const concept_world w = build_concept_world(vocab, spec.overlap_ratio, spec.polysemy_tokens);
    for (size_t i = 0; i < retr.queries.size(); ++i) {
        // gold_overlap = 0: same cluster, zero lexical overlap on concept tokens
        CHECK(shared_concept_tokens(w.domain, retr.queries[i], retr.docs[size_t(retr.gold[i])]) ==
              0);
        const std::vector<int64_t> qc = concept_clusters(w.domain, retr.queries[i]);
        const std::vector<int64_t> dc =
            concept_clusters(w.domain, retr.docs[size_t(retr.gold[i])]);
        REQUIRE(!qc.empty());
        REQUIRE(!dc.empty());
        CHECK(qc[0] == dc[0]);
    }

    const classification_fixture cls = make_classification_fixture(spec, vocab, 4);
    CHECK(cls.texts.size() == cls.labels.size());
    CHECK(cls.texts.size() == size_t(4 * w.clusters));

    const sts_fixture sts = make_sts_fixture(spec, vocab, 12);
    REQUIRE(sts.first.size() == 12);
    std::set<double> grades(sts.gold.begin(), sts.gold.end());
    CHECK(grades.size() == 4);

    // fixture round-trips
    testutil::temp_dir dir("fixtures");
    save_retrieval_fixture(dir.path / "r.jsonl", retr);
    const retrieval_fixture retr2 = load_retrieval_fixture(dir.path / "r.jsonl");
    CHECK(retr2.queries == retr.queries);
    CHECK(retr2.gold == retr.gold);
    CHECK(retr2.docs == retr.docs);
    save_classification_fixture(dir.path / "c.jsonl", cls);
    const classification_fixture cls2 = load_classification_fixture(dir.path / "c.jsonl");
    CHECK(cls2.texts == cls.texts);
    CHECK(cls2.labels == cls.labels);
    save_sts_fixture(dir.path / "s.jsonl", sts);
    const sts_fixture sts2 = load_sts_fixture(dir.path / "s.jsonl");
    CHECK(sts2.first == sts.first);
    CHECK(sts2.gold == sts.gold);
}
