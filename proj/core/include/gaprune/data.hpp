#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gaprune {

// Contrastive (query, positive, negative) text triple; the unit of all
// calibration and training data.
struct triplet_record {
    std::string query;
    std::string positive;
    std::string negative;
};

// JSONL, UTF-8, keys "query", "pos", "neg", one object per line.
std::vector<triplet_record> load_triplets(const std::filesystem::path & path);
void save_triplets(const std::filesystem::path & path, const std::vector<triplet_record> & recs);

enum class corpus_kind { general, domain };

struct corpus_spec {
    corpus_kind kind = corpus_kind::general;
    int64_t size = 512;
    uint64_t seed = 1;
    double overlap_ratio = 0.5;   // fraction of concept tokens shared between sides
    int64_t polysemy_tokens = 8;  // shared tokens reassigned to a different domain cluster
};

// The synthetic two-domain "world": a filler pool plus per-side concept token
// lists with cluster assignments. Derived only from (concept_vocab,
// overlap_ratio, polysemy_tokens) so that general and domain corpora built
// with different sampling seeds still agree on the shared structure.
struct concept_world {
    int64_t clusters = 0;
    std::vector<std::string> fillers;
    struct side_tokens {
        std::vector<std::string> tokens;
        std::vector<int64_t> cluster_of;
    };
    side_tokens general;
    side_tokens domain;
    std::vector<std::string> shared;   // tokens present on both sides
    std::vector<std::string> polysemy; // subset of shared with reassigned domain cluster
};

concept_world build_concept_world(int64_t concept_vocab, double overlap_ratio,
                                  int64_t polysemy_tokens);

struct labeled_triplet {
    triplet_record record;
    int64_t cluster = 0; // the query's concept cluster on the generating side
};

std::vector<labeled_triplet> synth_labeled_corpus(const corpus_spec & spec, int64_t concept_vocab);
std::vector<triplet_record> synth_corpus(const corpus_spec & spec, int64_t concept_vocab);

// Desk-scale evaluation fixtures, all generated on the spec's side of the
// world. gold_overlap controls how many of the query's concept tokens repeat
// verbatim in its gold document (0 = cluster-mates only, no lexical overlap).
struct retrieval_fixture {
    std::vector<std::string> queries;
    std::vector<int64_t> gold; // index into docs, one per query
    std::vector<std::string> docs;
};

struct classification_fixture {
    std::vector<std::string> texts;
    std::vector<int64_t> labels;
};

struct sts_fixture {
    std::vector<std::string> first;
    std::vector<std::string> second;
    std::vector<double> gold;
};

retrieval_fixture make_retrieval_fixture(const corpus_spec & spec, int64_t concept_vocab,
                                         int64_t num_queries, int64_t gold_overlap);
classification_fixture make_classification_fixture(const corpus_spec & spec,
                                                   int64_t concept_vocab, int64_t per_cluster);
sts_fixture make_sts_fixture(const corpus_spec & spec, int64_t concept_vocab, int64_t pairs);

void save_retrieval_fixture(const std::filesystem::path &, const retrieval_fixture &);
retrieval_fixture load_retrieval_fixture(const std::filesystem::path &);
void save_classification_fixture(const std::filesystem::path &, const classification_fixture &);
classification_fixture load_classification_fixture(const std::filesystem::path &);
void save_sts_fixture(const std::filesystem::path &, const sts_fixture &);
sts_fixture load_sts_fixture(const std::filesystem::path &);

} // namespace gaprune
