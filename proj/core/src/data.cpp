#include "gaprune/data.hpp"

#include "gaprune/errors.hpp"
#include "gaprune/io.hpp"
#include "gaprune/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gaprune {

using nlohmann::json;

std::vector<triplet_record> load_triplets(const std::filesystem::path & path) {
    const std::string bytes = read_file(path);
    std::vector<triplet_record> out;
    std::istringstream in(bytes);
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception & e) {
            throw parse_error(path.string() + ":" + std::to_string(lineno) +
                              ": invalid JSON: " + e.what());
        }
        triplet_record rec;
        for (const char * key : {"query", "pos", "neg"}) {
            if (!j.contains(key) || !j[key].is_string()) {
                throw parse_error(path.string() + ":" + std::to_string(lineno) +
                                  ": missing string key \"" + key + "\"");
            }
        }
        rec.query    = j["query"].get<std::string>();
        rec.positive = j["pos"].get<std::string>();
        rec.negative = j["neg"].get<std::string>();
        if (rec.query.empty() || rec.positive.empty() || rec.negative.empty()) {
            throw parse_error(path.string() + ":" + std::to_string(lineno) +
                              ": empty field in triplet");
        }
        out.push_back(std::move(rec));
    }
    if (out.empty()) {
        throw parse_error(path.string() + ": empty triplet dataset");
    }
    return out;
}

void save_triplets(const std::filesystem::path & path, const std::vector<triplet_record> & recs) {
    std::string out;
    for (const auto & r : recs) {
        json j;
        j["query"] = r.query;
        j["pos"]   = r.positive;
        j["neg"]   = r.negative;
        out += j.dump();
        out.push_back('\n');
    }
    write_file(path, out);
}

namespace {

// deterministic pronounceable pseudoword for index i (base-70 cv syllables)
std::string pseudoword(int64_t i) {
    static const char consonants[] = "bdfgklmnprstvz";
    static const char vowels[]     = "aeiou";
    std::string w;
    int64_t rest = i;
    for (int s = 0; s < 3; ++s) {
        const int64_t syl = rest % 70;
        rest /= 70;
        w.push_back(consonants[syl / 5]);
        w.push_back(vowels[syl % 5]);
    }
    return w;
}

constexpr int64_t kFillerCount  = 48;
constexpr int64_t kFillerBase   = 0;
constexpr int64_t kGeneralBase  = 1000;
constexpr int64_t kDomainBase   = 200000;

int64_t cluster_count_for(int64_t concept_vocab) {
    return std::max<int64_t>(2, std::min<int64_t>(12, concept_vocab / 8));
}

std::vector<std::string> cluster_members(const concept_world::side_tokens & side, int64_t c) {
    std::vector<std::string> out;
    for (size_t i = 0; i < side.tokens.size(); ++i) {
        if (side.cluster_of[i] == c) {
            out.push_back(side.tokens[i]);
        }
    }
    return out;
}

std::string join_shuffled(std::vector<std::string> tokens, rng & r) {
    // deterministic Fisher-Yates
    for (size_t i = tokens.size(); i > 1; --i) {
        std::swap(tokens[i - 1], tokens[size_t(r.below(i))]);
    }
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

const concept_world::side_tokens & side_for(const concept_world & w, corpus_kind k) {
    return k == corpus_kind::general ? w.general : w.domain;
}

} // namespace

concept_world build_concept_world(int64_t concept_vocab, double overlap_ratio,
                                  int64_t polysemy_tokens) {
    if (concept_vocab < 4) {
        throw argument_error("concept vocab too small: " + std::to_string(concept_vocab));
    }
    if (overlap_ratio < 0.0 || overlap_ratio > 1.0) {
        throw argument_error("overlap_ratio must be in [0,1]");
    }
    const int64_t shared_count = int64_t(std::ceil(overlap_ratio * double(concept_vocab)));
    if (polysemy_tokens < 0 || polysemy_tokens > shared_count) {
        throw argument_error("polysemy_tokens (" + std::to_string(polysemy_tokens) +
                             ") must not exceed shared token count (" +
                             std::to_string(shared_count) + ")");
    }

    concept_world w;
    w.clusters = cluster_count_for(concept_vocab);
    for (int64_t i = 0; i < kFillerCount; ++i) {
        w.fillers.push_back(pseudoword(kFillerBase + i));
    }

    for (int64_t i = 0; i < concept_vocab; ++i) {
        w.general.tokens.push_back(pseudoword(kGeneralBase + i));
        w.general.cluster_of.push_back(i % w.clusters);
    }

    // domain side: first `shared_count` tokens are the general ones, rest fresh
    for (int64_t i = 0; i < concept_vocab; ++i) {
        if (i < shared_count) {
            w.domain.tokens.push_back(w.general.tokens[size_t(i)]);
            w.shared.push_back(w.general.tokens[size_t(i)]);
            int64_t c = w.general.cluster_of[size_t(i)];
            if (i < polysemy_tokens) {
                // same token, different meaning on the domain side
                c = (c + 1 + (i % (w.clusters - 1))) % w.clusters;
                w.polysemy.push_back(w.general.tokens[size_t(i)]);
            }
            w.domain.cluster_of.push_back(c);
        } else {
            w.domain.tokens.push_back(pseudoword(kDomainBase + i));
            w.domain.cluster_of.push_back(i % w.clusters);
        }
    }
    return w;
}

std::vector<labeled_triplet> synth_labeled_corpus(const corpus_spec & spec,
                                                  int64_t concept_vocab) {
    if (spec.size < 1) {
        throw argument_error("corpus size must be >= 1");
    }
    const concept_world w = build_concept_world(concept_vocab, spec.overlap_ratio,
                                                spec.polysemy_tokens);
    const concept_world::side_tokens & side = side_for(w, spec.kind);
    rng r(spec.seed);

    std::vector<labeled_triplet> out;
    out.reserve(size_t(spec.size));
    for (int64_t i = 0; i < spec.size; ++i) {
        const int64_t c     = int64_t(r.below(uint64_t(w.clusters)));
        int64_t c_neg       = int64_t(r.below(uint64_t(w.clusters - 1)));
        if (c_neg >= c) {
            ++c_neg;
        }
        const std::vector<std::string> pos_pool = cluster_members(side, c);
        const std::vector<std::string> neg_pool = cluster_members(side, c_neg);
        if (pos_pool.size() < 2 || neg_pool.size() < 2) {
            throw argument_error("concept vocab too small for cluster sampling");
        }

        const size_t a  = size_t(r.below(pos_pool.size()));
        size_t b        = size_t(r.below(pos_pool.size() - 1));
        if (b >= a) ++b;
        size_t p2       = size_t(r.below(pos_pool.size() - 1));
        if (p2 >= a) ++p2;
        const size_t n1 = size_t(r.below(neg_pool.size()));
        size_t n2       = size_t(r.below(neg_pool.size() - 1));
        if (n2 >= n1) ++n2;

        auto filler = [&]() { return w.fillers[size_t(r.below(w.fillers.size()))]; };

        labeled_triplet lt;
        lt.cluster = c;
        lt.record.query    = join_shuffled({pos_pool[a], pos_pool[b], filler(), filler()}, r);
        lt.record.positive = join_shuffled({pos_pool[a], pos_pool[p2], filler(), filler()}, r);
        lt.record.negative = join_shuffled({neg_pool[n1], neg_pool[n2], filler(), filler()}, r);
        out.push_back(std::move(lt));
    }
    return out;
}

std::vector<triplet_record> synth_corpus(const corpus_spec & spec, int64_t concept_vocab) {
    std::vector<triplet_record> out;
    for (auto & lt : synth_labeled_corpus(spec, concept_vocab)) {
        out.push_back(std::move(lt.record));
    }
    return out;
}

retrieval_fixture make_retrieval_fixture(const corpus_spec & spec, int64_t concept_vocab,
                                         int64_t num_queries, int64_t gold_overlap) {
    if (num_queries < 1) {
        throw argument_error("num_queries must be >= 1");
    }
    if (gold_overlap < 0 || gold_overlap > 2) {
        throw argument_error("gold_overlap must be in {0, 1, 2}");
    }
    const concept_world w = build_concept_world(concept_vocab, spec.overlap_ratio,
                                                spec.polysemy_tokens);
    const concept_world::side_tokens & side = side_for(w, spec.kind);
    rng r(spec.seed ^ 0x5274764654495845ull);

    retrieval_fixture fx;
    for (int64_t i = 0; i < num_queries; ++i) {
        const int64_t c = int64_t(r.below(uint64_t(w.clusters)));
        std::vector<std::string> pool = cluster_members(side, c);
        if (int64_t(pool.size()) < 2 + (3 - gold_overlap)) {
            throw argument_error("concept vocab too small for retrieval fixture");
        }
        // deterministic partial shuffle, then carve query/doc tokens from the front
        for (size_t j = pool.size(); j > 1; --j) {
            std::swap(pool[j - 1], pool[size_t(r.below(j))]);
        }
        auto filler = [&]() { return w.fillers[size_t(r.below(w.fillers.size()))]; };
        std::vector<std::string> q_tokens = {pool[0], pool[1], filler(), filler()};
        std::vector<std::string> d_tokens;
        for (int64_t g = 0; g < gold_overlap; ++g) {
            d_tokens.push_back(pool[size_t(g)]); // repeat query tokens verbatim
        }
        for (size_t j = 2; d_tokens.size() < 3; ++j) {
            d_tokens.push_back(pool[j]); // cluster-mates not in the query
        }
        d_tokens.push_back(filler());
        fx.queries.push_back(join_shuffled(std::move(q_tokens), r));
        fx.gold.push_back(int64_t(fx.docs.size()));
        fx.docs.push_back(join_shuffled(std::move(d_tokens), r));
    }
    return fx;
}

classification_fixture make_classification_fixture(const corpus_spec & spec,
                                                   int64_t concept_vocab, int64_t per_cluster) {
    if (per_cluster < 2) {
        throw argument_error("per_cluster must be >= 2");
    }
    const concept_world w = build_concept_world(concept_vocab, spec.overlap_ratio,
                                                spec.polysemy_tokens);
    const concept_world::side_tokens & side = side_for(w, spec.kind);
    rng r(spec.seed ^ 0x434c415353494659ull);

    classification_fixture fx;
    for (int64_t c = 0; c < w.clusters; ++c) {
        const std::vector<std::string> pool = cluster_members(side, c);
        for (int64_t i = 0; i < per_cluster; ++i) {
            const size_t a = size_t(r.below(pool.size()));
            size_t b       = size_t(r.below(pool.size() - 1));
            if (b >= a) ++b;
            const std::string f = w.fillers[size_t(r.below(w.fillers.size()))];
            fx.texts.push_back(join_shuffled({pool[a], pool[b], f}, r));
            fx.labels.push_back(c);
        }
    }
    return fx;
}

sts_fixture make_sts_fixture(const corpus_spec & spec, int64_t concept_vocab, int64_t pairs) {
    if (pairs < 4) {
        throw argument_error("sts fixture needs >= 4 pairs");
    }
    const concept_world w = build_concept_world(concept_vocab, spec.overlap_ratio,
                                                spec.polysemy_tokens);
    const concept_world::side_tokens & side = side_for(w, spec.kind);
    rng r(spec.seed ^ 0x5354535f50414952ull);

    sts_fixture fx;
    for (int64_t i = 0; i < pairs; ++i) {
        const int64_t grade = i % 4; // 0: other cluster .. 3: two shared tokens
        const int64_t c = int64_t(r.below(uint64_t(w.clusters)));
        std::vector<std::string> pool = cluster_members(side, c);
        for (size_t j = pool.size(); j > 1; --j) {
            std::swap(pool[j - 1], pool[size_t(r.below(j))]);
        }
        auto filler = [&]() { return w.fillers[size_t(r.below(w.fillers.size()))]; };
        std::vector<std::string> a = {pool[0], pool[1], filler()};
        std::vector<std::string> b;
        switch (grade) {
            case 3: b = {pool[0], pool[1], filler()}; break;
            case 2: b = {pool[0], pool[2], filler()}; break;
            case 1: b = {pool[2], pool[3], filler()}; break;
            default: {
                int64_t c2 = int64_t(r.below(uint64_t(w.clusters - 1)));
                if (c2 >= c) ++c2;
                const std::vector<std::string> other = cluster_members(side, c2);
                b = {other[size_t(r.below(other.size()))],
                     other[size_t(r.below(other.size()))], filler()};
                break;
            }
        }
        fx.first.push_back(join_shuffled(std::move(a), r));
        fx.second.push_back(join_shuffled(std::move(b), r));
        fx.gold.push_back(double(grade));
    }
    return fx;
}

void save_retrieval_fixture(const std::filesystem::path & path, const retrieval_fixture & fx) {
    std::string out;
    for (size_t i = 0; i < fx.queries.size(); ++i) {
        json j;
        j["query"] = fx.queries[i];
        j["gold"]  = fx.gold[i];
        out += j.dump();
        out.push_back('\n');
    }
    for (const auto & d : fx.docs) {
        json j;
        j["doc"] = d;
        out += j.dump();
        out.push_back('\n');
    }
    write_file(path, out);
}

retrieval_fixture load_retrieval_fixture(const std::filesystem::path & path) {
    const std::string bytes = read_file(path);
    std::istringstream in(bytes);
    std::string line;
    retrieval_fixture fx;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception & e) {
            throw parse_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (j.contains("query")) {
            fx.queries.push_back(j.at("query").get<std::string>());
            fx.gold.push_back(j.at("gold").get<int64_t>());
        } else if (j.contains("doc")) {
            fx.docs.push_back(j.at("doc").get<std::string>());
        } else {
            throw parse_error(path.string() + ":" + std::to_string(lineno) +
                              ": expected query or doc record");
        }
    }
    return fx;
}

void save_classification_fixture(const std::filesystem::path & path,
                                 const classification_fixture & fx) {
    std::string out;
    for (size_t i = 0; i < fx.texts.size(); ++i) {
        json j;
        j["text"]  = fx.texts[i];
        j["label"] = fx.labels[i];
        out += j.dump();
        out.push_back('\n');
    }
    write_file(path, out);
}

classification_fixture load_classification_fixture(const std::filesystem::path & path) {
    const std::string bytes = read_file(path);
    std::istringstream in(bytes);
    std::string line;
    classification_fixture fx;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            fx.texts.push_back(j.at("text").get<std::string>());
            fx.labels.push_back(j.at("label").get<int64_t>());
        } catch (const json::exception & e) {
            throw parse_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return fx;
}

void save_sts_fixture(const std::filesystem::path & path, const sts_fixture & fx) {
    std::string out;
    for (size_t i = 0; i < fx.first.size(); ++i) {
        json j;
        j["a"]     = fx.first[i];
        j["b"]     = fx.second[i];
        j["score"] = fx.gold[i];
        out += j.dump();
        out.push_back('\n');
    }
    write_file(path, out);
}

sts_fixture load_sts_fixture(const std::filesystem::path & path) {
    const std::string bytes = read_file(path);
    std::istringstream in(bytes);
    std::string line;
    sts_fixture fx;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            fx.first.push_back(j.at("a").get<std::string>());
            fx.second.push_back(j.at("b").get<std::string>());
            fx.gold.push_back(j.at("score").get<double>());
        } catch (const json::exception & e) {
            throw parse_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return fx;
}

} // namespace gaprune
