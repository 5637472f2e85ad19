#include "gaprune/config.hpp"

#include "gaprune/errors.hpp"
#include "gaprune/fnv.hpp"
#include "gaprune/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <map>

namespace gaprune {

using nlohmann::json;

uint64_t derive_seed(uint64_t master, std::string_view label) {
    return fnv1a64(label.data(), label.size(), master ^ 14695981039346656037ull);
}

void experiment_config::validate() const {
    encoder.validate();
    train.validate();
    retrain.validate();
    dai.validate();
    if (nce_temperature <= 0.0) {
        throw config_error("nce.temperature must be positive");
    }
    if (sparsities.empty()) {
        throw config_error("run.sparsities must not be empty");
    }
    for (double s : sparsities) {
        if (s < 0.0 || s >= 1.0) {
            throw config_error("sparsity " + std::to_string(s) + " outside [0, 1)");
        }
    }
    for (double s : retrain_sparsities) {
        if (std::find(sparsities.begin(), sparsities.end(), s) == sparsities.end()) {
            throw config_error("retrain sparsity " + std::to_string(s) +
                               " is not in run.sparsities");
        }
    }
    if (methods.empty()) {
        throw config_error("run.methods must not be empty");
    }
    if (corpus_size < 1 || concept_vocab < 16) {
        throw config_error("corpus.size must be >= 1 and corpus.concept_vocab >= 16");
    }
    if (overlap_ratio < 0.0 || overlap_ratio > 1.0) {
        throw config_error("corpus.overlap_ratio must be in [0, 1]");
    }
    if (sampling.k < 1 || sampling.k > corpus_size) {
        throw config_error("sampling.k must be in [1, corpus.size]");
    }
    if (sampling.iterations < 1) {
        throw config_error("sampling.iterations must be >= 1");
    }
    if (retrieval_queries < 2 || sts_pairs < 4 || classification_per_cluster < 2) {
        throw config_error("eval fixture sizes too small");
    }
    if (gold_overlap < 0 || gold_overlap > 2) {
        throw config_error("eval.gold_overlap must be in {0, 1, 2}");
    }
    if (knn_k < 1) {
        throw config_error("eval.knn_k must be >= 1");
    }
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw config_error("eval.train_fraction must be in (0, 1)");
    }
    if (geometry_sample < 2) {
        throw config_error("geometry.sample_size must be >= 2");
    }
}

infonce_config experiment_config::train_nce() const {
    return {nce_temperature, train_in_batch_negatives};
}

infonce_config experiment_config::analysis_nce() const {
    return {nce_temperature, false};
}

namespace {

struct raw_value {
    std::string text;
    std::string origin; // file:line for error messages
    bool consumed = false;
};

struct raw_config {
    std::map<std::string, raw_value> values;

    bool has(const std::string & key) const { return values.count(key) > 0; }

    const raw_value * take(const std::string & key) {
        auto it = values.find(key);
        if (it == values.end()) {
            return nullptr;
        }
        it->second.consumed = true;
        return &it->second;
    }
};

std::string trim(std::string_view s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

// strips a trailing comment that is not inside a quoted string
std::string strip_comment(const std::string & line) {
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') {
            in_str = !in_str;
        } else if (line[i] == '#' && !in_str) {
            return line.substr(0, i);
        }
    }
    return line;
}

raw_config tokenize_config(const std::string & text, const std::string & origin) {
    raw_config out;
    std::string section;
    size_t pos = 0;
    int64_t lineno = 0;
    while (pos <= text.size()) {
        const size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos
                                                                    : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) {
            continue;
        }
        const std::string at = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw parse_error(at + ": malformed section header");
            }
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty()) {
                throw parse_error(at + ": empty section name");
            }
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw parse_error(at + ": expected key = value");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw parse_error(at + ": expected key = value");
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (out.values.count(full)) {
            throw parse_error(at + ": duplicate key '" + full + "'");
        }
        out.values[full] = {value, at, false};
    }
    return out;
}

double parse_number(const raw_value & rv) {
    try {
        size_t used = 0;
        const double v = std::stod(rv.text, &used);
        if (used != rv.text.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return v;
    } catch (const std::exception &) {
        throw parse_error(rv.origin + ": expected a number, got '" + rv.text + "'");
    }
}

int64_t parse_int(const raw_value & rv) {
    const double v = parse_number(rv);
    const int64_t i = int64_t(v);
    if (double(i) != v) {
        throw parse_error(rv.origin + ": expected an integer, got '" + rv.text + "'");
    }
    return i;
}

uint64_t parse_u64(const raw_value & rv) {
    try {
        size_t used = 0;
        const uint64_t v = std::stoull(rv.text, &used);
        if (used != rv.text.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return v;
    } catch (const std::exception &) {
        throw parse_error(rv.origin + ": expected an unsigned integer, got '" + rv.text + "'");
    }
}

bool parse_bool(const raw_value & rv) {
    if (rv.text == "true") return true;
    if (rv.text == "false") return false;
    throw parse_error(rv.origin + ": expected true or false, got '" + rv.text + "'");
}

std::string parse_string(const raw_value & rv) {
    if (rv.text.size() < 2 || rv.text.front() != '"' || rv.text.back() != '"') {
        throw parse_error(rv.origin + ": expected a quoted string, got '" + rv.text + "'");
    }
    return rv.text.substr(1, rv.text.size() - 2);
}

std::vector<std::string> parse_array_items(const raw_value & rv) {
    if (rv.text.size() < 2 || rv.text.front() != '[' || rv.text.back() != ']') {
        throw parse_error(rv.origin + ": expected an array, got '" + rv.text + "'");
    }
    std::vector<std::string> items;
    std::string body = rv.text.substr(1, rv.text.size() - 2);
    size_t pos = 0;
    while (pos < body.size()) {
        size_t comma = body.find(',', pos);
        if (comma == std::string::npos) {
            comma = body.size();
        }
        const std::string item = trim(std::string_view(body).substr(pos, comma - pos));
        if (!item.empty()) {
            items.push_back(item);
        }
        pos = comma + 1;
    }
    return items;
}

} // namespace

experiment_config parse_config_text(const std::string & text, const std::string & origin) {
    raw_config raw = tokenize_config(text, origin);
    experiment_config cfg;

    auto take_int = [&](const char * key, int64_t & dst) {
        if (const raw_value * rv = raw.take(key)) dst = parse_int(*rv);
    };
    auto take_u64 = [&](const char * key, uint64_t & dst) {
        if (const raw_value * rv = raw.take(key)) dst = parse_u64(*rv);
    };
    auto take_double = [&](const char * key, double & dst) {
        if (const raw_value * rv = raw.take(key)) dst = parse_number(*rv);
    };
    auto take_bool = [&](const char * key, bool & dst) {
        if (const raw_value * rv = raw.take(key)) dst = parse_bool(*rv);
    };

    take_u64("run.seed", cfg.seed);
    if (const raw_value * rv = raw.take("run.sparsities")) {
        cfg.sparsities.clear();
        for (const std::string & item : parse_array_items(*rv)) {
            cfg.sparsities.push_back(parse_number({item, rv->origin, false}));
        }
    }
    if (const raw_value * rv = raw.take("run.retrain_sparsities")) {
        cfg.retrain_sparsities.clear();
        for (const std::string & item : parse_array_items(*rv)) {
            cfg.retrain_sparsities.push_back(parse_number({item, rv->origin, false}));
        }
    }
    if (const raw_value * rv = raw.take("run.methods")) {
        cfg.methods.clear();
        for (const std::string & item : parse_array_items(*rv)) {
            cfg.methods.push_back(method_from_name(parse_string({item, rv->origin, false})));
        }
    }

    take_int("encoder.vocab_size", cfg.encoder.vocab_size);
    take_int("encoder.embed_dim", cfg.encoder.embed_dim);
    take_int("encoder.num_layers", cfg.encoder.num_layers);
    take_int("encoder.hidden_dim", cfg.encoder.hidden_dim);
    take_int("encoder.max_tokens", cfg.encoder.max_tokens);

    take_int("corpus.size", cfg.corpus_size);
    take_int("corpus.concept_vocab", cfg.concept_vocab);
    take_double("corpus.overlap_ratio", cfg.overlap_ratio);
    take_int("corpus.polysemy_tokens", cfg.polysemy_tokens);

    take_int("eval.retrieval_queries", cfg.retrieval_queries);
    take_int("eval.gold_overlap", cfg.gold_overlap);
    take_int("eval.classification_per_cluster", cfg.classification_per_cluster);
    take_int("eval.sts_pairs", cfg.sts_pairs);
    take_int("eval.knn_k", cfg.knn_k);
    take_double("eval.train_fraction", cfg.train_fraction);

    take_int("sampling.k", cfg.sampling.k);
    take_int("sampling.iterations", cfg.sampling.iterations);

    take_double("nce.temperature", cfg.nce_temperature);
    take_bool("nce.train_in_batch_negatives", cfg.train_in_batch_negatives);

    take_int("train.steps", cfg.train.steps);
    take_int("train.batch_size", cfg.train.batch_size);
    take_double("train.learning_rate", cfg.train.learning_rate);
    take_double("train.adam_beta1", cfg.train.adam_beta1);
    take_double("train.adam_beta2", cfg.train.adam_beta2);
    take_double("train.adam_eps", cfg.train.adam_eps);

    take_int("retrain.steps", cfg.retrain.steps);
    take_int("retrain.batch_size", cfg.retrain.batch_size);
    take_double("retrain.learning_rate", cfg.retrain.learning_rate);
    take_double("retrain.adam_beta1", cfg.retrain.adam_beta1);
    take_double("retrain.adam_beta2", cfg.retrain.adam_beta2);
    take_double("retrain.adam_eps", cfg.retrain.adam_eps);

    take_double("dai.alpha", cfg.dai.alpha);
    take_double("dai.beta", cfg.dai.beta);
    take_double("dai.gamma", cfg.dai.gamma);
    take_double("dai.epsilon", cfg.dai.epsilon);
    if (const raw_value * rv = raw.take("dai.granularity")) {
        cfg.dai.granularity = granularity_from_name(parse_string(*rv));
    }

    take_int("geometry.sample_size", cfg.geometry_sample);
    take_double("geometry.t_param", cfg.geometry_t);
    take_double("geometry.power_param", cfg.geometry_power);

    for (const auto & [key, rv] : raw.values) {
        if (!rv.consumed) {
            throw config_error(rv.origin + ": unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

experiment_config load_config_file(const std::filesystem::path & path) {
    return parse_config_text(read_file(path), path.string());
}

std::string config_to_json(const experiment_config & cfg) {
    json j;
    j["run"] = {{"seed", cfg.seed},
                {"sparsities", cfg.sparsities},
                {"retrain_sparsities", cfg.retrain_sparsities}};
    std::vector<std::string> method_names;
    for (score_method m : cfg.methods) {
        method_names.emplace_back(method_name(m));
    }
    j["run"]["methods"] = method_names;
    j["encoder"] = {{"vocab_size", cfg.encoder.vocab_size},
                    {"embed_dim", cfg.encoder.embed_dim},
                    {"num_layers", cfg.encoder.num_layers},
                    {"hidden_dim", cfg.encoder.hidden_dim},
                    {"max_tokens", cfg.encoder.max_tokens}};
    j["corpus"] = {{"size", cfg.corpus_size},
                   {"concept_vocab", cfg.concept_vocab},
                   {"overlap_ratio", cfg.overlap_ratio},
                   {"polysemy_tokens", cfg.polysemy_tokens}};
    j["eval"] = {{"retrieval_queries", cfg.retrieval_queries},
                 {"gold_overlap", cfg.gold_overlap},
                 {"classification_per_cluster", cfg.classification_per_cluster},
                 {"sts_pairs", cfg.sts_pairs},
                 {"knn_k", cfg.knn_k},
                 {"train_fraction", cfg.train_fraction}};
    j["sampling"] = {{"k", cfg.sampling.k}, {"iterations", cfg.sampling.iterations}};
    j["nce"] = {{"temperature", cfg.nce_temperature},
                {"train_in_batch_negatives", cfg.train_in_batch_negatives}};
    auto train_json = [](const train_config & tc) {
        return json{{"steps", tc.steps},
                    {"batch_size", tc.batch_size},
                    {"learning_rate", tc.learning_rate},
                    {"adam_beta1", tc.adam_beta1},
                    {"adam_beta2", tc.adam_beta2},
                    {"adam_eps", tc.adam_eps}};
    };
    j["train"]   = train_json(cfg.train);
    j["retrain"] = train_json(cfg.retrain);
    j["dai"] = {{"alpha", cfg.dai.alpha},
                {"beta", cfg.dai.beta},
                {"gamma", cfg.dai.gamma},
                {"epsilon", cfg.dai.epsilon},
                {"granularity", granularity_name(cfg.dai.granularity)}};
    j["geometry"] = {{"sample_size", cfg.geometry_sample},
                     {"t_param", cfg.geometry_t},
                     {"power_param", cfg.geometry_power}};
    return j.dump();
}

experiment_config config_from_json(const std::string & json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception & e) {
        throw parse_error(std::string("config json: ") + e.what());
    }
    experiment_config cfg;
    cfg.seed = j.at("run").at("seed").get<uint64_t>();
    cfg.sparsities = j.at("run").at("sparsities").get<std::vector<double>>();
    cfg.retrain_sparsities = j.at("run").at("retrain_sparsities").get<std::vector<double>>();
    cfg.methods.clear();
    for (const std::string & name : j.at("run").at("methods").get<std::vector<std::string>>()) {
        cfg.methods.push_back(method_from_name(name));
    }
    const json & enc = j.at("encoder");
    cfg.encoder.vocab_size = enc.at("vocab_size").get<int64_t>();
    cfg.encoder.embed_dim  = enc.at("embed_dim").get<int64_t>();
    cfg.encoder.num_layers = enc.at("num_layers").get<int64_t>();
    cfg.encoder.hidden_dim = enc.at("hidden_dim").get<int64_t>();
    cfg.encoder.max_tokens = enc.at("max_tokens").get<int64_t>();
    const json & corpus = j.at("corpus");
    cfg.corpus_size     = corpus.at("size").get<int64_t>();
    cfg.concept_vocab   = corpus.at("concept_vocab").get<int64_t>();
    cfg.overlap_ratio   = corpus.at("overlap_ratio").get<double>();
    cfg.polysemy_tokens = corpus.at("polysemy_tokens").get<int64_t>();
    const json & ev = j.at("eval");
    cfg.retrieval_queries          = ev.at("retrieval_queries").get<int64_t>();
    cfg.gold_overlap               = ev.at("gold_overlap").get<int64_t>();
    cfg.classification_per_cluster = ev.at("classification_per_cluster").get<int64_t>();
    cfg.sts_pairs                  = ev.at("sts_pairs").get<int64_t>();
    cfg.knn_k                      = ev.at("knn_k").get<int64_t>();
    cfg.train_fraction             = ev.at("train_fraction").get<double>();
    cfg.sampling.k          = j.at("sampling").at("k").get<int64_t>();
    cfg.sampling.iterations = j.at("sampling").at("iterations").get<int64_t>();
    cfg.nce_temperature          = j.at("nce").at("temperature").get<double>();
    cfg.train_in_batch_negatives = j.at("nce").at("train_in_batch_negatives").get<bool>();
    auto train_from = [](const json & jt, train_config & tc) {
        tc.steps         = jt.at("steps").get<int64_t>();
        tc.batch_size    = jt.at("batch_size").get<int64_t>();
        tc.learning_rate = jt.at("learning_rate").get<double>();
        tc.adam_beta1    = jt.at("adam_beta1").get<double>();
        tc.adam_beta2    = jt.at("adam_beta2").get<double>();
        tc.adam_eps      = jt.at("adam_eps").get<double>();
    };
    train_from(j.at("train"), cfg.train);
    train_from(j.at("retrain"), cfg.retrain);
    const json & dai = j.at("dai");
    cfg.dai.alpha       = dai.at("alpha").get<double>();
    cfg.dai.beta        = dai.at("beta").get<double>();
    cfg.dai.gamma       = dai.at("gamma").get<double>();
    cfg.dai.epsilon     = dai.at("epsilon").get<double>();
    cfg.dai.granularity = granularity_from_name(dai.at("granularity").get<std::string>());
    const json & geom = j.at("geometry");
    cfg.geometry_sample = geom.at("sample_size").get<int64_t>();
    cfg.geometry_t      = geom.at("t_param").get<double>();
    cfg.geometry_power  = geom.at("power_param").get<double>();
    cfg.validate();
    return cfg;
}

} // namespace gaprune
