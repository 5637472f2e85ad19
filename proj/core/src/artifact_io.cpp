#include "gaprune/artifact_io.hpp"

#include "gaprune/errors.hpp"
#include "gaprune/io.hpp"

#include <json.hpp>

namespace gaprune {

using nlohmann::json;

namespace {

json parse_header(const std::string & bytes, const std::filesystem::path & path,
                  const char * expected_kind, size_t & payload_start) {
    const size_t nl = bytes.find('\n');
    if (nl == std::string::npos) {
        throw parse_error(path.string() + ": missing header line");
    }
    json header;
    try {
        header = json::parse(bytes.substr(0, nl));
    } catch (const json::exception & e) {
        throw parse_error(path.string() + ": bad header: " + e.what());
    }
    if (header.value("kind", "") != expected_kind) {
        throw parse_error(path.string() + ": expected kind '" + expected_kind + "', got '" +
                          header.value("kind", "") + "'");
    }
    payload_start = nl + 1;
    return header;
}

uint64_t parse_fingerprint(const json & header, const std::filesystem::path & path) {
    const std::string hex = header.at("registry_fingerprint").get<std::string>();
    if (hex.size() != 16) {
        throw parse_error(path.string() + ": malformed fingerprint");
    }
    return std::stoull(hex, nullptr, 16);
}

void write_scores_like(const std::filesystem::path & path, const char * kind,
                       const std::string & method, const std::string & config_json,
                       const std::vector<std::string> & names,
                       std::span<const tensor> tensors, uint64_t fingerprint) {
    json header;
    header["kind"]    = kind;
    header["version"] = 1;
    header["method"]  = method;
    header["config"]  = config_json.empty() ? json::object() : json::parse(config_json);
    header["registry_fingerprint"] = fingerprint_hex(fingerprint);
    json manifest = json::array();
    int64_t offset = 0;
    for (size_t t = 0; t < tensors.size(); ++t) {
        manifest.push_back({{"name", names[t]},
                            {"shape", tensors[t].shape},
                            {"offset", offset}});
        offset += tensors[t].numel() * 8;
    }
    header["tensors"] = std::move(manifest);

    std::string out = header.dump();
    out.push_back('\n');
    for (const tensor & t : tensors) {
        append_f64_le(out, t.values);
    }
    write_file(path, out);
}

struct scores_like {
    std::string method;
    std::string config_json;
    std::vector<std::string> names;
    std::vector<tensor> tensors;
    uint64_t fingerprint = 0;
};

scores_like read_scores_like(const std::filesystem::path & path, const char * kind) {
    const std::string bytes = read_file(path);
    size_t payload_start = 0;
    const json header = parse_header(bytes, path, kind, payload_start);

    scores_like out;
    out.method      = header.at("method").get<std::string>();
    out.config_json = header.at("config").dump();
    out.fingerprint = parse_fingerprint(header, path);
    for (const json & jt : header.at("tensors")) {
        const std::vector<int64_t> shape = jt.at("shape").get<std::vector<int64_t>>();
        const int64_t n = shape_numel(shape);
        const size_t offset = payload_start + size_t(jt.at("offset").get<int64_t>());
        if (offset + size_t(n) * 8 > bytes.size()) {
            throw integrity_error(path.string() + ": payload truncated");
        }
        out.names.push_back(jt.at("name").get<std::string>());
        out.tensors.emplace_back(shape, read_f64_le(bytes, offset, size_t(n)));
    }
    return out;
}

} // namespace

void save_scores(const std::filesystem::path & path, const importance_map & map) {
    write_scores_like(path, "gaprune-scores", method_name(map.method), map.config_json,
                      map.names, map.scores, map.registry_fingerprint);
}

importance_map load_scores(const std::filesystem::path & path) {
    scores_like raw = read_scores_like(path, "gaprune-scores");
    importance_map map;
    map.method = method_from_name(raw.method);
    map.config_json = raw.config_json;
    map.names = std::move(raw.names);
    for (const tensor & t : raw.tensors) {
        map.shapes.push_back(t.shape);
    }
    map.scores = std::move(raw.tensors);
    map.registry_fingerprint = raw.fingerprint;
    return map;
}

void save_alignment(const std::filesystem::path & path, const grad_stats & stats,
                    std::span<const tensor> alignment, const dai_config & config) {
    json cfg = {{"epsilon", config.epsilon},
                {"granularity", granularity_name(config.granularity)}};
    write_scores_like(path, "gaprune-alignment", "alignment", cfg.dump(), stats.names,
                      alignment, stats.registry_fingerprint);
}

std::vector<tensor> load_alignment(const std::filesystem::path & path) {
    return read_scores_like(path, "gaprune-alignment").tensors;
}

void save_stats(const std::filesystem::path & path, const grad_stats & stats) {
    json header;
    header["kind"]    = "gaprune-stats";
    header["version"] = 1;
    header["n_general"] = stats.general.sample_count;
    header["n_domain"]  = stats.domain.sample_count;
    header["registry_fingerprint"] = fingerprint_hex(stats.registry_fingerprint);

    json manifest = json::array();
    int64_t offset = 0;
    auto claim = [&offset](const tensor & t) {
        const int64_t at = offset;
        offset += t.numel() * 8;
        return at;
    };
    for (size_t t = 0; t < stats.names.size(); ++t) {
        json jt;
        jt["name"]  = stats.names[t];
        jt["shape"] = stats.shapes[t];
        jt["fisher_general_offset"]    = claim(stats.general.fisher[t]);
        jt["fisher_domain_offset"]     = claim(stats.domain.fisher[t]);
        jt["mean_grad_general_offset"] = claim(stats.general.mean_grad[t]);
        jt["mean_grad_domain_offset"]  = claim(stats.domain.mean_grad[t]);
        manifest.push_back(std::move(jt));
    }
    header["tensors"] = std::move(manifest);

    std::string out = header.dump();
    out.push_back('\n');
    for (size_t t = 0; t < stats.names.size(); ++t) {
        append_f64_le(out, stats.general.fisher[t].values);
        append_f64_le(out, stats.domain.fisher[t].values);
        append_f64_le(out, stats.general.mean_grad[t].values);
        append_f64_le(out, stats.domain.mean_grad[t].values);
    }
    write_file(path, out);
}

grad_stats load_stats(const std::filesystem::path & path) {
    const std::string bytes = read_file(path);
    size_t payload_start = 0;
    const json header = parse_header(bytes, path, "gaprune-stats", payload_start);

    grad_stats stats;
    stats.general.sample_count = header.at("n_general").get<int64_t>();
    stats.domain.sample_count  = header.at("n_domain").get<int64_t>();
    stats.registry_fingerprint = parse_fingerprint(header, path);

    auto read_at = [&](const json & jt, const char * key, const std::vector<int64_t> & shape) {
        const int64_t n = shape_numel(shape);
        const size_t offset = payload_start + size_t(jt.at(key).get<int64_t>());
        if (offset + size_t(n) * 8 > bytes.size()) {
            throw integrity_error(path.string() + ": payload truncated");
        }
        return tensor(shape, read_f64_le(bytes, offset, size_t(n)));
    };
    for (const json & jt : header.at("tensors")) {
        const std::vector<int64_t> shape = jt.at("shape").get<std::vector<int64_t>>();
        stats.names.push_back(jt.at("name").get<std::string>());
        stats.shapes.push_back(shape);
        stats.general.fisher.push_back(read_at(jt, "fisher_general_offset", shape));
        stats.domain.fisher.push_back(read_at(jt, "fisher_domain_offset", shape));
        stats.general.mean_grad.push_back(read_at(jt, "mean_grad_general_offset", shape));
        stats.domain.mean_grad.push_back(read_at(jt, "mean_grad_domain_offset", shape));
    }
    return stats;
}

void save_mask(const std::filesystem::path & path, const prune_mask & mask) {
    json header;
    header["kind"]     = "gaprune-mask";
    header["version"]  = 1;
    header["method"]   = mask.method;
    header["sparsity"] = mask.target_sparsity;
    header["retained"] = mask.retained;
    header["registry_fingerprint"] = fingerprint_hex(mask.registry_fingerprint);
    json manifest = json::array();
    int64_t bit_offset = 0;
    for (size_t t = 0; t < mask.names.size(); ++t) {
        manifest.push_back({{"name", mask.names[t]},
                            {"shape", mask.shapes[t]},
                            {"bit_offset", bit_offset}});
        bit_offset += int64_t(mask.keep[t].size());
    }
    header["tensors"] = std::move(manifest);

    std::string out = header.dump();
    out.push_back('\n');
    // bit-packed, LSB first within each byte, tensors concatenated
    std::string payload((size_t(bit_offset) + 7) / 8, '\0');
    int64_t bit = 0;
    for (const auto & keep : mask.keep) {
        for (uint8_t b : keep) {
            if (b) {
                payload[size_t(bit / 8)] = char(uint8_t(payload[size_t(bit / 8)]) |
                                                uint8_t(1u << (bit % 8)));
            }
            ++bit;
        }
    }
    out += payload;
    write_file(path, out);
}

prune_mask load_mask(const std::filesystem::path & path) {
    const std::string bytes = read_file(path);
    size_t payload_start = 0;
    const json header = parse_header(bytes, path, "gaprune-mask", payload_start);

    prune_mask mask;
    mask.method          = header.at("method").get<std::string>();
    mask.target_sparsity = header.at("sparsity").get<double>();
    mask.retained        = header.at("retained").get<int64_t>();
    mask.registry_fingerprint = parse_fingerprint(header, path);

    for (const json & jt : header.at("tensors")) {
        const std::vector<int64_t> shape = jt.at("shape").get<std::vector<int64_t>>();
        const int64_t n = shape_numel(shape);
        const int64_t bit_offset = jt.at("bit_offset").get<int64_t>();
        if (payload_start + size_t((bit_offset + n + 7) / 8) > bytes.size()) {
            throw integrity_error(path.string() + ": mask payload truncated");
        }
        std::vector<uint8_t> keep(size_t(n), 0);
        for (int64_t i = 0; i < n; ++i) {
            const int64_t bit = bit_offset + i;
            keep[size_t(i)] = (uint8_t(bytes[payload_start + size_t(bit / 8)]) >> (bit % 8)) & 1u;
        }
        mask.names.push_back(jt.at("name").get<std::string>());
        mask.shapes.push_back(shape);
        mask.keep.push_back(std::move(keep));
    }
    return mask;
}

} // namespace gaprune
