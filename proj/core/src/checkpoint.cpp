#include "gaprune/checkpoint.hpp"

#include "gaprune/errors.hpp"
#include "gaprune/fnv.hpp"
#include "gaprune/io.hpp"

#include <json.hpp>

namespace gaprune {

using nlohmann::json;

std::string registry_header_json(const param_registry & registry) {
    json header;
    header["kind"]    = "gaprune-checkpoint";
    header["version"] = 1;
    header["config"]  = {
        {"vocab_size", registry.config.vocab_size},
        {"embed_dim", registry.config.embed_dim},
        {"num_layers", registry.config.num_layers},
        {"hidden_dim", registry.config.hidden_dim},
        {"max_tokens", registry.config.max_tokens},
        {"seed", registry.config.seed},
    };
    json entries = json::array();
    int64_t offset = 0;
    for (const auto & e : registry.entries) {
        entries.push_back({
            {"name", e.name},
            {"shape", e.weights.shape},
            {"layer_index", e.layer_index},
            {"role", role_name(e.role)},
            {"prunable", e.prunable},
            {"offset", offset},
        });
        offset += e.weights.numel() * 8;
    }
    header["entries"] = std::move(entries);
    return header.dump();
}

uint64_t registry_fingerprint(const param_registry & registry) {
    return fnv1a64(registry_header_json(registry));
}

void save_checkpoint(const std::filesystem::path & path, const param_registry & registry) {
    std::string out = registry_header_json(registry);
    out.push_back('\n');
    for (const auto & e : registry.entries) {
        append_f64_le(out, e.weights.values);
    }
    write_file(path, out);
}

param_registry load_checkpoint(const std::filesystem::path & path) {
    const std::string bytes = read_file(path);
    const size_t nl = bytes.find('\n');
    if (nl == std::string::npos) {
        throw parse_error("checkpoint " + path.string() + ": missing header line");
    }
    json header;
    try {
        header = json::parse(bytes.substr(0, nl));
    } catch (const json::exception & e) {
        throw parse_error("checkpoint " + path.string() + ": bad header: " + e.what());
    }
    if (header.value("kind", "") != "gaprune-checkpoint") {
        throw parse_error("checkpoint " + path.string() + ": unexpected kind");
    }

    param_registry reg;
    const json & cfg = header.at("config");
    reg.config.vocab_size = cfg.at("vocab_size").get<int64_t>();
    reg.config.embed_dim  = cfg.at("embed_dim").get<int64_t>();
    reg.config.num_layers = cfg.at("num_layers").get<int64_t>();
    reg.config.hidden_dim = cfg.at("hidden_dim").get<int64_t>();
    reg.config.max_tokens = cfg.at("max_tokens").get<int64_t>();
    reg.config.seed       = cfg.at("seed").get<uint64_t>();

    const size_t payload_start = nl + 1;
    for (const json & je : header.at("entries")) {
        param_entry e;
        e.name        = je.at("name").get<std::string>();
        e.layer_index = je.at("layer_index").get<int64_t>();
        e.role        = role_from_name(je.at("role").get<std::string>());
        e.prunable    = je.at("prunable").get<bool>();
        const std::vector<int64_t> shape = je.at("shape").get<std::vector<int64_t>>();
        const int64_t n = shape_numel(shape);
        const size_t offset = payload_start + size_t(je.at("offset").get<int64_t>());
        if (offset + size_t(n) * 8 > bytes.size()) {
            throw integrity_error("checkpoint " + path.string() + ": payload truncated at '" +
                                  e.name + "'");
        }
        e.weights = tensor(shape, read_f64_le(bytes, offset, size_t(n)));
        reg.entries.push_back(std::move(e));
    }
    return reg;
}

} // namespace gaprune
