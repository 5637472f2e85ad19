#include "gaprune/manifest.hpp"

#include "gaprune/errors.hpp"
#include "gaprune/io.hpp"

#include <json.hpp>

namespace gaprune {

using nlohmann::json;

namespace {

std::filesystem::path manifest_path(const std::filesystem::path & run_dir) {
    return run_dir / "manifest.json";
}

} // namespace

bool manifest_exists(const std::filesystem::path & run_dir) {
    return std::filesystem::exists(manifest_path(run_dir));
}

run_manifest load_manifest(const std::filesystem::path & run_dir) {
    json j;
    try {
        j = json::parse(read_file(manifest_path(run_dir)));
    } catch (const json::exception & e) {
        throw parse_error(manifest_path(run_dir).string() + ": " + e.what());
    }
    run_manifest m;
    m.run_id       = j.at("run_id").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config_json  = j.at("config").dump();
    if (j.contains("artifacts")) {
        for (const auto & [key, ja] : j.at("artifacts").items()) {
            m.artifacts[key] = {ja.at("path").get<std::string>(),
                                ja.at("fingerprint").get<std::string>()};
        }
    }
    if (j.contains("stages")) {
        for (const auto & [name, js] : j.at("stages").items()) {
            stage_info info;
            info.done      = js.at("done").get<bool>();
            info.artifacts = js.at("artifacts").get<std::vector<std::string>>();
            m.stages[name] = std::move(info);
        }
    }
    return m;
}

void save_manifest(const std::filesystem::path & run_dir, const run_manifest & m) {
    json j;
    j["run_id"]       = m.run_id;
    j["tool_version"] = m.tool_version;
    j["config"]       = json::parse(m.config_json);
    json artifacts = json::object();
    for (const auto & [key, info] : m.artifacts) {
        artifacts[key] = {{"path", info.path}, {"fingerprint", info.fingerprint}};
    }
    j["artifacts"] = std::move(artifacts);
    json stages = json::object();
    for (const auto & [name, info] : m.stages) {
        stages[name] = {{"done", info.done}, {"artifacts", info.artifacts}};
    }
    j["stages"] = std::move(stages);
    write_file(manifest_path(run_dir), j.dump(2) + "\n");
}

void record_artifact(run_manifest & m, const std::filesystem::path & run_dir,
                     const std::string & stage, const std::string & key,
                     const std::string & relpath) {
    artifact_info info;
    info.path        = relpath;
    info.fingerprint = fingerprint_hex(file_fingerprint(run_dir / relpath));
    m.artifacts[key] = std::move(info);
    auto & list = m.stages[stage].artifacts;
    if (std::find(list.begin(), list.end(), key) == list.end()) {
        list.push_back(key);
    }
}

std::filesystem::path require_artifact(const run_manifest & m,
                                       const std::filesystem::path & run_dir,
                                       const std::string & key, const std::string & producer) {
    auto it = m.artifacts.find(key);
    if (it == m.artifacts.end()) {
        throw dependency_error("artifact '" + key + "' not found; run '" + producer + "' first");
    }
    const std::filesystem::path path = run_dir / it->second.path;
    if (!std::filesystem::exists(path)) {
        throw dependency_error("artifact file '" + it->second.path + "' missing; run '" +
                               producer + "' again");
    }
    const std::string actual = fingerprint_hex(file_fingerprint(path));
    if (actual != it->second.fingerprint) {
        throw integrity_error("artifact '" + key + "' fingerprint mismatch (expected " +
                              it->second.fingerprint + ", found " + actual + ")");
    }
    return path;
}

bool stage_reusable(const run_manifest & m, const std::filesystem::path & run_dir,
                    const std::string & stage) {
    auto it = m.stages.find(stage);
    if (it == m.stages.end() || !it->second.done) {
        return false;
    }
    for (const std::string & key : it->second.artifacts) {
        auto ai = m.artifacts.find(key);
        if (ai == m.artifacts.end()) {
            return false;
        }
        const std::filesystem::path path = run_dir / ai->second.path;
        if (!std::filesystem::exists(path)) {
            return false;
        }
        if (fingerprint_hex(file_fingerprint(path)) != ai->second.fingerprint) {
            return false;
        }
    }
    return true;
}

void require_stage(const run_manifest & m, const std::string & stage,
                   const std::string & producer) {
    auto it = m.stages.find(stage);
    if (it == m.stages.end() || !it->second.done) {
        throw dependency_error("stage '" + stage + "' has not run; run '" + producer +
                               "' first");
    }
}

} // namespace gaprune
