#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gaprune {

struct artifact_info {
    std::string path;        // relative to the run directory
    std::string fingerprint; // FNV-1a64 over the file bytes, hex
};

struct stage_info {
    bool done = false;
    std::vector<std::string> artifacts; // keys into run_manifest::artifacts
};

// Persistent record of a run: full config snapshot, per-stage completion and
// content fingerprints of every artifact a later stage may consume.
struct run_manifest {
    std::string run_id;
    std::string tool_version;
    std::string config_json;
    std::map<std::string, artifact_info> artifacts;
    std::map<std::string, stage_info> stages;
};

bool manifest_exists(const std::filesystem::path & run_dir);
run_manifest load_manifest(const std::filesystem::path & run_dir);
void save_manifest(const std::filesystem::path & run_dir, const run_manifest & m);

// fingerprints the file and records it under `key` for `stage`
void record_artifact(run_manifest & m, const std::filesystem::path & run_dir,
                     const std::string & stage, const std::string & key,
                     const std::string & relpath);

// resolves an artifact a stage depends on; throws dependency_error naming
// `producer` when missing, integrity_error when the on-disk bytes changed
std::filesystem::path require_artifact(const run_manifest & m,
                                       const std::filesystem::path & run_dir,
                                       const std::string & key, const std::string & producer);

// true when the stage already ran and all of its artifacts still verify
bool stage_reusable(const run_manifest & m, const std::filesystem::path & run_dir,
                    const std::string & stage);

void require_stage(const run_manifest & m, const std::string & stage,
                   const std::string & producer);

} // namespace gaprune
