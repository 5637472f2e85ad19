#pragma once

#include "gaprune/analysis.hpp"

#include <filesystem>

namespace gaprune {

// Header-line-plus-payload dumps, same layout family as checkpoints: one line
// of JSON with a tensor manifest and byte/bit offsets, '\n', raw payload.

void save_scores(const std::filesystem::path & path, const importance_map & map);
importance_map load_scores(const std::filesystem::path & path);

void save_stats(const std::filesystem::path & path, const grad_stats & stats);
grad_stats load_stats(const std::filesystem::path & path);

// alignment dump reuses the score layout with method fixed to "alignment"
void save_alignment(const std::filesystem::path & path, const grad_stats & stats,
                    std::span<const tensor> alignment, const dai_config & config);
std::vector<tensor> load_alignment(const std::filesystem::path & path);

void save_mask(const std::filesystem::path & path, const prune_mask & mask);
prune_mask load_mask(const std::filesystem::path & path);

} // namespace gaprune
