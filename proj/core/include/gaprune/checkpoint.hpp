#pragma once

#include "gaprune/encoder.hpp"

#include <filesystem>
#include <string>

namespace gaprune {

// Checkpoint file = one line of JSON (config + entry manifest with payload
// byte offsets), '\n', then raw little-endian f64 values in entry order.
// The registry fingerprint is FNV-1a64 over the header line; it covers
// structure, not values, so a mask built for a dense registry still matches
// the same registry after masking or retraining.
std::string registry_header_json(const param_registry & registry);
uint64_t registry_fingerprint(const param_registry & registry);

void save_checkpoint(const std::filesystem::path & path, const param_registry & registry);
param_registry load_checkpoint(const std::filesystem::path & path);

} // namespace gaprune
