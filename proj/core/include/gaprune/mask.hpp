#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gaprune {

// Retain/drop decision per prunable element. `keep` holds one byte per
// element (1 = retain), aligned to the registry's prunable entries in order;
// the on-disk format bit-packs the same stream.
struct prune_mask {
    double target_sparsity = 0.0;
    int64_t retained = 0;
    uint64_t registry_fingerprint = 0;
    std::string method;
    std::vector<std::string> names;
    std::vector<std::vector<int64_t>> shapes;
    std::vector<std::vector<uint8_t>> keep;

    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto & k : keep) {
            n += int64_t(k.size());
        }
        return n;
    }

    int64_t popcount() const {
        int64_t n = 0;
        for (const auto & k : keep) {
            for (uint8_t b : k) {
                n += b ? 1 : 0;
            }
        }
        return n;
    }
};

} // namespace gaprune
