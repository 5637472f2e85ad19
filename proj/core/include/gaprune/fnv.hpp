#pragma once

#include <cstdint>
#include <string_view>

namespace gaprune {

// 64-bit FNV-1a. Used for checkpoint/artifact fingerprints and the hashing
// tokenizer, so the exact constants matter for file compatibility.
inline uint64_t fnv1a64(const void * data, size_t n, uint64_t seed = 14695981039346656037ull) {
    const unsigned char * p = static_cast<const unsigned char *>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s) {
    return fnv1a64(s.data(), s.size());
}

} // namespace gaprune
