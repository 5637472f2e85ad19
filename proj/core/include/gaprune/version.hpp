#pragma once

namespace gaprune {

inline constexpr const char * kToolVersion = "0.1.0";

} // namespace gaprune
