#pragma once

#include <string_view>

namespace tracebench {

inline constexpr std::string_view kToolName = "tracebench";
inline constexpr std::string_view kToolVersion = "0.1.0";

}  // namespace tracebench
