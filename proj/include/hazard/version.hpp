#pragma once

#include <string_view>

namespace hazard {

inline constexpr std::string_view kToolName = "hazard-ctmc";
inline constexpr std::string_view kVersion = "1.0.0";

}  // namespace hazard
