#pragma once

#include <string_view>

namespace dvforge {

inline constexpr std::string_view kToolName = "dv-forge";
inline constexpr std::string_view kToolVersion = "0.1.0";

} // namespace dvforge
