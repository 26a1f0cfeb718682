#pragma once

namespace mrf {

inline constexpr const char* kToolName = "mrfdesign";
inline constexpr const char* kToolVersion = "0.1.0";

} // namespace mrf
