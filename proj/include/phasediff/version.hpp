#pragma once

namespace phasediff {

inline constexpr const char* kVersion = "0.1.0";

} // namespace phasediff
