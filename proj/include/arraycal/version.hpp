#pragma once

namespace arraycal {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace arraycal
