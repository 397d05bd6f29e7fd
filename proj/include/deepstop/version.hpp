#pragma once

namespace deepstop {

inline constexpr const char* kVersion = "deepstop-0.1.0";

}  // namespace deepstop
