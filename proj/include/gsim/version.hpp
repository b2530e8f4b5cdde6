#pragma once

namespace gsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gsim
