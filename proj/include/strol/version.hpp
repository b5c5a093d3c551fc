#pragma once

namespace strol {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace strol
