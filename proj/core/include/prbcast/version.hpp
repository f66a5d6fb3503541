#pragma once

namespace prbcast {

inline constexpr const char* kVersionString = "0.1.0";

}  // namespace prbcast
