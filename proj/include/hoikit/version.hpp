#pragma once

namespace hoikit {

inline constexpr const char* kFormatVersion = "hoikit-1";

}  // namespace hoikit
