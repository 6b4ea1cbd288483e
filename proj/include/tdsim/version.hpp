#pragma once

namespace tdsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tdsim
