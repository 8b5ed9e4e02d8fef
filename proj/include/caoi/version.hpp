#pragma once

namespace caoi {
inline constexpr const char* kVersion = "0.1.0";
}
