#pragma once

namespace taihri {

inline constexpr const char *kVersion = "0.1.0";

} // namespace taihri
