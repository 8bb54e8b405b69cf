#pragma once

#include <cmath>
#include <cstdint>

namespace spsim {

/// Timestamps are unsigned picosecond ticks.
using Tick = std::uint64_t;
/// Signed delay between two ticks.
using SignedTick = std::int64_t;

inline constexpr double kPsPerNs = 1e3;
inline constexpr double kPsPerUs = 1e6;
inline constexpr double kPsPerMs = 1e9;
inline constexpr double kPsPerS = 1e12;

constexpr double ns_to_ps(double ns) { return ns * kPsPerNs; }
constexpr double us_to_ps(double us) { return us * kPsPerUs; }
constexpr double s_to_ps(double s) { return s * kPsPerS; }

inline Tick ns_to_ticks(double ns) { return static_cast<Tick>(std::llround(ns * kPsPerNs)); }
inline Tick us_to_ticks(double us) { return static_cast<Tick>(std::llround(us * kPsPerUs)); }
inline Tick ms_to_ticks(double ms) { return static_cast<Tick>(std::llround(ms * kPsPerMs)); }
inline Tick s_to_ticks(double s) { return static_cast<Tick>(std::llround(s * kPsPerS)); }

constexpr double ticks_to_s(Tick t) { return static_cast<double>(t) / kPsPerS; }
constexpr double ticks_to_ns(Tick t) { return static_cast<double>(t) / kPsPerNs; }

}  // namespace spsim
