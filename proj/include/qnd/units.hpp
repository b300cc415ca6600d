#pragma once

#include <numbers>

// Internal units: time in ns, angular frequencies and rates in rad/ns.
// Config files carry plain-cycle frequencies (GHz, MHz, kHz).
namespace qnd::units {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double from_ghz(double f) { return two_pi * f; }
constexpr double from_mhz(double f) { return two_pi * f * 1e-3; }
constexpr double from_khz(double f) { return two_pi * f * 1e-6; }

constexpr double to_ghz(double w) { return w / two_pi; }
constexpr double to_mhz(double w) { return w / two_pi * 1e3; }
constexpr double to_khz(double w) { return w / two_pi * 1e6; }

}  // namespace qnd::units
