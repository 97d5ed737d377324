#pragma once

#include <numbers>

namespace superatom {

// All internal rates are 1/us, angular frequencies rad/us, times us.
// Lab settings quoted as "2pi x f MHz" convert via angular_from_mhz;
// f MHz equals f cycles/us, so the angular frequency is 2*pi*f rad/us.

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double angular_from_mhz(double f_mhz) { return two_pi * f_mhz; }
inline constexpr double mhz_from_angular(double w_rad_us) { return w_rad_us / two_pi; }

}  // namespace superatom
