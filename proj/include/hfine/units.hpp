#pragma once

// Unit conventions used throughout:
//   - frequencies entered as ordinary MHz are converted to angular rad/us,
//   - rates stay as plain inverse time (1/us); 1/ns inputs are scaled by 1e3,
//   - all internal math runs in rad/us and 1/us.

namespace hfine {

inline constexpr double kTwoPi = 6.28318530717958647692528676655900577;

constexpr double mhz_to_rad_us(double f_mhz) { return kTwoPi * f_mhz; }
constexpr double rad_us_to_mhz(double w_rad_us) { return w_rad_us / kTwoPi; }
constexpr double per_ns_to_per_us(double r_per_ns) { return 1.0e3 * r_per_ns; }
constexpr double per_s_to_per_us(double r_per_s) { return 1.0e-6 * r_per_s; }

}  // namespace hfine
