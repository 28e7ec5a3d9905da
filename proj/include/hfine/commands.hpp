#pragma once

#include <string>

#include "hfine/config.hpp"

namespace hfine {

inline constexpr const char* kVersion = "0.1.0";

struct RunContext {
  std::string out_dir = ".";
  std::uint64_t seed_override = 0;  // 0 keeps the scenario seed
  int threads = 0;                  // 0 lets OpenMP decide, 1 forces the serial path
};

// Exit codes: 0 ok, 2 config error, 3 solver error, 4 validation failure.
int cmd_steady_scan(const Scenario& scenario, const RunContext& ctx);
int cmd_n14_scan(const Scenario& scenario, const RunContext& ctx);
int cmd_cpt_scan(const Scenario& scenario, const RunContext& ctx);
int cmd_narrowing(const Scenario& scenario, const RunContext& ctx);
int cmd_squeezing_demo(const Scenario& scenario, const RunContext& ctx);
int cmd_validate(const Scenario& scenario, const RunContext& ctx);

// Steady-state populations over a grid of two-photon detunings (rad/us);
// the map over grid points is the OpenMP kernel, each solve is serial.
std::vector<DensityMatrix> scan_nv_steady(const NvParams& params, std::span<const double> deltas,
                                          int threads);

// One point of the 14N cooling curve: populations of the 3-state chain with
// field-dependent flip rates, the slowest relaxation mode and the inverse
// steady flip flux (both us).
struct N14Point {
  double pop_m0_0 = 0;
  double narrowing_time_us = 0;
  double flip_time_us = 0;
};

N14Point n14_point(const NvParams& params, const NitrogenSite& site, double gamma_n_per_us);

// Averaged and post-selected CPT fluorescence against the readout field, one
// pair of curves per readout drive, each normalized at the last grid point.
struct CptScanResult {
  std::vector<double> omega_re;             // rad/us
  std::vector<std::vector<double>> averaged;
  std::vector<std::vector<double>> post_selected;
};

CptScanResult compute_cpt_scan(const Scenario& scenario, int threads);

// Full width at half depth of a dip relative to its edge plateau.
double dip_fwhm(std::span<const double> x, std::span<const double> y);

}  // namespace hfine
