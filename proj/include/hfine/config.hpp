#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hfine/bath.hpp"
#include "hfine/nv.hpp"

namespace hfine {

// Command-specific run knobs. Grids are [lo, hi] in MHz plus a point count.
struct RunSection {
  std::uint64_t seed = 1;

  // steady-scan / cpt-scan grids
  double delta_scan_lo_mhz = -0.05, delta_scan_hi_mhz = 0.05;
  int delta_scan_points = 201;
  double omega_re_lo_mhz = -3.0, omega_re_hi_mhz = 3.0;
  int omega_re_points = 241;
  std::vector<double> rabi_a_readout_mhz = {3.2, 10.0, 8.0};
  double photon_factor_c = 12.0;

  // n14-scan / narrowing scan over Omega_A
  double rabi_scan_lo_mhz = 0.5, rabi_scan_hi_mhz = 120.0;
  int rabi_scan_points = 41;
  bool rabi_scan_log = true;

  // bath sampling
  bool kmc = true;
  int kmc_trajectories = 64;
  std::uint64_t kmc_events = 20000;

  // squeezing demo (driven-damped two-level toy)
  double squeeze_rabi_mhz = 1.0;
  double squeeze_detuning_mhz = 0.5;
  double squeeze_gamma_per_us = 20.0;
  double squeeze_coupling_mhz = 0.1;  // field per unit collective projection
  int squeeze_n_spins = 20;

  std::vector<double> rabi_scan_grid() const;
  std::vector<double> delta_scan_grid_rad_us() const;
  std::vector<double> omega_re_grid_rad_us() const;
};

struct BathSection {
  int n_spins = 40;
  double a_par_mhz = 0.15;
  double a_perp_mhz = 0.15;
  double gamma_c_per_us = 2.5e-8;  // paper value 2.5e-2 / s
  // direct overrides for synthetic narrowing runs (bypass the NV-derived rates)
  std::optional<double> flip_rate_override;   // R, 1/us
  std::optional<double> depol_override;       // Gamma_dep, 1/us
  std::optional<double> delta0_override_mhz;  // dip half width
};

struct Scenario {
  NvParams nv;
  std::optional<NitrogenSite> nitrogen;
  double gamma_n_per_us = 0.0;
  std::vector<CarbonSite> carbons;
  BathSection bath;
  RunSection run;

  std::uint64_t config_hash = 0;
  std::string source;

  // NarrowingParams at the scenario's NV drive, honoring overrides.
  NarrowingParams narrowing_params(double zeeman_rad_us = 0.0) const;
};

// Strict tables-and-keys parser: `[section]`, repeated `[[carbon]]` tables,
// `key = value` lines with numbers, booleans or numeric lists. Unknown
// sections or keys, malformed values and non-finite numbers all raise
// ConfigError with the offending line number.
Scenario parse_scenario_text(const std::string& text, const std::string& source_name = "<text>");
Scenario load_scenario(const std::string& path);

std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace hfine
