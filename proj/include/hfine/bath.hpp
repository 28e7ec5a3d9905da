#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hfine/adiabatic.hpp"
#include "hfine/hyperfine.hpp"
#include "hfine/nv.hpp"

namespace hfine {

// Uniform-bath narrowing parameters. The per-spin flip rate is
//   lambda(h) = R * d^2/(d^2 + delta0^2) + Gamma_dep,   d = zeeman + h,
// direction-unbiased; the dip shape is the CPT fluorescence profile.
struct NarrowingParams {
  int n_spins = 40;
  double a_par_mhz = 0.15;   // uniform longitudinal coupling A_par
  double flip_rate = 0;      // R, 1/us
  double depol_total = 0;    // Gamma_dep = gamma_c + chi R, 1/us
  double delta0 = 0;         // CPT dip half width, rad/us
  double zeeman = 0;         // dip offset (rad/us); 0 for the closed-form work
  double gamma_c = 0;        // intrinsic depolarization, bookkeeping
  double chi = 0;            // off-resonant excitation parameter, bookkeeping

  double sigma_eq() const;               // sqrt(N) * A_par/2 in rad/us
  double delta_s() const;                // sqrt(Gamma_dep/(R+Gamma_dep)) * delta0
  double field_of(int m_twice) const;    // h_M = 2 pi A_par * M, M = m_twice/2
  double lambda(double h) const;
  void validate() const;
};

// Probability distribution over a nuclear-field grid.
struct FieldDistribution {
  std::vector<double> h;  // rad/us, increasing
  std::vector<double> p;  // nonnegative, sums to 1

  void normalize();
  double mean() const;
  double sigma() const;
};

// Exact detailed-balance steady state of the birth-death chain on the total
// projection M = -N/2 ... N/2: p(M) ~ binom(N, M+N/2) / lambda(h_M).
FieldDistribution birth_death_steady(const NarrowingParams& params);

// Closed-form narrowed distribution
//   p(h) ~ (1 + R/(R+Gamma_dep) * delta0^2/((zeeman+h)^2 + delta_s^2)) e^{-h^2/(2 sigma_eq^2)}
// on a grid spanning +-6 sigma_eq, refined near the dip so the peak is
// resolved to <= delta_s/10.
FieldDistribution analytic_distribution(const NarrowingParams& params);

struct NarrowingReport {
  double sigma = 0;
  double sigma_eq = 0;
  double ratio = 0;
  double delta_s = 0;
  bool narrowed = false;  // ratio < 0.9
};

NarrowingReport narrowing_metrics(const FieldDistribution& dist, const NarrowingParams& params);

// Configuration-space master equation. Steady mode solves G p = 0 (dense for
// n <= 2048, uniformized power iteration above); evolve mode steps p(t).
// Explicit enumeration stops at 2e5 configurations (UseKmc beyond).
inline constexpr int kMaxEnumeratedConfigs = 200000;

std::vector<double> master_equation_steady(const Eigen::MatrixXd& generator);
std::vector<double> master_equation_evolve(const Eigen::MatrixXd& generator,
                                           std::vector<double> p0, double t);

// Continuous-time Markov chain for the kinetic Monte Carlo sampler: states are
// dense indices, moves(state) lists (next_state, rate) pairs.
struct MarkovChain {
  int n_states = 0;
  std::function<void(int, std::vector<std::pair<int, double>>&)> moves;
};

struct KmcOptions {
  std::uint64_t seed = 1;
  int n_trajectories = 64;
  std::uint64_t max_events_per_trajectory = 20000;
  double burn_in_fraction = 0.2;  // leading fraction of each trajectory dropped
  int threads = 0;
};

struct KmcResult {
  std::vector<double> residence;  // stationary time per state, summed over trajectories
  std::uint64_t total_events = 0;
  std::uint64_t absorbed_trajectories = 0;  // trajectories that hit a zero-rate state
};

// Residence-time (BKL) sampling with one counter-based RNG stream per
// trajectory; the reduction order is fixed, so results are identical for any
// thread count.
KmcResult kmc_sample(const MarkovChain& chain, std::span<const int> initial_states,
                     const KmcOptions& options);

// Uniform-bath KMC: chain on the number of up spins, histogram over h_M.
FieldDistribution kmc_field_histogram(const NarrowingParams& params, const KmcOptions& options);

// Scan of the narrowing ratio against the analytic optimum. The scan varies
// Omega_A, rebuilding delta0, chi, R and Gamma_dep from the NV parameters.
struct OptimalNarrowingPoint {
  double rabi_a_mhz = 0;
  double delta0 = 0;
  double ratio = 0;
};

struct OptimalNarrowingResult {
  std::vector<OptimalNarrowingPoint> scan;
  double ratio_min = 0;
  double delta0_opt = 0;
  double rabi_a_opt_mhz = 0;
  double analytic_ratio_min = 0;   // (4 eta3 / (pi eta1^2))^(1/4) sqrt(sigma_eq / Delta)
  double analytic_delta0_opt = 0;  // rad/us
};

// Uniform-bath parameters derived from the NV model at the given drive:
// R = (sum_f chi_f + chi_g) A_perp^2 P_0 (1 - 2 chi), Gamma_dep = gamma_c + chi R,
// delta0 from the analytic dip width.
NarrowingParams narrowing_from_nv(const NvParams& nv, int n_spins, double a_par_mhz,
                                  double a_perp_mhz, double gamma_c_per_us,
                                  double zeeman_rad_us = 0.0);

OptimalNarrowingResult optimal_narrowing(const NvParams& nv, int n_spins, double a_par_mhz,
                                         double a_perp_mhz, double gamma_c_per_us,
                                         std::span<const double> rabi_scan_mhz);

}  // namespace hfine
