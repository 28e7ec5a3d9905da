#include "hfine/bath.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/LU>

#include "hfine/errors.hpp"
#include "hfine/parallel.hpp"
#include "hfine/units.hpp"

namespace hfine {

double NarrowingParams::sigma_eq() const {
  return std::sqrt(static_cast<double>(n_spins)) * 0.5 * mhz_to_rad_us(a_par_mhz);
}

double NarrowingParams::delta_s() const {
  if (flip_rate + depol_total <= 0) return 0.0;
  return std::sqrt(depol_total / (flip_rate + depol_total)) * delta0;
}

double NarrowingParams::field_of(int m_twice) const {
  return mhz_to_rad_us(a_par_mhz) * 0.5 * static_cast<double>(m_twice);
}

double NarrowingParams::lambda(double h) const {
  const double d = zeeman + h;
  const double dip = delta0 > 0 ? d * d / (d * d + delta0 * delta0) : 1.0;
  return flip_rate * dip + depol_total;
}

void NarrowingParams::validate() const {
  if (n_spins <= 0) throw InvalidModel("narrowing: need at least one spin");
  if (a_par_mhz <= 0) throw InvalidModel("narrowing: A_par must be positive");
  if (flip_rate < 0 || depol_total < 0 || delta0 < 0)
    throw InvalidModel("narrowing: rates must be nonnegative");
}

void FieldDistribution::normalize() {
  double total = 0;
  for (double v : p) {
    if (v < 0) throw InvalidModel("distribution with negative probability");
    total += v;
  }
  if (total <= 0) throw InvalidModel("distribution with zero mass");
  for (double& v : p) v /= total;
}

double FieldDistribution::mean() const {
  double m = 0;
  for (std::size_t i = 0; i < h.size(); ++i) m += h[i] * p[i];
  return m;
}

double FieldDistribution::sigma() const {
  const double m = mean();
  double var = 0;
  for (std::size_t i = 0; i < h.size(); ++i) var += (h[i] - m) * (h[i] - m) * p[i];
  return std::sqrt(std::max(var, 0.0));
}

FieldDistribution birth_death_steady(const NarrowingParams& params) {
  params.validate();
  const int n = params.n_spins;
  FieldDistribution dist;
  dist.h.resize(n + 1);
  dist.p.resize(n + 1);

  // log binomial weights to stay finite at large N
  std::vector<double> log_binom(n + 1);
  for (int k = 0; k <= n; ++k)
    log_binom[k] = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  const double log_max = *std::max_element(log_binom.begin(), log_binom.end());

  for (int k = 0; k <= n; ++k) {
    const int m_twice = 2 * k - n;
    const double h = params.field_of(m_twice);
    const double rate = params.lambda(h);
    if (rate <= 0) throw InvalidModel("birth_death_steady: vanishing flip rate");
    dist.h[k] = h;
    dist.p[k] = std::exp(log_binom[k] - log_max) / rate;
  }
  dist.normalize();
  return dist;
}

FieldDistribution analytic_distribution(const NarrowingParams& params) {
  params.validate();
  const double sigma_eq = params.sigma_eq();
  const double delta_s = params.delta_s();
  if (params.flip_rate > 0 && delta_s <= 0)
    throw GridResolutionError("analytic_distribution: delta_s = 0 with R > 0 cannot be gridded");

  // Coarse grid over +-6 sigma_eq, refined near the dip center so the peak is
  // sampled at delta_s/10 or better.
  const double span = 6.0 * sigma_eq;
  const double coarse = sigma_eq / 200.0;
  const double fine = delta_s > 0 ? std::min(delta_s / 10.0, coarse) : coarse;
  const double center = -params.zeeman;
  const double peak_halfwidth = delta_s > 0 ? 50.0 * delta_s : 0.0;

  std::vector<double> grid;
  double x = -span;
  while (x <= span) {
    grid.push_back(x);
    const bool near_peak = peak_halfwidth > 0 && std::abs(x - center) < peak_halfwidth;
    x += near_peak ? fine : coarse;
  }
  grid.push_back(span);

  FieldDistribution dist;
  dist.h.reserve(grid.size());
  dist.p.reserve(grid.size());
  const double weight_ratio =
      params.flip_rate + params.depol_total > 0
          ? params.flip_rate / (params.flip_rate + params.depol_total)
          : 0.0;
  // trapezoid cell masses on the nonuniform grid
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double hi = grid[i];
    const double d = params.zeeman + hi;
    const double lorentz =
        delta_s > 0 ? params.delta0 * params.delta0 / (d * d + delta_s * delta_s) : 0.0;
    const double density = (1.0 + weight_ratio * lorentz) *
                           std::exp(-hi * hi / (2.0 * sigma_eq * sigma_eq));
    const double left = i == 0 ? grid[0] : 0.5 * (grid[i - 1] + grid[i]);
    const double right = i + 1 == grid.size() ? grid.back() : 0.5 * (grid[i] + grid[i + 1]);
    dist.h.push_back(hi);
    dist.p.push_back(density * (right - left));
  }
  dist.normalize();
  return dist;
}

NarrowingReport narrowing_metrics(const FieldDistribution& dist, const NarrowingParams& params) {
  NarrowingReport report;
  report.sigma = dist.sigma();
  report.sigma_eq = params.sigma_eq();
  report.ratio = report.sigma_eq > 0 ? report.sigma / report.sigma_eq : 0.0;
  report.delta_s = params.delta_s();
  report.narrowed = report.ratio < 0.9;
  return report;
}

std::vector<double> master_equation_steady(const Eigen::MatrixXd& generator) {
  const int n = static_cast<int>(generator.rows());
  if (n > kMaxEnumeratedConfigs) throw UseKmc("configuration count beyond enumeration guard");

  if (n <= 2048) {
    Eigen::MatrixXd system = generator;
    system.row(0).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(0) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible())
      throw DegenerateSteadyState("master equation: null space has dimension > 1");
    Eigen::VectorXd p = lu.solve(rhs);
    const double residual = (generator * p).norm();
    if (residual > 1e-10 * std::max(1.0, generator.norm()))
      throw SolverError("master equation: steady residual check failed");
    std::vector<double> out(p.data(), p.data() + n);
    for (double& v : out) v = std::max(v, 0.0);
    const double total = std::accumulate(out.begin(), out.end(), 0.0);
    for (double& v : out) v /= total;
    return out;
  }

  // uniformized power iteration for large chains
  const double scale = generator.diagonal().cwiseAbs().maxCoeff();
  if (scale <= 0) throw DegenerateSteadyState("master equation: zero generator");
  Eigen::VectorXd p = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (int it = 0; it < 200000; ++it) {
    Eigen::VectorXd next = p + (generator * p) / (2.0 * scale);
    next = next.cwiseMax(0.0);
    next /= next.sum();
    const double delta = (next - p).lpNorm<1>();
    p = next;
    if (delta < 1e-14) break;
  }
  if ((generator * p).lpNorm<1>() > 1e-8 * scale)
    throw SolverError("master equation: power iteration did not converge");
  return std::vector<double>(p.data(), p.data() + n);
}

std::vector<double> master_equation_evolve(const Eigen::MatrixXd& generator, std::vector<double> p0,
                                           double t) {
  const int n = static_cast<int>(generator.rows());
  if (static_cast<int>(p0.size()) != n) throw InvalidModel("master equation: state size mismatch");
  Eigen::Map<Eigen::VectorXd> p(p0.data(), n);
  // RK4 with a step bounded by the fastest rate
  const double max_rate = std::max(generator.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  const int steps = std::max(1, static_cast<int>(std::ceil(t * max_rate * 400.0)));
  const double dt = t / steps;
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n);
  for (int s = 0; s < steps; ++s) {
    k1 = generator * p;
    k2 = generator * (p + 0.5 * dt * k1);
    k3 = generator * (p + 0.5 * dt * k2);
    k4 = generator * (p + dt * k3);
    p += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return p0;
}

KmcResult kmc_sample(const MarkovChain& chain, std::span<const int> initial_states,
                     const KmcOptions& options) {
  if (chain.n_states <= 0) throw InvalidModel("kmc: empty chain");
  if (options.n_trajectories <= 0) throw InvalidModel("kmc: need at least one trajectory");

  const int n_traj = options.n_trajectories;
  std::vector<std::vector<double>> residence(n_traj);
  std::vector<std::uint64_t> events(n_traj, 0);
  std::vector<std::uint64_t> absorbed(n_traj, 0);

  parallel_for(
      static_cast<std::size_t>(n_traj),
      [&](std::size_t traj) {
        std::seed_seq seq{static_cast<std::uint64_t>(0x9E3779B97F4A7C15ull), options.seed,
                          static_cast<std::uint64_t>(traj)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        std::vector<double> local(chain.n_states, 0.0);
        std::vector<std::pair<int, double>> moves;
        int state = initial_states.empty()
                        ? 0
                        : initial_states[traj % initial_states.size()];

        const std::uint64_t burn_in = static_cast<std::uint64_t>(
            options.burn_in_fraction * static_cast<double>(options.max_events_per_trajectory));
        for (std::uint64_t ev = 0; ev < options.max_events_per_trajectory; ++ev) {
          moves.clear();
          chain.moves(state, moves);
          double total = 0;
          for (const auto& [next, rate] : moves) {
            if (rate < 0) throw NegativeRate("kmc: negative move rate");
            total += rate;
          }
          if (total <= 0) {
            absorbed[traj] = 1;
            break;
          }
          const double wait = -std::log(std::max(unit(rng), 1e-300)) / total;
          if (ev >= burn_in) local[state] += wait;
          double pick = unit(rng) * total;
          int next_state = moves.back().first;
          for (const auto& [next, rate] : moves) {
            pick -= rate;
            if (pick <= 0) {
              next_state = next;
              break;
            }
          }
          state = next_state;
          ++events[traj];
        }
        residence[traj] = std::move(local);
      },
      options.threads);

  KmcResult result;
  result.residence.assign(chain.n_states, 0.0);
  for (int traj = 0; traj < n_traj; ++traj) {  // fixed-order reduction
    for (int s = 0; s < chain.n_states; ++s) result.residence[s] += residence[traj][s];
    result.total_events += events[traj];
    result.absorbed_trajectories += absorbed[traj];
  }
  return result;
}

NarrowingParams narrowing_from_nv(const NvParams& nv, int n_spins, double a_par_mhz,
                                  double a_perp_mhz, double gamma_c_per_us, double zeeman_rad_us) {
  const ChiFactors c = chi_factors(nv);
  const AnalyticSteadyState a = analytic_steady_state(nv);
  const double a_perp = mhz_to_rad_us(a_perp_mhz);

  NarrowingParams params;
  params.n_spins = n_spins;
  params.a_par_mhz = a_par_mhz;
  params.delta0 = a.delta0;
  params.zeeman = zeeman_rad_us;
  params.chi = a.chi;
  params.gamma_c = gamma_c_per_us;
  params.flip_rate =
      (c.sum_chi_f() + c.chi_g) * a_perp * a_perp * a.p0 * std::max(1.0 - 2.0 * a.chi, 0.0);
  params.depol_total = gamma_c_per_us + a.chi * params.flip_rate;
  return params;
}

OptimalNarrowingResult optimal_narrowing(const NvParams& nv, int n_spins, double a_par_mhz,
                                         double a_perp_mhz, double gamma_c_per_us,
                                         std::span<const double> rabi_scan_mhz) {
  OptimalNarrowingResult result;
  result.ratio_min = std::numeric_limits<double>::infinity();

  NarrowingParams at_opt;
  for (double rabi : rabi_scan_mhz) {
    NvParams point = nv;
    point.rabi_a_mhz = rabi;
    const NarrowingParams params =
        narrowing_from_nv(point, n_spins, a_par_mhz, a_perp_mhz, gamma_c_per_us);
    const FieldDistribution dist = analytic_distribution(params);
    const NarrowingReport report = narrowing_metrics(dist, params);
    result.scan.push_back({rabi, params.delta0, report.ratio});
    if (report.ratio < result.ratio_min) {
      result.ratio_min = report.ratio;
      result.delta0_opt = params.delta0;
      result.rabi_a_opt_mhz = rabi;
      at_opt = params;
    }
  }

  // closed forms, evaluated with P_0 and R at the scanned optimum
  NvParams opt_nv = nv;
  opt_nv.rabi_a_mhz = result.rabi_a_opt_mhz;
  const AnalyticSteadyState a = analytic_steady_state(opt_nv);
  const double sigma_eq = at_opt.sigma_eq();
  const double delta = mhz_to_rad_us(nv.detuning_a2_mhz);
  result.analytic_ratio_min =
      std::pow(4.0 * a.eta3 / (std::numbers::pi * a.eta1 * a.eta1), 0.25) *
      std::sqrt(sigma_eq / delta);
  if (at_opt.flip_rate > 0 && a.eta3 > 0)
    result.analytic_delta0_opt =
        std::sqrt(2.0) * sigma_eq *
        std::pow(a.p0 * gamma_c_per_us / (2.0 * at_opt.flip_rate * a.eta3), 0.25) *
        std::sqrt(delta * a.eta1 / sigma_eq);
  return result;
}

FieldDistribution kmc_field_histogram(const NarrowingParams& params, const KmcOptions& options) {
  params.validate();
  const int n = params.n_spins;

  MarkovChain chain;
  chain.n_states = n + 1;  // number of up spins
  chain.moves = [params, n](int k, std::vector<std::pair<int, double>>& moves) {
    const double lambda = params.lambda(params.field_of(2 * k - n));
    if (k < n) moves.emplace_back(k + 1, (n - k) * lambda);
    if (k > 0) moves.emplace_back(k - 1, k * lambda);
  };

  // spread trajectory starts over the thermal (binomial) bulk
  std::vector<int> initial(static_cast<std::size_t>(options.n_trajectories));
  std::seed_seq seq{options.seed, static_cast<std::uint64_t>(0xC0FFEEull)};
  std::mt19937_64 rng(seq);
  std::binomial_distribution<int> binom(n, 0.5);
  for (auto& s : initial) s = binom(rng);

  const KmcResult result = kmc_sample(chain, initial, options);

  FieldDistribution dist;
  dist.h.resize(n + 1);
  dist.p = result.residence;
  for (int k = 0; k <= n; ++k) dist.h[k] = params.field_of(2 * k - n);
  dist.normalize();
  return dist;
}

}  // namespace hfine
