// Acceptance suite: one pass/fail line per criterion, every tolerance pinned
// in code. Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hfine/bath.hpp"
#include "hfine/commands.hpp"
#include "hfine/config.hpp"
#include "hfine/csv.hpp"
#include "hfine/solvers.hpp"
#include "hfine/units.hpp"
#include "oracles.hpp"

using namespace hfine;

namespace {

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<bool(std::string&)> body;
};

ElectronModel driven_tls(double rabi, double gamma) {
  const BasisPtr basis = make_basis({"g", "e"});
  return ElectronModel(Operator(basis, 0.5 * rabi * oracle::sigma_x()), {{1, 0, gamma}}, {});
}

Operator tls_sz() {
  const BasisPtr basis = make_basis({"g", "e"});
  return Operator(basis, 0.5 * oracle::sigma_z());
}

// ---------------------------------------------------------------------------
// 1. adiabatic elimination against the joint Lindblad evolution

bool criterion_joint_oracle(std::string& note) {
  const double gamma = 250.0, rabi = 180.0, omega_n = 50.0;  // 0.25/ns damping
  const double a_z = 8.0, a_perp = 4.0;

  const ElectronModel electron = driven_tls(rabi, gamma);
  SteadyStateMap map(electron, tls_sz());
  const Matrix sminus = oracle::sigma_minus();

  const TransverseBlock raise{0, FlipDirection::kRaise,
                              Operator(electron.basis, 0.5 * a_perp * sminus), -omega_n};
  const TransverseBlock lower{0, FlipDirection::kLower,
                              Operator(electron.basis, 0.5 * a_perp * Matrix(sminus.adjoint())),
                              omega_n};
  const double h_down = -0.5 * a_z, h_up = 0.5 * a_z;
  const double w_sum = transition_rate_exact(map, raise, h_down, h_up).value +
                       transition_rate_exact(map, lower, h_up, h_down).value;
  if (!(w_sum > 0)) {
    note = "rate not positive";
    return false;
  }
  if (w_sum / gamma > 1e-3) {
    note = "W T_e scaling regime violated";
    return false;
  }

  // joint 4-level Lindblad system, assembled independently of the library
  const Matrix id2 = Matrix::Identity(2, 2);
  const Matrix sz = 0.5 * oracle::sigma_z();
  const Matrix ix = 0.5 * oracle::sigma_x();
  Matrix iy = Matrix::Zero(2, 2);
  iy(0, 1) = Complex(0, 0.5);
  iy(1, 0) = Complex(0, -0.5);

  const Matrix h_joint = oracle::kron(Matrix(0.5 * rabi * oracle::sigma_x()), id2) +
                         omega_n * oracle::kron(id2, sz) + a_z * oracle::kron(sz, sz) +
                         a_perp * (oracle::kron(ix, ix) + oracle::kron(iy, iy));
  const Matrix jump = oracle::kron(sminus, id2);
  const Matrix jdj = jump.adjoint() * jump;
  const Matrix id4 = Matrix::Identity(4, 4);
  Matrix joint_l = -kImag * (oracle::kron(id4, h_joint) - oracle::kron(h_joint.transpose(), id4));
  joint_l += gamma * (oracle::kron(jump.conjugate(), jump) -
                      0.5 * (oracle::kron(id4, jdj) + oracle::kron(jdj.transpose(), id4)));

  Eigen::ComplexEigenSolver<Matrix> es(joint_l);
  if (es.info() != Eigen::Success) {
    note = "joint eigensolve failed";
    return false;
  }
  Eigen::FullPivLU<Matrix> lu(es.eigenvectors());
  Matrix rho0 = Matrix::Zero(4, 4);
  rho0(1, 1) = 1.0;  // |g> (x) |up>
  const Vector coeffs = lu.solve(stack_columns(rho0));
  Matrix up_projector = Matrix::Zero(4, 4);
  up_projector(1, 1) = 1.0;
  up_projector(3, 3) = 1.0;
  const Vector obs = stack_columns(up_projector);

  auto p_up_at = [&](double t) {
    Complex value = 0;
    for (int k = 0; k < 16; ++k)
      value += coeffs(k) * std::exp(es.eigenvalues()(k) * t) *
               obs.conjugate().dot(es.eigenvectors().col(k));
    return value.real();
  };

  const double t1 = 1.0 / w_sum;
  const double p_inf = p_up_at(40.0 * t1);
  std::vector<double> ts, logs;
  for (int k = 0; k <= 40; ++k) {
    const double t = std::max(t1 / 10.0, 10.0 / gamma) + 0.9 * t1 * k / 40.0;
    ts.push_back(t);
    logs.push_back(std::log(std::abs(p_up_at(t) - p_inf)));
  }
  const double fitted = -oracle::linear_fit(ts, logs).slope;
  note = "fit " + format_number(fitted) + " vs rate " + format_number(w_sum);
  return std::abs(fitted - w_sum) <= 0.05 * w_sum;
}

// ---------------------------------------------------------------------------
// 2. Dyson-expanded rate against the exact resolvent at weak drive

bool criterion_perturbative_consistency(std::string& note) {
  NvParams params;
  params.rabi_a_mhz = 2.0 * 0.01;
  params.rabi_e_mhz = 10.0 * 0.01;

  Eigen::Matrix3d tensor;
  tensor << 0.35, 0.03, 0.12, 0.03, 0.27, -0.08, 0.12, -0.08, 0.5;
  const CarbonSite site = make_carbon_site(tensor);
  NvSystem sys = make_nv_system(params, NitrogenSite{}, {site});
  SteadyStateMap map(sys.model, sys.k_operator);

  double worst = 0;
  for (int nucleus : {0, 1}) {
    for (FlipDirection dir : {FlipDirection::kRaise, FlipDirection::kLower}) {
      BathConfig config{{0.0, -0.5}};
      if (!config.can_flip(sys.hfi, nucleus, dir)) continue;
      const double h_m = sys.detuning_of(config);
      const double h_p = sys.detuning_of(config.flipped(nucleus, dir));
      double exact = 0, pert = 0;
      for (const auto& block : sys.blocks) {
        if (block.nucleus != nucleus || block.direction != dir) continue;
        exact += transition_rate_exact(map, block, h_m, h_p).value;
        const RateResult r = transition_rate_perturbative(map, block, h_m, h_p);
        pert += r.value;
        if (std::abs(r.golden_part + r.coherent_part - r.value) > 1e-12) {
          note = "golden + coherent decomposition broken";
          return false;
        }
      }
      worst = std::max(worst, std::abs(pert - exact) / std::abs(exact));
    }
  }
  note = "worst relative deviation " + format_number(worst);
  return worst <= 0.01;
}

// ---------------------------------------------------------------------------
// 3. golden-rule Lorentzian shape

bool criterion_golden_shape(std::string& note) {
  const double gamma_i = 0.9, gamma_f = 1.7, recycle = 5.0;
  const double eps_i = 2.0, eps_f = 7.5, lambda = 0.31;
  const BasisPtr basis = make_basis({"i", "f", "x"});
  Matrix h = Matrix::Zero(3, 3);
  h(0, 0) = eps_i;
  h(1, 1) = eps_f;
  const ElectronModel model(Operator(basis, h),
                            {{0, 2, gamma_i}, {1, 2, gamma_f}, {2, 0, recycle}}, {});
  SteadyStateMap map(model, zero_operator(basis));
  Matrix v = Matrix::Zero(3, 3);
  v(1, 0) = lambda;
  const double width_true = 0.5 * (gamma_f + gamma_i);
  const double center_true = eps_f - eps_i;

  // sweep the block frequency across the line
  std::vector<double> omegas, inverse_rates;
  for (int k = -20; k <= 20; ++k) {
    const double omega = center_true + 0.2 * width_true * k;
    const TransverseBlock block{0, FlipDirection::kRaise, Operator(basis, v), omega};
    const double w = transition_rate_exact(map, block, 0.0, 0.0).value;
    omegas.push_back(omega);
    inverse_rates.push_back(1.0 / w);
  }
  // 1/W is quadratic in omega: fit a (omega - c)^2 + b
  const int n = static_cast<int>(omegas.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rhs(n);
  for (int k = 0; k < n; ++k) {
    design(k, 0) = omegas[k] * omegas[k];
    design(k, 1) = omegas[k];
    design(k, 2) = 1.0;
    rhs(k) = inverse_rates[k];
  }
  const Eigen::Vector3d sol = design.colPivHouseholderQr().solve(rhs);
  const double center_fit = -0.5 * sol(1) / sol(0);
  const double width_fit = std::sqrt(sol(2) / sol(0) - center_fit * center_fit);
  note = "center " + format_number(center_fit) + ", width " + format_number(width_fit);
  return std::abs(center_fit - center_true) <= 1e-3 * std::abs(center_true) &&
         std::abs(width_fit - width_true) <= 1e-3 * width_true;
}

// ---------------------------------------------------------------------------
// 4. CPT dip against the dark-resonance closed forms

bool criterion_cpt_dip(std::string& note) {
  NvParams params;
  params.rabi_a_mhz = 1.0;
  params.rabi_e_mhz = 1.0;
  params.strain_mhz = 0.0;
  const AnalyticSteadyState analytic = analytic_steady_state(params);

  std::vector<double> deltas(201);
  for (int i = 0; i < 201; ++i) deltas[i] = analytic.delta0 * (-5.0 + 10.0 * i / 200.0);
  const auto states = scan_nv_steady(params, deltas, 0);

  std::size_t i_min = 0;
  std::vector<double> p_ey(201);
  for (std::size_t i = 0; i < states.size(); ++i) {
    p_ey[i] = states[i].population(kNvEy);
    if (p_ey[i] < p_ey[i_min]) i_min = i;
  }
  if (std::abs(deltas[i_min]) > 0.051 * analytic.delta0) {  // one grid step around zero
    note = "dip minimum off center";
    return false;
  }

  // Lorentzian fit with the dip bottom as offset: delta^2 / (P - offset) is
  // linear in delta^2
  const double offset = p_ey[i_min];
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (i == i_min) continue;
    const double p = p_ey[i] - offset;
    if (p <= 0) continue;
    xs.push_back(deltas[i] * deltas[i]);
    ys.push_back(deltas[i] * deltas[i] / p);
  }
  const oracle::LinearFit fit = oracle::linear_fit(xs, ys);
  const double p0_fit = 1.0 / fit.slope;
  const double delta0_fit = std::sqrt(fit.intercept / fit.slope);
  const bool fit_ok = std::abs(p0_fit - analytic.p0) <= 0.10 * analytic.p0 &&
                      std::abs(delta0_fit - analytic.delta0) <= 0.10 * analytic.delta0;

  // singlet balance across the scan
  bool balance_ok = true;
  for (std::size_t i = 0; i < states.size(); i += 25) {
    const double expected = 2.0 * params.gamma_ce / params.gamma_s * p_ey[i];
    if (std::abs(states[i].population(kNvS) - expected) > 0.05 * expected) balance_ok = false;
  }
  note = "P0 " + format_number(p0_fit) + "/" + format_number(analytic.p0) + ", delta0 " +
         format_number(delta0_fit) + "/" + format_number(analytic.delta0) +
         (balance_ok ? "" : ", balance broken");
  return fit_ok && balance_ok;
}

// ---------------------------------------------------------------------------
// 5. narrowed distribution: birth-death vs Eq.-8 shape vs KMC

bool criterion_narrowed_distribution(std::string& note) {
  NarrowingParams params;
  params.n_spins = 40;
  params.a_par_mhz = 0.15;
  params.flip_rate = 1.0;
  params.depol_total = 1e-3;  // R / Gamma_dep = 1e3
  params.delta0 = params.sigma_eq();

  const FieldDistribution bd = birth_death_steady(params);

  // closed-form shape evaluated on the same grid, normalized
  FieldDistribution shape;
  const double c = params.flip_rate / (params.flip_rate + params.depol_total);
  const double ds2 = params.delta_s() * params.delta_s();
  for (std::size_t k = 0; k < bd.h.size(); ++k) {
    const double h2 = bd.h[k] * bd.h[k];
    shape.h.push_back(bd.h[k]);
    shape.p.push_back((1.0 + c * params.delta0 * params.delta0 / (h2 + ds2)) *
                      std::exp(-h2 / (2.0 * params.sigma_eq() * params.sigma_eq())));
  }
  shape.normalize();

  double sup = 0;
  for (std::size_t k = 0; k < bd.p.size(); ++k) sup = std::max(sup, std::abs(bd.p[k] - shape.p[k]));
  const double ratio = bd.sigma() / params.sigma_eq();

  KmcOptions options;
  options.seed = 2026;
  options.n_trajectories = 64;
  options.max_events_per_trajectory = 20000;  // 1.28e6 aggregate events
  const FieldDistribution kmc = kmc_field_histogram(params, options);
  double tv = 0;
  for (std::size_t k = 0; k < kmc.p.size(); ++k) tv += std::abs(kmc.p[k] - bd.p[k]);
  tv *= 0.5;

  note = "sup " + format_number(sup) + ", sigma ratio " + format_number(ratio) + ", kmc tv " +
         format_number(tv);
  return sup <= 0.02 && ratio < 0.5 && tv <= 0.03;
}

// ---------------------------------------------------------------------------
// 6. optimal narrowing against the closed form

bool criterion_optimal_narrowing(std::string& note) {
  NvParams nv;
  nv.rabi_e_mhz = 30.0;
  nv.detuning_a2_mhz = 4855.0;
  nv.strain_mhz = 0.0;
  std::vector<double> scan;
  for (int i = 0; i <= 32; ++i) scan.push_back(2.0 * std::pow(10.0, 1.5 * i / 32.0));
  const OptimalNarrowingResult result = optimal_narrowing(nv, 40, 0.15, 0.15, 1e-10, scan);
  note = "scan " + format_number(result.ratio_min) + " vs analytic " +
         format_number(result.analytic_ratio_min);
  return std::abs(result.ratio_min - result.analytic_ratio_min) <=
         0.20 * result.analytic_ratio_min;
}

// ---------------------------------------------------------------------------
// 7. 14N cooling curve

bool criterion_n14_curve(std::string& note) {
  NvParams params;
  params.rabi_e_mhz = 10.0;
  params.zeeman_mhz = 0.18;
  const NitrogenSite site;

  std::vector<double> rabis;
  for (int i = 0; i <= 40; ++i) rabis.push_back(0.5 * std::pow(240.0, i / 40.0));

  std::vector<double> pop(rabis.size()), pop_no_a2(rabis.size()), times(rabis.size());
  for (std::size_t i = 0; i < rabis.size(); ++i) {
    NvParams p = params;
    p.rabi_a_mhz = rabis[i];
    const N14Point point = n14_point(p, site, 0.0);
    pop[i] = point.pop_m0_0;
    times[i] = point.narrowing_time_us;
    p.a2_coupling = false;
    pop_no_a2[i] = n14_point(p, site, 0.0).pop_m0_0;
  }

  // single interior maximum, rising before and falling after
  std::size_t i_max = 0;
  for (std::size_t i = 0; i < pop.size(); ++i)
    if (pop[i] > pop[i_max]) i_max = i;
  bool shape_ok = i_max > 0 && i_max + 1 < pop.size();
  int maxima = 0;
  for (std::size_t i = 1; i + 1 < pop.size(); ++i)
    if (pop[i] > pop[i - 1] + 1e-12 && pop[i] > pop[i + 1] + 1e-12) ++maxima;
  shape_ok = shape_ok && maxima == 1 && pop[i_max] > pop.front() + 0.05 &&
             pop[i_max] > pop.back() + 0.05;
  shape_ok = shape_ok && std::abs(pop.front() - 1.0 / 3.0) < 0.07;  // thermal at weak drive

  // disabling the A2 path removes the decline
  bool no_decline = true;
  for (std::size_t i = 1; i < pop_no_a2.size(); ++i)
    if (pop_no_a2[i] < pop_no_a2[i - 1] - 1e-6) no_decline = false;

  const double t_opt = times[i_max];
  note = "max pop " + format_number(pop[i_max]) + " at " + format_number(rabis[i_max]) +
         " MHz, narrowing time " + format_number(t_opt) + " us";
  return shape_ok && no_decline && t_opt >= 100.0 && t_opt <= 400.0;
}

// ---------------------------------------------------------------------------
// 8. post-selection narrows the readout dip

bool criterion_post_selection(std::string& note) {
  Scenario scenario;
  scenario.nv.rabi_a_mhz = 2.0;
  scenario.nv.rabi_e_mhz = 10.0;
  scenario.nv.zeeman_mhz = 0.18;
  scenario.bath.n_spins = 40;
  scenario.bath.a_par_mhz = 0.1;
  scenario.bath.a_perp_mhz = 0.2;
  scenario.bath.gamma_c_per_us = per_s_to_per_us(2.5e-2);
  scenario.run.photon_factor_c = 12.0;
  scenario.run.rabi_a_readout_mhz = {3.2, 10.0, 8.0};
  scenario.run.omega_re_lo_mhz = -3.0;
  scenario.run.omega_re_hi_mhz = 3.0;
  scenario.run.omega_re_points = 601;

  const CptScanResult result = compute_cpt_scan(scenario, 0);
  note.clear();
  for (std::size_t r = 0; r < scenario.run.rabi_a_readout_mhz.size(); ++r) {
    const double w_avg = dip_fwhm(result.omega_re, result.averaged[r]);
    const double w_post = dip_fwhm(result.omega_re, result.post_selected[r]);
    note += (r ? "; " : "") + format_number(scenario.run.rabi_a_readout_mhz[r]) + " MHz: " +
            format_number(rad_us_to_mhz(w_avg)) + " -> " + format_number(rad_us_to_mhz(w_post));
    if (!(w_post < w_avg)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// 9. the full invariant suite

bool criterion_invariants(std::string& note) {
  const std::string path = std::string(HFINE_SCENARIO_DIR) + "/nv_default.cfg";
  const Scenario scenario = load_scenario(path);
  RunContext ctx;
  ctx.out_dir = "acceptance_validate_out";
  const int status = cmd_validate(scenario, ctx);
  note = "cmd_validate exit " + std::to_string(status);
  return status == 0;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"1 adiabatic rate vs joint Lindblad oracle (5%)", 10.0, criterion_joint_oracle},
      {"2 perturbative vs exact rate at x0.01 drive (1%)", 5.0, criterion_perturbative_consistency},
      {"3 golden-rule Lorentzian center/width (0.1%)", 5.0, criterion_golden_shape},
      {"4 CPT dip fit and balance relations (10%/5%)", 30.0, criterion_cpt_dip},
      {"5 narrowed distribution: shape 2%, ratio < 0.5, KMC 3%", 120.0,
       criterion_narrowed_distribution},
      {"6 optimal narrowing vs closed form (20%)", 120.0, criterion_optimal_narrowing},
      {"7 14N cooling curve and narrowing time [100,400] us", 60.0, criterion_n14_curve},
      {"8 post-selected dip narrower than averaged dip", 120.0, criterion_post_selection},
      {"9 invariant suites via cmd_validate", 300.0, criterion_invariants},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
      ok = criterion.body(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > criterion.budget_seconds) {
      ok = false;
      detail += detail.empty() ? "" : "; ";
      detail += "over runtime budget";
    }
    std::printf("[%s] criterion %s  (%.1fs%s%s)\n", ok ? "PASS" : "FAIL", criterion.name.c_str(),
                elapsed, detail.empty() ? "" : "; ", detail.c_str());
    if (!ok) ++failures;
  }
  std::printf("acceptance: %zu criteria, %d failed\n", criteria.size(), failures);
  return failures == 0 ? 0 : 1;
}
