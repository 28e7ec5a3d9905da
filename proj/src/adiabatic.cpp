#include "hfine/adiabatic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hfine/solvers.hpp"
#include "hfine/superoperator.hpp"

namespace hfine {

namespace {

double real_trace_product(const Matrix& a, const Matrix& b) {
  // Re Tr(a b) without forming the product
  return (a.transpose().cwiseProduct(b)).sum().real();
}

}  // namespace

RateResult transition_rate_exact(SteadyStateMap& map, const TransverseBlock& block, double h_m,
                                 double h_p) {
  const DensityMatrix& p_mm = map.at(h_m);
  const Matrix kernel = map.shifted_liouvillian(0.5 * (h_m + h_p));
  const Matrix x = block.electron_operator.mat * p_mm.mat;
  const Matrix y = resolvent_solve(kernel, block.frequency, x, map.model().dim());
  RateResult r;
  r.method = RateMethod::kExact;
  r.value = 2.0 * real_trace_product(block.electron_operator.mat.adjoint(), y);
  return r;
}

RateResult transition_rate_exact_k(SteadyStateMap& map, const TransverseBlock& block, double h_m,
                                   double h_p) {
  const DensityMatrix& p_mm = map.at(h_m);
  // kernel gains the anticommutator term -i {., K_pm}/2, K_pm = O (h_p - h_m)
  Matrix kernel = map.shifted_liouvillian(0.5 * (h_m + h_p));
  kernel -= 0.5 * kImag * (h_p - h_m) * map.anticommutator_part();
  const Matrix x = block.electron_operator.mat * p_mm.mat;
  const Matrix y = resolvent_solve(kernel, block.frequency, x, map.model().dim());
  RateResult r;
  r.method = RateMethod::kExactK;
  r.value = 2.0 * real_trace_product(block.electron_operator.mat.adjoint(), y);
  return r;
}

RateResult transition_rate_perturbative(SteadyStateMap& map, const TransverseBlock& block,
                                        double h_m, double h_p, bool golden_only) {
  const int d = map.model().dim();
  const DensityMatrix& p_mm = map.at(h_m);
  const Operator shift(map.k_electron_operator().basis,
                       0.5 * (h_m + h_p) * map.k_electron_operator().mat);
  const DiagSplit split = split_diag_offdiag(map.model(), &shift, /*build_matrices=*/false);
  const double omega = block.frequency;
  const Matrix& v = block.electron_operator.mat;

  RateResult r;
  r.method = golden_only ? RateMethod::kGoldenOnly : RateMethod::kPerturbative;

  // golden-rule part: sum over matrix elements of V
  for (int i = 0; i < d; ++i) {
    for (int f = 0; f < d; ++f) {
      const double v2 = std::norm(v(f, i));
      if (v2 == 0.0) continue;
      const Complex z = split.z(f, i, omega);
      if (std::abs(z) == 0.0) throw SingularResolvent("golden rule: z vanishes");
      const double width = -z.imag();
      r.golden_part += 2.0 * v2 * std::max(p_mm.population(i), 0.0) * width / std::norm(z);
    }
  }

  if (golden_only) {
    r.value = r.golden_part;
    return r;
  }

  const Matrix x = v * p_mm.mat;
  const Matrix a = resolvent_diag_apply(split, omega, x);           // G^d V P
  const Matrix c = resolvent_diag_apply(split, omega, split.apply_offdiag(a));  // G^d L^nd G^d V P
  const double w_total = -2.0 * real_trace_product(v.adjoint(), a - c);
  r.value = w_total;
  r.coherent_part = w_total - r.golden_part;
  return r;
}

RateResult transition_rate(SteadyStateMap& map, const TransverseBlock& block, double h_m,
                           double h_p, RateMethod method) {
  switch (method) {
    case RateMethod::kExact:
      return transition_rate_exact(map, block, h_m, h_p);
    case RateMethod::kExactK:
      return transition_rate_exact_k(map, block, h_m, h_p);
    case RateMethod::kPerturbative:
      return transition_rate_perturbative(map, block, h_m, h_p);
    case RateMethod::kGoldenOnly:
      return transition_rate_perturbative(map, block, h_m, h_p, /*golden_only=*/true);
  }
  throw Error("unreachable rate method");
}

double total_flip_rate(SteadyStateMap& map, const LongitudinalHfi& hfi,
                       std::span<const TransverseBlock> blocks, const BathConfig& config,
                       int nucleus, FlipDirection dir, RateMethod method) {
  if (!config.can_flip(hfi, nucleus, dir)) return 0.0;
  const double h_m = config.field(hfi);
  const double h_p = config.flipped(nucleus, dir).field(hfi);
  double total = 0.0;
  for (const auto& block : blocks) {
    if (block.nucleus != nucleus || block.direction != dir) continue;
    total += transition_rate(map, block, h_m, h_p, method).value;
  }
  return total;
}

double dephasing_rate(SteadyStateMap& map, double h_m, double h_n) {
  const DensityMatrix& p_mn = map.at(h_m, h_n);
  const Operator& o = map.k_electron_operator();
  const Matrix k_mn = (h_m - h_n) * o.mat;
  const Complex mean = (k_mn * p_mn.mat).trace();
  const int d = map.model().dim();
  const Matrix k_tilde = k_mn - mean * Matrix::Identity(d, d);

  Matrix arg = k_tilde * p_mn.mat;
  // Project out the steady-state component before the singular omega = 0 solve;
  // <Ktilde>_mn = 0 by construction, so the removed part only carries roundoff.
  const Complex overlap = arg.trace();
  const double scale = std::max(k_tilde.norm() * p_mn.mat.norm(), 1e-300);
  if (std::abs(overlap) > 1e-10 * std::max(1.0, scale))
    throw ProjectionError("dephasing_rate: steady-state overlap did not vanish");
  arg -= overlap * p_mn.mat;

  // (L) Y = -arg with the trace of Y pinned to zero (omega = 0 resolvent on the
  // range of L).
  const int n = d * d;
  Matrix system = map.shifted_liouvillian(0.5 * (h_m + h_n));
  Vector rhs = -stack_columns(arg);
  for (int c2 = 0; c2 < n; ++c2) system(0, c2) = 0.0;
  for (int s = 0; s < d; ++s) system(0, s * d + s) = 1.0;
  rhs(0) = 0.0;
  Eigen::PartialPivLU<Matrix> lu(system);
  const Vector y = lu.solve(rhs);
  if (!((system * y - rhs).norm() <= 1e-9 * std::max(1.0, rhs.norm())))
    throw SingularResolvent("dephasing_rate: projected system is singular or ill-conditioned");

  const Matrix y_mat = unstack_columns(y, d);
  return real_trace_product(k_tilde, y_mat);
}

double cross_rate(SteadyStateMap& map, const TransverseBlock& block, double h_m, double h_n,
                  double h_p_of_m) {
  const DensityMatrix& p_mn = map.at(h_m, h_n);
  const DensityMatrix& p_pn = map.at(h_p_of_m, h_n);
  const Matrix& v = block.electron_operator.mat;
  const Complex v_mean = (v * p_mn.mat).trace();
  const Matrix arg = v * p_mn.mat - v_mean * p_pn.mat;

  const Matrix kernel = map.shifted_liouvillian(0.5 * (h_p_of_m + h_n));
  const Matrix y = resolvent_solve(kernel, block.frequency, arg, map.model().dim());
  return 2.0 * real_trace_product(v.adjoint(), y);
}

CoherenceDecay coherence_decay_rate(SteadyStateMap& map, const LongitudinalHfi& hfi,
                                    std::span<const TransverseBlock> blocks, const BathConfig& m,
                                    const BathConfig& n) {
  const double h_m = m.field(hfi);
  const double h_n = n.field(hfi);
  CoherenceDecay out;
  out.dephasing = dephasing_rate(map, h_m, h_n);
  for (const auto& block : blocks) {
    // W_{p<-m|n} and W_{p<-n|m}
    if (m.can_flip(hfi, block.nucleus, block.direction)) {
      const double h_p = m.flipped(block.nucleus, block.direction).field(hfi);
      out.flip_sum += 0.5 * cross_rate(map, block, h_m, h_n, h_p);
    }
    if (n.can_flip(hfi, block.nucleus, block.direction)) {
      const double h_p = n.flipped(block.nucleus, block.direction).field(hfi);
      out.flip_sum += 0.5 * cross_rate(map, block, h_n, h_m, h_p);
    }
  }
  out.total = out.dephasing + out.flip_sum;
  return out;
}

double MeanFieldGenerator::mean_field(double h) const {
  const DensityMatrix& p = map_->at(h);
  return (map_->k_electron_operator().mat * p.mat).trace().real();
}

Eigen::MatrixXd relaxation_generator(int n_configs, std::span<const RateEdge> edges) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n_configs, n_configs);
  double scale = 0.0;
  for (const auto& e : edges) scale = std::max(scale, std::abs(e.rate));
  const double floor = -1e-8 * std::max(scale, 1e-300);
  for (const auto& e : edges) {
    if (e.to < 0 || e.to >= n_configs || e.from < 0 || e.from >= n_configs)
      throw InvalidModel("relaxation_generator: edge index out of range");
    if (e.to == e.from) throw InvalidModel("relaxation_generator: self edge");
    double w = e.rate;
    if (w < 0) {
      if (w < floor) throw NegativeRate("relaxation_generator: rate below negative-rate floor");
      w = 0.0;
    }
    g(e.to, e.from) += w;
    g(e.from, e.from) -= w;
  }
  return g;
}

ValidityReport timescale_report(SteadyStateMap& map, const LongitudinalHfi& hfi,
                                std::span<const TransverseBlock> blocks,
                                std::span<const BathConfig> sample_configs) {
  ValidityReport report;

  // Electron time scale from the spectral gap at a representative field (the
  // first sample configuration, or zero field).
  const double h0 = sample_configs.empty() ? 0.0 : sample_configs.front().field(hfi);
  const Operator shift(map.k_electron_operator().basis, h0 * map.k_electron_operator().mat);
  const Superoperator l0 = build_liouvillian(map.model(), &shift);
  const Vector eigs = liouvillian_eigenvalues(l0);
  const double l_scale = std::max(l0.norm(), 1e-300);
  double min_gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < eigs.size(); ++i) {
    const double re = -eigs(i).real();
    if (std::abs(eigs(i)) < 1e-9 * l_scale) continue;  // null mode
    if (re > 1e-12 * l_scale) min_gap = std::min(min_gap, re);
  }
  report.t_electron = std::isfinite(min_gap) ? 1.0 / min_gap : std::numeric_limits<double>::infinity();

  MeanFieldGenerator mf(map);
  double max_coh = 0.0, max_phi = 0.0, max_w = 0.0;
  for (std::size_t a = 0; a < sample_configs.size(); ++a) {
    const double h_a = sample_configs[a].field(hfi);
    for (std::size_t b = a + 1; b < sample_configs.size(); ++b) {
      const double h_b = sample_configs[b].field(hfi);
      max_coh = std::max(max_coh, std::abs((h_a - h_b) * mf.mean_field(0.5 * (h_a + h_b))));
      max_phi = std::max(max_phi, std::abs(dephasing_rate(map, h_a, h_b)));
    }
    for (const auto& block : blocks) {
      if (!sample_configs[a].can_flip(hfi, block.nucleus, block.direction)) continue;
      const double h_p = sample_configs[a].flipped(block.nucleus, block.direction).field(hfi);
      max_w = std::max(max_w, transition_rate_exact(map, block, h_a, h_p).value);
    }
  }

  const double inf = std::numeric_limits<double>::infinity();
  report.t_coherence = max_coh > 0 ? 1.0 / max_coh : inf;
  report.t_dephasing = max_phi > 0 ? 1.0 / max_phi : inf;
  report.t_relaxation = max_w > 0 ? 1.0 / max_w : inf;
  const double slow = std::min({report.t_coherence, report.t_dephasing, report.t_relaxation});
  report.separation_ratio = slow > 0 && std::isfinite(slow) ? report.t_electron / slow : 0.0;
  report.violated = report.separation_ratio > 0.1;
  return report;
}

}  // namespace hfine
