#include "hfine/hyperfine.hpp"

#include <algorithm>
#include <cmath>

#include "hfine/parallel.hpp"
#include "hfine/solvers.hpp"

namespace hfine {

double BathConfig::field(const LongitudinalHfi& hfi) const {
  if (projections.size() != hfi.field_coefficients.size())
    throw InvalidModel("configuration size does not match field coefficients");
  double h = 0;
  for (std::size_t k = 0; k < projections.size(); ++k) h += hfi.field_coefficients[k] * projections[k];
  return h;
}

bool BathConfig::can_flip(const LongitudinalHfi& hfi, int nucleus, FlipDirection dir) const {
  if (nucleus < 0 || nucleus >= static_cast<int>(projections.size())) return false;
  const double spin = hfi.spins.at(static_cast<std::size_t>(nucleus));
  const double target =
      projections[static_cast<std::size_t>(nucleus)] + (dir == FlipDirection::kRaise ? 1.0 : -1.0);
  return target <= spin + 1e-9 && target >= -spin - 1e-9;
}

BathConfig BathConfig::flipped(int nucleus, FlipDirection dir) const {
  BathConfig out = *this;
  out.projections.at(static_cast<std::size_t>(nucleus)) += dir == FlipDirection::kRaise ? 1.0 : -1.0;
  return out;
}

SteadyStateMap::SteadyStateMap(ElectronModel model, Operator k_electron_operator)
    : model_(std::move(model)), k_op_(std::move(k_electron_operator)) {
  require_same_basis(model_.hamiltonian, k_op_, "steady-state map");
  k_op_.require_hermitian(1e-12, "longitudinal electron operator");
  base_ = build_liouvillian(model_).mat;
  commutator_ = -kImag * (left_mult_superop(k_op_.mat) - right_mult_superop(k_op_.mat));
  anticommutator_ = left_mult_superop(k_op_.mat) + right_mult_superop(k_op_.mat);
}

std::int64_t SteadyStateMap::quantize(double h) {
  return static_cast<std::int64_t>(std::llround(h * 1e9));
}

const DensityMatrix& SteadyStateMap::at(double h_m, double h_n) {
  const std::int64_t qm = quantize(h_m);
  const std::int64_t qn = quantize(h_n);
  const Key key{std::min(qm, qn), std::max(qm, qn)};  // P_{m,n} = P_{n,m}
  {
    std::scoped_lock lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }

  const double h_mid = 0.5 * (static_cast<double>(qm) + static_cast<double>(qn)) * 1e-9;
  try {
    if (!model_.has_dissipation()) throw NoDissipation("model has no damping channel");
    DensityMatrix rho =
        steady_state(Superoperator(model_.dim(), shifted_liouvillian(h_mid)), model_.basis);
    std::scoped_lock lock(mutex_);
    return cache_.emplace(key, std::move(rho)).first->second;
  } catch (const Error& e) {
    throw SolverError("steady-state map at h_m=" + std::to_string(h_m) + ", h_n=" +
                      std::to_string(h_n) + ": " + e.what());
  }
}

void SteadyStateMap::precompute(std::span<const double> fields, int threads) {
  std::vector<double> missing;
  missing.reserve(fields.size());
  {
    std::scoped_lock lock(mutex_);
    for (double h : fields) {
      const std::int64_t q = quantize(h);
      if (cache_.find(Key{q, q}) == cache_.end()) missing.push_back(h);
    }
  }
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end(),
                            [](double a, double b) { return quantize(a) == quantize(b); }),
                missing.end());

  if (!model_.has_dissipation()) throw NoDissipation("model has no damping channel");
  std::vector<DensityMatrix> solved(missing.size());
  parallel_for(
      missing.size(),
      [&](std::size_t i) {
        const double h = static_cast<double>(quantize(missing[i])) * 1e-9;
        solved[i] = steady_state(Superoperator(model_.dim(), shifted_liouvillian(h)), model_.basis);
      },
      threads);
  std::scoped_lock lock(mutex_);
  for (std::size_t i = 0; i < missing.size(); ++i) {
    const std::int64_t q = quantize(missing[i]);
    cache_.emplace(Key{q, q}, std::move(solved[i]));
  }
}

}  // namespace hfine
