#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "hfine/operator_algebra.hpp"

namespace hfine {

// Longitudinal hyperfine coupling K = O * h with O a fixed Hermitian electron
// operator (e.g. the ground spin-z) and h the nuclear field. field_coefficients
// holds the per-nucleus couplings a_k in rad/us per unit spin projection;
// index 0 is the nitrogen when present, carbons follow. spins holds the total
// spin per site (1 for the nitrogen, 1/2 for carbons).
struct LongitudinalHfi {
  Operator electron_operator;
  std::vector<double> field_coefficients;
  std::vector<double> spins;

  Operator k_operator(double h) const { return Operator(electron_operator.basis, h * electron_operator.mat); }
};

enum class FlipDirection { kRaise, kLower };

inline FlipDirection reverse(FlipDirection d) {
  return d == FlipDirection::kRaise ? FlipDirection::kLower : FlipDirection::kRaise;
}

// One frequency component of the transverse hyperfine coupling for one
// nuclear flip: <p|V(t)|m> = electron_operator * exp(-i frequency t). A single
// physical flip usually contributes several blocks at different electron
// transition gaps; their rates are additive.
struct TransverseBlock {
  int nucleus = 0;
  FlipDirection direction = FlipDirection::kRaise;
  Operator electron_operator;
  double frequency = 0.0;  // omega_{p,m}, rad/us

  TransverseBlock paired() const {
    return TransverseBlock{nucleus, reverse(direction), electron_operator.adjoint(), -frequency};
  }
};

// Product configuration of the nuclear register. projections[0] is the
// nitrogen m_0 (-1, 0, +1) when a nitrogen is present; carbons are +-1/2.
struct BathConfig {
  std::vector<double> projections;

  double field(const LongitudinalHfi& hfi) const;  // h_m = sum_k a_k m_k
  bool can_flip(const LongitudinalHfi& hfi, int nucleus, FlipDirection dir) const;
  BathConfig flipped(int nucleus, FlipDirection dir) const;
};

// Cache of electron steady states keyed by the quantized nuclear field pair
// (h_m, h_n); the (m,n) block uses the extra Hamiltonian O*(h_m+h_n)/2.
// Exact solve per key, no interpolation. Keys are rounded to 1e-9 rad/us.
// at() is safe to call concurrently; node-based storage keeps returned
// references valid across inserts.
class SteadyStateMap {
 public:
  SteadyStateMap(ElectronModel model, Operator k_electron_operator);

  const DensityMatrix& at(double h_m, double h_n);
  const DensityMatrix& at(double h) { return at(h, h); }

  // Parallel bulk solve over diagonal keys with a deterministic merge.
  void precompute(std::span<const double> fields, int threads = 0);

  const ElectronModel& model() const { return model_; }
  const Operator& k_electron_operator() const { return k_op_; }
  std::size_t size() const {
    std::scoped_lock lock(mutex_);
    return cache_.size();
  }

  // L_0 + h_mid * (-i[O, .]); the shift enters linearly, so scans reuse the
  // assembled parts instead of rebuilding the Liouvillian per key.
  Matrix shifted_liouvillian(double h_mid) const { return base_ + h_mid * commutator_; }
  const Matrix& anticommutator_part() const { return anticommutator_; }  // {., O}

  static std::int64_t quantize(double h);

 private:
  using Key = std::pair<std::int64_t, std::int64_t>;

  ElectronModel model_;
  Operator k_op_;
  Matrix base_;           // Liouvillian at h = 0
  Matrix commutator_;     // -i (I kron O - O^T kron I)
  Matrix anticommutator_; // I kron O + O^T kron I
  std::map<Key, DensityMatrix> cache_;
  mutable std::mutex mutex_;
};

}  // namespace hfine
