#pragma once

#include <complex>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hfine/errors.hpp"

namespace hfine {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr Complex kImag{0.0, 1.0};

// Labeled finite Hilbert space. Kept behind a shared_ptr so operators built
// from the same basis compare cheaply.
class ElectronBasis {
 public:
  static constexpr int kMaxDim = 64;  // desk-scale guard

  explicit ElectronBasis(std::vector<std::string> labels);

  int dim() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(int i) const { return labels_.at(static_cast<std::size_t>(i)); }
  int index(std::string_view label) const;  // throws BasisMismatch when absent

  bool operator==(const ElectronBasis& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
};

using BasisPtr = std::shared_ptr<const ElectronBasis>;

BasisPtr make_basis(std::vector<std::string> labels);

inline bool same_basis(const BasisPtr& a, const BasisPtr& b) {
  return a == b || (a && b && *a == *b);
}

// Dense operator on an ElectronBasis. Entries are rad/us when used as a
// Hamiltonian, dimensionless as observables/states.
struct Operator {
  BasisPtr basis;
  Matrix mat;

  Operator() = default;
  Operator(BasisPtr basis_in, Matrix mat_in);

  int dim() const { return basis ? basis->dim() : 0; }
  double hermiticity_defect() const;  // ||X - X^dag|| / max(1, ||X||), Frobenius
  bool is_hermitian(double rel_tol = 1e-12) const { return hermiticity_defect() <= rel_tol; }
  void require_hermitian(double rel_tol, const char* what) const;

  Operator adjoint() const { return Operator(basis, mat.adjoint()); }
};

Operator zero_operator(const BasisPtr& basis);
Operator identity_operator(const BasisPtr& basis);
Operator ket_bra(const BasisPtr& basis, int ket, int bra);
Operator ket_bra(const BasisPtr& basis, std::string_view ket, std::string_view bra);

void require_same_basis(const Operator& a, const Operator& b, const char* what);

// One Lindblad jump |to><from| at the given rate (1/us).
struct JumpChannel {
  int from = 0;
  int to = 0;
  double rate = 0.0;
};

// Pure dephasing of one state: Lindblad operator sqrt(2*rate)|s><s|, so a
// coherence <s|rho|g> picks up an extra decay `rate`.
struct DephasingChannel {
  int state = 0;
  double rate = 0.0;
};

struct ElectronModel {
  BasisPtr basis;
  Operator hamiltonian;
  std::vector<JumpChannel> jumps;
  std::vector<DephasingChannel> dephasings;

  ElectronModel() = default;
  ElectronModel(Operator hamiltonian_in, std::vector<JumpChannel> jumps_in,
                std::vector<DephasingChannel> dephasings_in);

  int dim() const { return basis ? basis->dim() : 0; }
  bool has_dissipation() const;
  // Total jump width Gamma_i = sum_f gamma_fi of state i.
  double jump_width(int state) const;
  double dephasing_rate(int state) const;
  // Width entering coherence decay: jump width plus 2*gamma_phi.
  double total_width(int state) const { return jump_width(state) + 2.0 * dephasing_rate(state); }
};

// Unit-trace state. `validated` enforces trace, Hermiticity and positivity.
struct DensityMatrix {
  BasisPtr basis;
  Matrix mat;

  static DensityMatrix validated(BasisPtr basis, Matrix mat, double trace_tol = 1e-10,
                                 double herm_tol = 1e-10, double positivity_floor = -1e-8);

  int dim() const { return basis ? basis->dim() : 0; }
  double population(int state) const { return mat(state, state).real(); }
  double population(std::string_view label) const;
  Complex expectation(const Operator& obs) const;
};

}  // namespace hfine
