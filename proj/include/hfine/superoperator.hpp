#pragma once

#include <vector>

#include "hfine/operator_algebra.hpp"

namespace hfine {

// Column-stacking convention, fixed project-wide: vec(X) stacks the columns
// of X in basis order, vec(X)[c*d + r] = X(r, c). Under it
//   vec(A X B) = (B^T kron A) vec(X).
Vector stack_columns(const Matrix& x);
Matrix unstack_columns(const Vector& v, int dim);

// X -> A X and X -> X B as d^2 x d^2 matrices.
Matrix left_mult_superop(const Matrix& a);
Matrix right_mult_superop(const Matrix& b);

// Dense d^2 x d^2 map acting on column-stacked operators.
struct Superoperator {
  int dim = 0;    // Hilbert-space dimension d
  Matrix mat;     // d^2 x d^2

  Superoperator() = default;
  Superoperator(int dim_in, Matrix mat_in);

  Matrix apply(const Matrix& x) const;
  double norm() const { return mat.norm(); }

  Superoperator& operator+=(const Superoperator& other);
  Superoperator& operator-=(const Superoperator& other);
};

// Full Lindblad generator
//   L(X) = -i[H + extra, X] + sum_fi gamma_fi D[|f><i|] X + sum_s 2 gamma_phi D[|s><s|] X
// with D[L]X = L X L^dag - {L^dag L, X}/2.
Superoperator build_liouvillian(const ElectronModel& model, const Operator* extra_hamiltonian = nullptr);

// Split L = L_diag + L_offdiag (exact, entrywise):
//   L_diag    = -i[H^d, .] - {Gamma, .}/2 + dephasing dissipators,
//   L_offdiag = -i[H^nd, .] + jump refill terms  sum_fi gamma_fi |f><f| <i|.|i>.
// L_diag acts entrywise on matrix elements, which is what makes the closed-form
// resolvent below possible; the dephasing dissipator is itself entrywise and
// therefore lives entirely in L_diag.
struct DiagSplit {
  int dim = 0;
  Superoperator l_diag;
  Superoperator l_offdiag;
  std::vector<double> energies;      // eps_i: diagonal of H + extra (rad/us)
  std::vector<double> jump_widths;   // Gamma_i^jump = sum_f gamma_fi
  std::vector<double> total_widths;  // Gamma_i = jump width + 2 gamma_phi_i
  Matrix h_offdiag;                  // H^nd including any extra Hamiltonian
  std::vector<JumpChannel> refills;  // jump channels feeding L_offdiag

  // z_{j',j} = eps_{j'} - eps_j - omega - i * w(j',j) where w is
  // (Gamma_{j'} + Gamma_j)/2 off the diagonal and the bare jump width on it
  // (population damping is exactly refilled by the dephasing jump term, so
  // dephasing drops out of diagonal entries).
  Complex z(int row, int col, double omega) const;

  // L_offdiag applied directly (cheaper than the matrix form for hot paths).
  Matrix apply_offdiag(const Matrix& x) const;
};

// build_matrices=false skips assembling the two superoperator matrices (the
// entrywise z data, H^nd and the refill list are enough for the rate paths).
DiagSplit split_diag_offdiag(const ElectronModel& model, const Operator* extra_hamiltonian = nullptr,
                             bool build_matrices = true);

// Closed-form action of G^d = (L_diag + i omega)^{-1}: (G^d X)_{j'j} = i X_{j'j} / z_{j'j}.
// Throws SingularResolvent when some |z| vanishes.
Matrix resolvent_diag_apply(const DiagSplit& split, double omega, const Matrix& x);

}  // namespace hfine
