#pragma once

#include <span>
#include <vector>

#include "hfine/operator_algebra.hpp"
#include "hfine/superoperator.hpp"

namespace hfine {

struct SteadyStateOptions {
  double residual_tol = 1e-10;     // ||L rho|| <= residual_tol * ||L||
  double degeneracy_tol = 1e-9;    // second eigenvalue threshold, relative to ||L||
  double positivity_floor = -1e-8;
  // Eigenvalue-based degeneracy diagnosis runs whenever the LU factorization
  // looks rank-deficient, and unconditionally when `always_diagnose` is set.
  bool always_diagnose = false;
};

// Unique steady state of a Liouvillian: replaces one row of the d^2 system by
// the trace constraint, solves by dense full-pivot LU and verifies the
// residual. Throws DegenerateSteadyState when the null space has dimension
// greater than one and SolverError when the residual check fails.
DensityMatrix steady_state(const Superoperator& liouvillian, const BasisPtr& basis,
                           const SteadyStateOptions& opts = {});

// Convenience: builds the Liouvillian and rejects closed systems (NoDissipation).
DensityMatrix steady_state(const ElectronModel& model, const Operator* extra_hamiltonian = nullptr,
                           const SteadyStateOptions& opts = {});

// rho(t) on an increasing time grid (t >= 0) by dense matrix-exponential
// stepping. Trace is renormalization-free; drift beyond tolerance or loss of
// Hermiticity raises IntegrationError.
std::vector<DensityMatrix> evolve(const Superoperator& liouvillian, const DensityMatrix& rho0,
                                  std::span<const double> t_grid);

// Y = integral_0^inf e^{i omega t} e^{L t} X dt, computed as the solution of
// (L + i omega) Y = -X. Residual is checked against 1e-10 ||X||.
Matrix liouvillian_integral(const Superoperator& liouvillian, double omega, const Matrix& x);

// Same Fourier-Laplace integral for an arbitrary d^2 x d^2 kernel (used by the
// exact-K rate variant whose kernel is not a plain Liouvillian).
Matrix resolvent_solve(const Matrix& kernel, double omega, const Matrix& x, int dim,
                       double residual_tol = 1e-10);

// All eigenvalues of the Liouvillian (dense solve; desk scale only).
Vector liouvillian_eigenvalues(const Superoperator& liouvillian);

}  // namespace hfine
