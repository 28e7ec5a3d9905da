#include "hfine/solvers.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

namespace hfine {

namespace {

double operator_norm_scale(const Matrix& m) { return std::max(m.norm(), 1e-300); }

int count_null_eigenvalues(const Matrix& l, double tol_abs) {
  Eigen::ComplexEigenSolver<Matrix> es(l, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw SolverError("Liouvillian eigensolve failed");
  int n = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()(i)) < tol_abs) ++n;
  return n;
}

}  // namespace

DensityMatrix steady_state(const Superoperator& liouvillian, const BasisPtr& basis,
                           const SteadyStateOptions& opts) {
  const int d = liouvillian.dim;
  if (!basis || basis->dim() != d) throw BasisMismatch("steady_state: basis does not match Liouvillian");
  const int n = d * d;
  const double l_scale = operator_norm_scale(liouvillian.mat);

  if (opts.always_diagnose) {
    const int nulls = count_null_eigenvalues(liouvillian.mat, opts.degeneracy_tol * l_scale);
    if (nulls == 0) throw SolverError("steady_state: no null eigenvalue found");
    if (nulls > 1) throw DegenerateSteadyState("steady_state: Liouvillian null space has dimension > 1");
  }

  // Replace the first trace row with the constraint Tr rho = 1.
  Matrix system = liouvillian.mat;
  Vector rhs = Vector::Zero(n);
  for (int c = 0; c < n; ++c) system(0, c) = 0.0;
  for (int s = 0; s < d; ++s) system(0, s * d + s) = 1.0;
  rhs(0) = 1.0;

  // Fast path: partial-pivot LU plus residual check. A singular system can
  // still hand back one consistent solution, so a collapsed pivot also forces
  // the eigenvalue diagnosis.
  Eigen::PartialPivLU<Matrix> lu(system);
  Vector solution = lu.solve(rhs);

  const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
  const bool pivot_suspicious = !(pivots.minCoeff() > 1e-12 * pivots.maxCoeff());
  const double residual = (liouvillian.mat * solution).norm();
  const double unit_trace_defect = std::abs((system.row(0) * solution)(0) - 1.0);
  const bool residual_ok = residual <= opts.residual_tol * l_scale && unit_trace_defect <= 1e-10;
  if (!residual_ok || pivot_suspicious) {
    const int nulls = count_null_eigenvalues(liouvillian.mat, opts.degeneracy_tol * l_scale);
    if (nulls > 1)
      throw DegenerateSteadyState("steady_state: Liouvillian null space has dimension > 1");
    if (!residual_ok) throw SolverError("steady_state: residual check failed");
  }

  Matrix rho = unstack_columns(solution, d);
  rho = 0.5 * (rho + rho.adjoint().eval());  // scrub roundoff asymmetry
  rho /= rho.trace().real();
  return DensityMatrix::validated(basis, std::move(rho), 1e-12, 1e-10, opts.positivity_floor);
}

DensityMatrix steady_state(const ElectronModel& model, const Operator* extra_hamiltonian,
                           const SteadyStateOptions& opts) {
  if (!model.has_dissipation())
    throw NoDissipation("steady_state: model has no damping channel");
  return steady_state(build_liouvillian(model, extra_hamiltonian), model.basis, opts);
}

std::vector<DensityMatrix> evolve(const Superoperator& liouvillian, const DensityMatrix& rho0,
                                  std::span<const double> t_grid) {
  const int d = liouvillian.dim;
  if (rho0.dim() != d) throw BasisMismatch("evolve: state does not match Liouvillian");
  if (d * d > 4096) throw InvalidModel("evolve: desk-scale guard d^2 <= 4096 exceeded");

  std::vector<DensityMatrix> out;
  out.reserve(t_grid.size());

  Vector v = stack_columns(rho0.mat);
  double t_now = 0.0;
  double dt_cached = -1.0;
  Matrix propagator;

  for (double t : t_grid) {
    if (t < t_now) throw IntegrationError("evolve: time grid must be increasing and nonnegative");
    const double dt = t - t_now;
    if (dt > 0) {
      if (dt != dt_cached) {
        propagator = (dt * liouvillian.mat).exp();
        dt_cached = dt;
      }
      v = propagator * v;
      t_now = t;
    }
    Matrix rho = unstack_columns(v, d);
    const double scale = std::max(1.0, rho.norm());
    if ((rho - rho.adjoint()).norm() / scale > 1e-8)
      throw IntegrationError("evolve: Hermiticity violated beyond tolerance");
    if (std::abs(rho.trace() - 1.0) > 1e-9 * std::max(1.0, t))
      throw IntegrationError("evolve: trace drift beyond tolerance");
    rho = 0.5 * (rho + rho.adjoint().eval());
    DensityMatrix state;
    state.basis = rho0.basis;
    state.mat = std::move(rho);
    out.push_back(std::move(state));
  }
  return out;
}

Matrix resolvent_solve(const Matrix& kernel, double omega, const Matrix& x, int dim,
                       double residual_tol) {
  const int n = dim * dim;
  if (kernel.rows() != n || kernel.cols() != n) throw InvalidModel("resolvent_solve: kernel size");
  if (x.rows() != dim || x.cols() != dim) throw BasisMismatch("resolvent_solve: operand size");

  Matrix shifted = kernel;
  shifted.diagonal().array() += Complex(0.0, omega);

  Eigen::PartialPivLU<Matrix> lu(shifted);
  const Vector rhs = -stack_columns(x);
  const Vector y = lu.solve(rhs);
  const double x_scale = std::max(x.norm(), 1e-300);
  if (!((shifted * y - rhs).norm() <= residual_tol * x_scale))
    throw SingularResolvent("resolvent_solve: singular or near-singular system");
  return unstack_columns(y, dim);
}

Matrix liouvillian_integral(const Superoperator& liouvillian, double omega, const Matrix& x) {
  return resolvent_solve(liouvillian.mat, omega, x, liouvillian.dim);
}

Vector liouvillian_eigenvalues(const Superoperator& liouvillian) {
  Eigen::ComplexEigenSolver<Matrix> es(liouvillian.mat, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw SolverError("Liouvillian eigensolve failed");
  return es.eigenvalues();
}

}  // namespace hfine
