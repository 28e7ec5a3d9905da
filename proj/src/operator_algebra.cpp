#include "hfine/operator_algebra.hpp"

#include <algorithm>
#include <unordered_set>

#include <Eigen/Eigenvalues>

namespace hfine {

ElectronBasis::ElectronBasis(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw InvalidModel("basis needs at least one state");
  if (static_cast<int>(labels_.size()) > kMaxDim)
    throw InvalidModel("basis dimension exceeds desk-scale guard of 64");
  std::unordered_set<std::string> seen;
  for (const auto& l : labels_) {
    if (!seen.insert(l).second) throw InvalidModel("duplicate basis label: " + l);
  }
}

int ElectronBasis::index(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw BasisMismatch("no state labeled '" + std::string(label) + "'");
  return static_cast<int>(it - labels_.begin());
}

BasisPtr make_basis(std::vector<std::string> labels) {
  return std::make_shared<const ElectronBasis>(std::move(labels));
}

Operator::Operator(BasisPtr basis_in, Matrix mat_in) : basis(std::move(basis_in)), mat(std::move(mat_in)) {
  if (!basis) throw InvalidModel("operator without basis");
  if (mat.rows() != basis->dim() || mat.cols() != basis->dim())
    throw BasisMismatch("operator entries do not match basis dimension");
}

double Operator::hermiticity_defect() const {
  const double scale = std::max(1.0, mat.norm());
  return (mat - mat.adjoint()).norm() / scale;
}

void Operator::require_hermitian(double rel_tol, const char* what) const {
  if (hermiticity_defect() > rel_tol)
    throw NonHermitianOperator(std::string(what) + " is not Hermitian to tolerance");
}

Operator zero_operator(const BasisPtr& basis) {
  return Operator(basis, Matrix::Zero(basis->dim(), basis->dim()));
}

Operator identity_operator(const BasisPtr& basis) {
  return Operator(basis, Matrix::Identity(basis->dim(), basis->dim()));
}

Operator ket_bra(const BasisPtr& basis, int ket, int bra) {
  Matrix m = Matrix::Zero(basis->dim(), basis->dim());
  m(ket, bra) = 1.0;
  return Operator(basis, std::move(m));
}

Operator ket_bra(const BasisPtr& basis, std::string_view ket, std::string_view bra) {
  return ket_bra(basis, basis->index(ket), basis->index(bra));
}

void require_same_basis(const Operator& a, const Operator& b, const char* what) {
  if (!same_basis(a.basis, b.basis)) throw BasisMismatch(std::string(what) + ": basis mismatch");
}

ElectronModel::ElectronModel(Operator hamiltonian_in, std::vector<JumpChannel> jumps_in,
                             std::vector<DephasingChannel> dephasings_in)
    : basis(hamiltonian_in.basis),
      hamiltonian(std::move(hamiltonian_in)),
      jumps(std::move(jumps_in)),
      dephasings(std::move(dephasings_in)) {
  hamiltonian.require_hermitian(1e-12, "model Hamiltonian");
  const int d = dim();
  for (const auto& j : jumps) {
    if (j.from < 0 || j.from >= d || j.to < 0 || j.to >= d)
      throw InvalidModel("jump channel state index out of range");
    if (j.from == j.to) throw InvalidModel("jump channel must connect distinct states");
    if (j.rate < 0) throw InvalidModel("jump rate must be nonnegative");
  }
  for (const auto& p : dephasings) {
    if (p.state < 0 || p.state >= d) throw InvalidModel("dephasing state index out of range");
    if (p.rate < 0) throw InvalidModel("dephasing rate must be nonnegative");
  }
}

bool ElectronModel::has_dissipation() const {
  for (const auto& j : jumps)
    if (j.rate > 0) return true;
  for (const auto& p : dephasings)
    if (p.rate > 0) return true;
  return false;
}

double ElectronModel::jump_width(int state) const {
  double w = 0;
  for (const auto& j : jumps)
    if (j.from == state) w += j.rate;
  return w;
}

double ElectronModel::dephasing_rate(int state) const {
  double r = 0;
  for (const auto& p : dephasings)
    if (p.state == state) r += p.rate;
  return r;
}

DensityMatrix DensityMatrix::validated(BasisPtr basis, Matrix mat, double trace_tol, double herm_tol,
                                       double positivity_floor) {
  if (!basis || mat.rows() != basis->dim() || mat.cols() != basis->dim())
    throw BasisMismatch("density matrix does not match basis");
  const Complex tr = mat.trace();
  if (std::abs(tr - 1.0) > trace_tol) throw SolverError("density matrix trace deviates from 1");
  const double scale = std::max(1.0, mat.norm());
  if ((mat - mat.adjoint()).norm() / scale > herm_tol)
    throw SolverError("density matrix is not Hermitian to tolerance");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (mat + mat.adjoint()));
  if (es.info() != Eigen::Success) throw SolverError("density matrix eigensolve failed");
  if (es.eigenvalues().minCoeff() < positivity_floor)
    throw SolverError("density matrix has a negative eigenvalue beyond tolerance");
  DensityMatrix rho;
  rho.basis = std::move(basis);
  rho.mat = std::move(mat);
  return rho;
}

double DensityMatrix::population(std::string_view label) const { return population(basis->index(label)); }

Complex DensityMatrix::expectation(const Operator& obs) const {
  if (!same_basis(basis, obs.basis)) throw BasisMismatch("expectation: basis mismatch");
  return (obs.mat * mat).trace();
}

}  // namespace hfine
