#include "hfine/superoperator.hpp"

#include <cmath>

namespace hfine {

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix effective_hamiltonian(const ElectronModel& model, const Operator* extra) {
  Matrix h = model.hamiltonian.mat;
  if (extra != nullptr) {
    require_same_basis(model.hamiltonian, *extra, "build_liouvillian extra Hamiltonian");
    extra->require_hermitian(1e-12, "extra Hamiltonian");
    h += extra->mat;
  }
  return h;
}

}  // namespace

Vector stack_columns(const Matrix& x) {
  return Eigen::Map<const Vector>(x.data(), x.size());
}

Matrix unstack_columns(const Vector& v, int dim) {
  return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

Matrix left_mult_superop(const Matrix& a) {
  return kron(Matrix::Identity(a.rows(), a.cols()), a);
}

Matrix right_mult_superop(const Matrix& b) {
  return kron(b.transpose(), Matrix::Identity(b.rows(), b.cols()));
}

Superoperator::Superoperator(int dim_in, Matrix mat_in) : dim(dim_in), mat(std::move(mat_in)) {
  if (mat.rows() != dim * dim || mat.cols() != dim * dim)
    throw InvalidModel("superoperator matrix must be d^2 x d^2");
}

Matrix Superoperator::apply(const Matrix& x) const {
  if (x.rows() != dim || x.cols() != dim) throw BasisMismatch("superoperator apply: wrong operand size");
  return unstack_columns(mat * stack_columns(x), dim);
}

Superoperator& Superoperator::operator+=(const Superoperator& other) {
  if (dim != other.dim) throw BasisMismatch("superoperator sum: dimension mismatch");
  mat += other.mat;
  return *this;
}

Superoperator& Superoperator::operator-=(const Superoperator& other) {
  if (dim != other.dim) throw BasisMismatch("superoperator difference: dimension mismatch");
  mat -= other.mat;
  return *this;
}

Superoperator build_liouvillian(const ElectronModel& model, const Operator* extra_hamiltonian) {
  const int d = model.dim();
  const Matrix h = effective_hamiltonian(model, extra_hamiltonian);
  Matrix sup = -kImag * (left_mult_superop(h) - right_mult_superop(h));

  auto add_dissipator = [&](const Matrix& l, double rate) {
    if (rate == 0.0) return;
    const Matrix ldl = l.adjoint() * l;
    sup += rate * (kron(l.conjugate(), l) -
                   0.5 * (left_mult_superop(ldl) + right_mult_superop(ldl)));
  };

  for (const auto& j : model.jumps) {
    Matrix l = Matrix::Zero(d, d);
    l(j.to, j.from) = 1.0;
    add_dissipator(l, j.rate);
  }
  for (const auto& p : model.dephasings) {
    Matrix l = Matrix::Zero(d, d);
    l(p.state, p.state) = 1.0;
    add_dissipator(l, 2.0 * p.rate);
  }
  return Superoperator(d, std::move(sup));
}

DiagSplit split_diag_offdiag(const ElectronModel& model, const Operator* extra_hamiltonian,
                             bool build_matrices) {
  const int d = model.dim();
  const Matrix h = effective_hamiltonian(model, extra_hamiltonian);

  DiagSplit split;
  split.dim = d;
  split.energies.resize(d);
  split.jump_widths.resize(d);
  split.total_widths.resize(d);
  for (int i = 0; i < d; ++i) {
    split.energies[i] = h(i, i).real();
    split.jump_widths[i] = model.jump_width(i);
    split.total_widths[i] = model.total_width(i);
  }

  Matrix hnd = h;
  hnd.diagonal().setZero();
  for (const auto& j : model.jumps)
    if (j.rate != 0.0) split.refills.push_back(j);

  if (build_matrices) {
    Matrix diag_part = Matrix::Zero(d * d, d * d);
    for (int col = 0; col < d; ++col) {
      for (int row = 0; row < d; ++row) {
        const int idx = col * d + row;
        const double eps = split.energies[row] - split.energies[col];
        const double width = row == col
                                 ? split.jump_widths[row]
                                 : 0.5 * (split.total_widths[row] + split.total_widths[col]);
        diag_part(idx, idx) = Complex(-width, -eps);
      }
    }
    Matrix offdiag_part = -kImag * (left_mult_superop(hnd) - right_mult_superop(hnd));
    for (const auto& j : split.refills)
      offdiag_part(j.to * d + j.to, j.from * d + j.from) += j.rate;
    split.l_diag = Superoperator(d, std::move(diag_part));
    split.l_offdiag = Superoperator(d, std::move(offdiag_part));
  }

  split.h_offdiag = std::move(hnd);
  return split;
}

Matrix DiagSplit::apply_offdiag(const Matrix& x) const {
  Matrix out = -kImag * (h_offdiag * x - x * h_offdiag);
  for (const auto& j : refills) out(j.to, j.to) += j.rate * x(j.from, j.from);
  return out;
}

Complex DiagSplit::z(int row, int col, double omega) const {
  const double width =
      row == col ? jump_widths[row] : 0.5 * (total_widths[row] + total_widths[col]);
  return Complex(energies[row] - energies[col] - omega, -width);
}

Matrix resolvent_diag_apply(const DiagSplit& split, double omega, const Matrix& x) {
  const int d = split.dim;
  if (x.rows() != d || x.cols() != d) throw BasisMismatch("resolvent_diag: wrong operand size");
  Matrix out(d, d);
  for (int col = 0; col < d; ++col) {
    for (int row = 0; row < d; ++row) {
      const Complex zv = split.z(row, col, omega);
      if (std::abs(zv) == 0.0)
        throw SingularResolvent("resolvent_diag: z vanishes at (" + std::to_string(row) + "," +
                                std::to_string(col) + ")");
      out(row, col) = kImag * x(row, col) / zv;
    }
  }
  return out;
}

}  // namespace hfine
