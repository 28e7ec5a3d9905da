#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "hfine/serialize.hpp"
#include "hfine/solvers.hpp"
#include "hfine/superoperator.hpp"
#include "oracles.hpp"

using namespace hfine;

namespace {

ElectronModel two_level_decay(double gamma) {
  const BasisPtr basis = make_basis({"g", "e"});
  return ElectronModel(zero_operator(basis), {{1, 0, gamma}}, {});
}

ElectronModel two_level_driven(double rabi, double gamma) {
  const BasisPtr basis = make_basis({"g", "e"});
  return ElectronModel(Operator(basis, 0.5 * rabi * oracle::sigma_x()), {{1, 0, gamma}}, {});
}

}  // namespace

TEST_CASE("liouvillian of a bare decay channel") {
  const double gamma = 3.7;
  const ElectronModel model = two_level_decay(gamma);
  const Superoperator l = build_liouvillian(model);

  Matrix excited = Matrix::Zero(2, 2);
  excited(1, 1) = 1.0;
  const Matrix image = l.apply(excited);
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = gamma;
  expected(1, 1) = -gamma;
  CHECK((image - expected).norm() <= 1e-15 * gamma);
}

TEST_CASE("trace and Hermiticity preservation for random models") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.1, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2 + static_cast<int>(trial % 4);
    const BasisPtr basis = make_basis([&] {
      std::vector<std::string> labels;
      for (int i = 0; i < d; ++i) labels.push_back("s" + std::to_string(i));
      return labels;
    }());
    std::vector<JumpChannel> jumps;
    for (int i = 1; i < d; ++i) jumps.push_back({i, i - 1, unit(rng)});
    std::vector<DephasingChannel> dephasings{{d - 1, unit(rng)}};
    const ElectronModel model(Operator(basis, oracle::random_hermitian(d, rng, 5.0)), jumps,
                              dephasings);
    const Superoperator l = build_liouvillian(model);
    for (int rep = 0; rep < 5; ++rep) {
      Matrix x = oracle::random_hermitian(d, rng);
      x /= x.norm();
      const Matrix lx = l.apply(x);
      CHECK(std::abs(lx.trace()) <= 1e-12);
      CHECK((l.apply(Matrix(x.adjoint())) - lx.adjoint()).norm() <= 1e-12);
    }
  }
}

TEST_CASE("spectrum of the undriven and driven two-level Liouvillian") {
  const double gamma = 2.0;

  SUBCASE("no drive: 0, -gamma, and -gamma/2 twice") {
    const Vector eigs = liouvillian_eigenvalues(build_liouvillian(two_level_decay(gamma)));
    std::vector<double> re(4);
    for (int i = 0; i < 4; ++i) re[i] = eigs(i).real();
    std::sort(re.begin(), re.end());
    CHECK(re[0] == doctest::Approx(-gamma).epsilon(1e-12));
    CHECK(re[1] == doctest::Approx(-gamma / 2).epsilon(1e-12));
    CHECK(re[2] == doctest::Approx(-gamma / 2).epsilon(1e-12));
    CHECK(std::abs(re[3]) < 1e-12);
  }

  SUBCASE("resonant drive: oracle eigendecomposition fixes the expected set") {
    // Bloch-sector analysis: eigenvalues are 0, -gamma/2 and the pair
    // -3 gamma/4 +- i sqrt(Omega^2 - gamma^2/16). Frozen from the dense
    // eigensolve of the 4x4 matrix below.
    const double rabi = 3.0;
    const Superoperator l = build_liouvillian(two_level_driven(rabi, gamma));
    Eigen::ComplexEigenSolver<Matrix> oracle_solver(l.mat);
    REQUIRE(oracle_solver.info() == Eigen::Success);
    std::vector<Complex> eigs(4);
    for (int i = 0; i < 4; ++i) eigs[i] = oracle_solver.eigenvalues()(i);
    std::sort(eigs.begin(), eigs.end(),
              [](Complex a, Complex b) { return a.real() < b.real(); });
    const double osc = std::sqrt(rabi * rabi - gamma * gamma / 16.0);
    CHECK(eigs[0].real() == doctest::Approx(-0.75 * gamma).epsilon(1e-10));
    CHECK(eigs[1].real() == doctest::Approx(-0.75 * gamma).epsilon(1e-10));
    CHECK(std::abs(eigs[0].imag()) == doctest::Approx(osc).epsilon(1e-10));
    CHECK(eigs[2].real() == doctest::Approx(-gamma / 2).epsilon(1e-10));
    CHECK(std::abs(eigs[3]) < 1e-10);
  }
}

TEST_CASE("steady state of a decaying two-level system is the ground state") {
  const DensityMatrix rho = steady_state(two_level_decay(1.3));
  CHECK(rho.population(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(rho.population(1)) <= 1e-14);
}

TEST_CASE("driven two-level steady state against the long-time RK4 oracle") {
  const double rabi = 1.4, gamma = 0.9;
  const ElectronModel model = two_level_driven(rabi, gamma);
  const Superoperator l = build_liouvillian(model);

  Matrix rho0 = Matrix::Zero(2, 2);
  rho0(0, 0) = 1.0;
  const Vector v_end =
      oracle::rk4_propagate(l.mat, stack_columns(rho0), 50.0 / gamma, 20000);
  const Matrix rho_oracle = unstack_columns(v_end, 2);

  // the analytic candidate must first pass the oracle
  const double p_e_analytic = rabi * rabi / (gamma * gamma + 2.0 * rabi * rabi);
  CHECK(rho_oracle(1, 1).real() == doctest::Approx(p_e_analytic).epsilon(1e-8));

  const DensityMatrix rho = steady_state(model);
  CHECK(std::abs(rho.population(1) - rho_oracle(1, 1).real()) < 1e-6);
}

TEST_CASE("steady-state error paths") {
  const BasisPtr basis = make_basis({"g", "e"});

  SUBCASE("closed system is rejected") {
    const ElectronModel closed(Operator(basis, oracle::sigma_x()), {}, {});
    CHECK_THROWS_AS(steady_state(closed), NoDissipation);
  }

  SUBCASE("all rates zero counts as closed") {
    const ElectronModel zero_rates(Operator(basis, oracle::sigma_x()), {{1, 0, 0.0}}, {});
    CHECK_THROWS_AS(steady_state(zero_rates), NoDissipation);
  }

  SUBCASE("two decoupled blocks are degenerate") {
    const BasisPtr big = make_basis({"a1", "a2", "b1", "b2"});
    const ElectronModel model(zero_operator(big), {{1, 0, 2.0}, {3, 2, 2.0}}, {});
    CHECK_THROWS_AS(steady_state(model), DegenerateSteadyState);
  }
}

TEST_CASE("evolve reproduces closed forms and the steady state") {
  const double gamma = 1.1;

  SUBCASE("t = 0 returns the initial state exactly") {
    const ElectronModel model = two_level_decay(gamma);
    Matrix rho0 = Matrix::Zero(2, 2);
    rho0(1, 1) = 1.0;
    DensityMatrix initial = DensityMatrix::validated(model.basis, rho0);
    const double t0 = 0.0;
    const auto states = evolve(build_liouvillian(model), initial, std::span(&t0, 1));
    CHECK((states[0].mat - rho0).norm() == 0.0);
  }

  SUBCASE("pure decay follows exp(-gamma t)") {
    const ElectronModel model = two_level_decay(gamma);
    Matrix rho0 = Matrix::Zero(2, 2);
    rho0(1, 1) = 1.0;
    DensityMatrix initial = DensityMatrix::validated(model.basis, rho0);
    const std::vector<double> times = {0.2, 0.9, 2.5};
    const auto states = evolve(build_liouvillian(model), initial, times);
    for (std::size_t i = 0; i < times.size(); ++i)
      CHECK(std::abs(states[i].population(1) - std::exp(-gamma * times[i])) < 1e-9);
  }

  SUBCASE("long-time evolution matches the steady-state solver") {
    const ElectronModel model = two_level_driven(2.2, gamma);
    Matrix rho0 = Matrix::Zero(2, 2);
    rho0(0, 0) = 1.0;
    DensityMatrix initial = DensityMatrix::validated(model.basis, rho0);
    const std::vector<double> times = {60.0 / gamma};
    const auto states = evolve(build_liouvillian(model), initial, times);
    const DensityMatrix rho_ss = steady_state(model);
    CHECK((states[0].mat - rho_ss.mat).norm() < 1e-6);
  }

  SUBCASE("decreasing grid is rejected") {
    const ElectronModel model = two_level_decay(gamma);
    Matrix rho0 = Matrix::Identity(2, 2) * 0.5;
    DensityMatrix initial = DensityMatrix::validated(model.basis, rho0);
    const std::vector<double> times = {1.0, 0.5};
    CHECK_THROWS_AS(evolve(build_liouvillian(model), initial, times), IntegrationError);
  }
}

TEST_CASE("Fourier-Laplace integral of the propagator") {
  SUBCASE("scalar damping block") {
    const double gamma = 0.8, omega = 1.9;
    Matrix kernel = Matrix::Constant(1, 1, Complex(-gamma, 0));
    Matrix x = Matrix::Constant(1, 1, Complex(2.0, -1.0));
    const Matrix y = resolvent_solve(kernel, omega, x, 1);
    const Complex expected = x(0, 0) / Complex(gamma, -omega);
    CHECK(std::abs(y(0, 0) - expected) < 1e-14);
  }

  SUBCASE("large-frequency asymptotic bound") {
    const ElectronModel model = two_level_driven(1.0, 1.0);
    const Superoperator l = build_liouvillian(model);
    const double omega = 1e3 * l.norm();
    std::mt19937_64 rng(3);
    const Matrix x = oracle::random_hermitian(2, rng);
    const Matrix y = liouvillian_integral(l, omega, x);
    CHECK(y.norm() <= x.norm() / omega * (1.0 + 10.0 * l.norm() / omega));
  }

  SUBCASE("driven two-level against time-domain quadrature") {
    const double gamma = 0.9, rabi = 1.6, omega = 2.3;
    const ElectronModel model = two_level_driven(rabi, gamma);
    const Superoperator l = build_liouvillian(model);
    const Matrix x = oracle::sigma_minus();  // traceless, no steady component
    const Matrix y = liouvillian_integral(l, omega, x);
    const Matrix y_quad = oracle::fourier_quadrature(l.mat, 2, omega, x, 100.0 / gamma, 40000);
    CHECK((y - y_quad).norm() < 1e-6);
  }

  SUBCASE("singular kernel at omega = 0 is rejected") {
    const ElectronModel model = two_level_driven(1.0, 1.0);
    const Superoperator l = build_liouvillian(model);
    Matrix x = Matrix::Identity(2, 2);
    CHECK_THROWS_AS(liouvillian_integral(l, 0.0, x), SingularResolvent);
  }
}

TEST_CASE("diagonal/off-diagonal split") {
  const BasisPtr basis = make_basis({"g", "e"});

  SUBCASE("dephasing only leaves no off-diagonal part") {
    Matrix h = Matrix::Zero(2, 2);
    h(1, 1) = 2.0;
    const ElectronModel model(Operator(basis, h), {}, {{1, 0.7}});
    const DiagSplit split = split_diag_offdiag(model);
    CHECK(split.l_offdiag.mat.cwiseAbs().maxCoeff() == 0.0);
    const Superoperator full = build_liouvillian(model);
    CHECK((split.l_diag.mat - full.mat).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("widths recovered from channels") {
    const ElectronModel model = two_level_decay(1.7);
    const DiagSplit split = split_diag_offdiag(model);
    CHECK(split.jump_widths[1] == doctest::Approx(1.7));
    CHECK(split.jump_widths[0] == 0.0);
  }

  SUBCASE("split sums back to the full Liouvillian") {
    std::mt19937_64 rng(5);
    const BasisPtr b3 = make_basis({"a", "b", "c"});
    const ElectronModel model(Operator(b3, oracle::random_hermitian(3, rng, 4.0)),
                              {{2, 0, 1.1}, {1, 0, 0.3}, {2, 1, 0.8}}, {{2, 0.4}});
    const DiagSplit split = split_diag_offdiag(model);
    const Superoperator full = build_liouvillian(model);
    const double scale = full.mat.cwiseAbs().maxCoeff();
    CHECK((split.l_diag.mat + split.l_offdiag.mat - full.mat).cwiseAbs().maxCoeff() <=
          1e-14 * scale);
  }
}

TEST_CASE("closed-form diagonal resolvent") {
  std::mt19937_64 rng(17);
  const BasisPtr basis = make_basis({"a", "b", "c", "d"});
  Matrix h = oracle::random_hermitian(4, rng, 3.0);
  const ElectronModel model(Operator(basis, h), {{3, 0, 1.2}, {2, 1, 0.5}, {3, 2, 0.9}},
                            {{3, 0.6}});
  const DiagSplit split = split_diag_offdiag(model);

  SUBCASE("two-level width formula") {
    const ElectronModel tls = two_level_decay(2.0);
    const DiagSplit s = split_diag_offdiag(tls);
    const double omega = 0.7;
    const Complex z = s.z(1, 0, omega);  // coherence (e, g)
    CHECK(z.real() == doctest::Approx(-omega));
    CHECK(z.imag() == doctest::Approx(-1.0));  // Gamma_e / 2
  }

  SUBCASE("far-detuned entries scale like i/(-omega)") {
    const double omega = 1e5;
    Matrix x = oracle::random_hermitian(4, rng);
    const Matrix g = resolvent_diag_apply(split, omega, x);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        CHECK(std::abs(g(r, c) - kImag * x(r, c) / Complex(-omega, 0)) <=
              2e-4 * std::abs(x(r, c)) / omega + 1e-18);
  }

  SUBCASE("matches the dense solve of L_diag") {
    for (double omega : {0.9, 5.0, 40.0}) {
      const Matrix x = oracle::random_hermitian(4, rng);
      const Matrix via_formula = -resolvent_diag_apply(split, omega, x);
      const Matrix via_solve = resolvent_solve(split.l_diag.mat, omega, x, 4);
      CHECK((via_formula - via_solve).norm() <= 1e-10 * std::max(1.0, via_solve.norm()));
    }
  }
}

TEST_CASE("operator and superoperator csv round trip") {
  std::mt19937_64 rng(23);
  const BasisPtr basis = make_basis({"g", "e", "s"});
  const Operator op(basis, oracle::random_hermitian(3, rng));

  std::stringstream stream;
  write_operator_csv(stream, op);
  const Operator back = read_operator_csv(stream);
  CHECK(back.basis->labels() == op.basis->labels());
  CHECK((back.mat - op.mat).norm() == 0.0);  // shortest round-trip formatting

  const ElectronModel model(op, {{1, 0, 0.4}}, {});
  const Superoperator l = build_liouvillian(model);
  std::stringstream stream2;
  write_superoperator_csv(stream2, l);
  const Superoperator l2 = read_superoperator_csv(stream2);
  CHECK(l2.dim == l.dim);
  CHECK((l2.mat - l.mat).norm() == 0.0);
}
