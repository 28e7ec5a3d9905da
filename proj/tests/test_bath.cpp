#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "hfine/bath.hpp"
#include "hfine/units.hpp"
#include "oracles.hpp"

using namespace hfine;

namespace {

NarrowingParams paper_like_params() {
  NarrowingParams params;
  params.n_spins = 40;
  params.a_par_mhz = 0.15;
  params.flip_rate = 1.0;
  params.depol_total = 1e-3;  // R / Gamma_dep = 1e3
  params.delta0 = params.sigma_eq();
  return params;
}

// Eq.-8-shaped reference evaluated on the birth-death grid and normalized
FieldDistribution continuum_on_grid(const NarrowingParams& params) {
  FieldDistribution dist;
  const int n = params.n_spins;
  const double sigma_eq = params.sigma_eq();
  const double delta_s = params.delta_s();
  const double c = params.flip_rate / (params.flip_rate + params.depol_total);
  for (int k = 0; k <= n; ++k) {
    const double h = params.field_of(2 * k - n);
    const double d = params.zeeman + h;
    const double value = (1.0 + c * params.delta0 * params.delta0 / (d * d + delta_s * delta_s)) *
                         std::exp(-h * h / (2.0 * sigma_eq * sigma_eq));
    dist.h.push_back(h);
    dist.p.push_back(value);
  }
  dist.normalize();
  return dist;
}

double sup_norm_diff(const FieldDistribution& a, const FieldDistribution& b) {
  double result = 0;
  for (std::size_t i = 0; i < a.p.size(); ++i)
    result = std::max(result, std::abs(a.p[i] - b.p[i]));
  return result;
}

}  // namespace

TEST_CASE("birth-death steady state") {
  SUBCASE("no narrowing reproduces the binomial width") {
    NarrowingParams params;
    params.n_spins = 60;
    params.a_par_mhz = 0.1;
    params.flip_rate = 0.0;
    params.depol_total = 0.5;
    params.delta0 = 1.0;
    const FieldDistribution dist = birth_death_steady(params);
    CHECK(dist.sigma() == doctest::Approx(params.sigma_eq()).epsilon(1e-12));
    CHECK(std::abs(dist.mean()) < 1e-12);
  }

  SUBCASE("strong depolarization flattens the dip") {
    NarrowingParams params = paper_like_params();
    params.depol_total = 1e6;
    const FieldDistribution dist = birth_death_steady(params);
    CHECK(dist.sigma() == doctest::Approx(params.sigma_eq()).epsilon(1e-4));
  }

  SUBCASE("detailed balance holds edge by edge") {
    const NarrowingParams params = paper_like_params();
    const FieldDistribution dist = birth_death_steady(params);
    const int n = params.n_spins;
    for (int k = 0; k < n; ++k) {
      const double up = dist.p[k] * params.lambda(dist.h[k]) * (n - k);
      const double down = dist.p[k + 1] * params.lambda(dist.h[k + 1]) * (k + 1);
      CHECK(std::abs(up - down) <= 1e-12 * std::max(up, down));
    }
  }

  SUBCASE("narrowed regime: matches the closed form and halves the width") {
    const NarrowingParams params = paper_like_params();
    const FieldDistribution dist = birth_death_steady(params);
    const FieldDistribution reference = continuum_on_grid(params);
    const double sup = sup_norm_diff(dist, reference);
    CHECK(sup <= 0.02);
    CHECK(dist.sigma() / params.sigma_eq() < 0.5);
  }
}

TEST_CASE("closed-form narrowed distribution") {
  SUBCASE("no flips: pure Gaussian of width sigma_eq") {
    NarrowingParams params;
    params.n_spins = 40;
    params.a_par_mhz = 0.2;
    params.flip_rate = 0.0;
    params.depol_total = 0.3;
    params.delta0 = 0.5;
    const FieldDistribution dist = analytic_distribution(params);
    CHECK(dist.sigma() == doctest::Approx(params.sigma_eq()).epsilon(1e-3));
  }

  SUBCASE("central peak height ratio") {
    NarrowingParams params = paper_like_params();
    const FieldDistribution dist = analytic_distribution(params);
    // density ratio between h = 0 and the plain Gaussian value there
    std::size_t i0 = 0;
    for (std::size_t i = 0; i < dist.h.size(); ++i)
      if (std::abs(dist.h[i]) < std::abs(dist.h[i0])) i0 = i;
    // compare in density (mass / cell width) against a far wing point
    const auto density_at = [&](std::size_t i) {
      const double left = i == 0 ? dist.h[0] : 0.5 * (dist.h[i - 1] + dist.h[i]);
      const double right =
          i + 1 == dist.h.size() ? dist.h.back() : 0.5 * (dist.h[i] + dist.h[i + 1]);
      return dist.p[i] / (right - left);
    };
    const double sigma_eq = params.sigma_eq();
    std::size_t iw = 0;
    for (std::size_t i = 0; i < dist.h.size(); ++i)
      if (std::abs(dist.h[i] - 2.0 * sigma_eq) < std::abs(dist.h[iw] - 2.0 * sigma_eq)) iw = i;
    const double gauss_ratio = std::exp(-(dist.h[i0] * dist.h[i0] - dist.h[iw] * dist.h[iw]) /
                                        (2.0 * sigma_eq * sigma_eq));
    const double c = params.flip_rate / (params.flip_rate + params.depol_total);
    const double ds2 = params.delta_s() * params.delta_s();
    const double expected_peak = 1.0 + c * params.delta0 * params.delta0 / ds2;
    const double expected_wing =
        1.0 + c * params.delta0 * params.delta0 / (dist.h[iw] * dist.h[iw] + ds2);
    CHECK(density_at(i0) / density_at(iw) ==
          doctest::Approx(gauss_ratio * expected_peak / expected_wing).epsilon(0.02));
  }

  SUBCASE("grid cannot resolve a zero-width peak") {
    NarrowingParams params = paper_like_params();
    params.depol_total = 0.0;
    CHECK_THROWS_AS(analytic_distribution(params), GridResolutionError);
  }

  SUBCASE("cross-method width agreement where the chain resolves the peak") {
    NarrowingParams params;
    params.n_spins = 100;
    params.a_par_mhz = 0.1;
    params.flip_rate = 1.0;
    params.depol_total = 0.1;  // delta_s = sigma_eq/sqrt(11), above the grid spacing
    params.delta0 = params.sigma_eq();
    const double ratio_analytic = narrowing_metrics(analytic_distribution(params), params).ratio;
    const double ratio_bd = narrowing_metrics(birth_death_steady(params), params).ratio;
    CHECK(std::abs(ratio_analytic - ratio_bd) <= 0.05 * ratio_bd);
  }
}

TEST_CASE("narrowing metrics") {
  NarrowingParams params;
  params.n_spins = 40;
  params.a_par_mhz = 0.2;
  params.flip_rate = 0;
  params.depol_total = 1.0;
  params.delta0 = 1.0;

  SUBCASE("Gaussian input reports ratio one") {
    const NarrowingReport report = narrowing_metrics(analytic_distribution(params), params);
    CHECK(report.ratio == doctest::Approx(1.0).epsilon(1e-3));
    CHECK_FALSE(report.narrowed);
  }

  SUBCASE("spike input reports ratio near zero") {
    FieldDistribution spike;
    spike.h = {-1.0, 0.0, 1.0};
    spike.p = {0.0, 1.0, 0.0};
    const NarrowingReport report = narrowing_metrics(spike, params);
    CHECK(report.ratio < 1e-12);
    CHECK(report.narrowed);
  }

  SUBCASE("narrowed closed form reports ratio below one") {
    const NarrowingReport report =
        narrowing_metrics(analytic_distribution(paper_like_params()), paper_like_params());
    CHECK(report.ratio < 1.0);
  }
}

TEST_CASE("narrowing monotonicity in the depolarization") {
  NarrowingParams params = paper_like_params();
  double previous = -1;
  for (double depol : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    params.depol_total = depol;
    const double ratio = narrowing_metrics(analytic_distribution(params), params).ratio;
    CHECK(ratio >= previous - 1e-12);
    previous = ratio;
  }
}

TEST_CASE("continuum consistency as N grows") {
  // fixed physical sigma_eq, growing register
  auto deviation = [](int n) {
    NarrowingParams params;
    params.n_spins = n;
    params.a_par_mhz = 0.15 * std::sqrt(40.0 / n);
    params.flip_rate = 1.0;
    params.depol_total = 1e-3;
    params.delta0 = params.sigma_eq();
    return sup_norm_diff(birth_death_steady(params), continuum_on_grid(params));
  };
  const double e20 = deviation(20);
  const double e80 = deviation(80);
  CHECK(e80 < e20);
  // halving within 30%
  CHECK(e80 >= 0.35 * e20);
  CHECK(e80 <= 0.65 * e20);
}

TEST_CASE("master equation helpers") {
  SUBCASE("uniform rates relax to the uniform distribution") {
    const RateEdge edges[] = {{1, 0, 1.0}, {0, 1, 1.0}, {2, 1, 1.0}, {1, 2, 1.0}};
    const Eigen::MatrixXd g = relaxation_generator(3, edges);
    const auto p = master_equation_steady(g);
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  }

  SUBCASE("evolution conserves probability") {
    const RateEdge edges[] = {{1, 0, 0.6}, {0, 1, 0.25}};
    const Eigen::MatrixXd g = relaxation_generator(2, edges);
    const auto p = master_equation_evolve(g, {1.0, 0.0}, 3.0);
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
    // against the closed form for a two-state chain
    const double total = 0.85;
    const double p1_inf = 0.6 / total;
    const double expected = p1_inf + (0.0 - p1_inf) * std::exp(-total * 3.0);
    CHECK(p[1] == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("kinetic Monte Carlo") {
  SUBCASE("zero rates absorb immediately") {
    MarkovChain chain;
    chain.n_states = 3;
    chain.moves = [](int, std::vector<std::pair<int, double>>& moves) { moves.clear(); };
    KmcOptions options;
    options.n_trajectories = 4;
    options.max_events_per_trajectory = 100;
    const KmcResult result = kmc_sample(chain, std::vector<int>{1}, options);
    CHECK(result.absorbed_trajectories == 4);
    CHECK(result.total_events == 0);
  }

  SUBCASE("field-independent rates reproduce the thermal width") {
    NarrowingParams params;
    params.n_spins = 40;
    params.a_par_mhz = 0.15;
    params.flip_rate = 0.0;
    params.depol_total = 1.0;
    params.delta0 = 1.0;
    KmcOptions options;
    options.seed = 12;
    options.n_trajectories = 64;
    options.max_events_per_trajectory = 20000;
    const FieldDistribution hist = kmc_field_histogram(params, options);
    CHECK(std::abs(hist.sigma() - params.sigma_eq()) <= 0.03 * params.sigma_eq());
  }

  SUBCASE("same seed, same histogram; different seed, different histogram") {
    const NarrowingParams params = paper_like_params();
    KmcOptions options;
    options.seed = 5;
    options.n_trajectories = 8;
    options.max_events_per_trajectory = 3000;
    const FieldDistribution a = kmc_field_histogram(params, options);
    const FieldDistribution b = kmc_field_histogram(params, options);
    CHECK(a.p == b.p);
    options.seed = 6;
    const FieldDistribution c = kmc_field_histogram(params, options);
    CHECK(a.p != c.p);
  }

  SUBCASE("paper-like rates match the birth-death solution") {
    const NarrowingParams params = paper_like_params();
    KmcOptions options;
    options.seed = 9;
    options.n_trajectories = 64;
    options.max_events_per_trajectory = 20000;  // 1.28e6 aggregate events
    const FieldDistribution hist = kmc_field_histogram(params, options);
    const FieldDistribution reference = birth_death_steady(params);
    double tv = 0;
    for (std::size_t i = 0; i < hist.p.size(); ++i) tv += std::abs(hist.p[i] - reference.p[i]);
    CHECK(0.5 * tv <= 0.03);
  }
}

TEST_CASE("optimal narrowing scan") {
  NvParams nv;
  nv.rabi_e_mhz = 30.0;
  nv.detuning_a2_mhz = 4855.0;
  const int n_spins = 40;
  const double a_par = 0.15, a_perp = 0.15;
  const double gamma_c = 1e-10;

  std::vector<double> scan;
  for (int i = 0; i <= 24; ++i) scan.push_back(2.0 * std::pow(10.0, 1.5 * i / 24.0));

  const OptimalNarrowingResult result =
      optimal_narrowing(nv, n_spins, a_par, a_perp, gamma_c, scan);

  SUBCASE("scan is unimodal over the tested range") {
    int sign_changes = 0;
    for (std::size_t i = 2; i < result.scan.size(); ++i) {
      const double d1 = result.scan[i - 1].ratio - result.scan[i - 2].ratio;
      const double d2 = result.scan[i].ratio - result.scan[i - 1].ratio;
      if (d1 < 0 && d2 > 0) ++sign_changes;
      if (d1 > 0 && d2 < 0) return;  // a maximum inside the range would break unimodality
    }
    CHECK(sign_changes <= 1);
  }

  SUBCASE("scanned minimum against the closed form (20%)") {
    CHECK(result.ratio_min > 0);
    CHECK(std::abs(result.ratio_min - result.analytic_ratio_min) <=
          0.20 * result.analytic_ratio_min);
  }

  SUBCASE("smaller intrinsic depolarization shifts the optimum to smaller delta0") {
    double previous = std::numeric_limits<double>::infinity();
    for (double gc : {1e-8, 1e-9, 1e-10}) {
      const OptimalNarrowingResult r = optimal_narrowing(nv, n_spins, a_par, a_perp, gc, scan);
      CHECK(r.delta0_opt <= previous + 1e-12);
      previous = r.delta0_opt;
    }
  }
}
