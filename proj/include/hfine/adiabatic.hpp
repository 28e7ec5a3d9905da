#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hfine/hyperfine.hpp"
#include "hfine/operator_algebra.hpp"

namespace hfine {

enum class RateMethod { kExact, kExactK, kPerturbative, kGoldenOnly };

struct RateResult {
  double value = 0.0;  // 1/us
  RateMethod method = RateMethod::kExact;
  double golden_part = 0.0;    // perturbative only: Lorentzian golden-rule sum (>= 0)
  double coherent_part = 0.0;  // perturbative only: remainder, value = golden + coherent
};

// Nuclear flip rate W_{p<-m} = 2 Re Tr_e[ V^(m,p) * Int_0^inf e^{i w t} e^{L_pm t} V^(p,m) P_mm dt ]
// with L_pm built from the model plus (K_p + K_m)/2.
RateResult transition_rate_exact(SteadyStateMap& map, const TransverseBlock& block, double h_m,
                                 double h_p);

// Same with the longitudinal difference treated exactly: the kernel gains the
// anticommutator term  -i {., K_pm}/2, K_pm = O (h_p - h_m).
RateResult transition_rate_exact_k(SteadyStateMap& map, const TransverseBlock& block, double h_m,
                                   double h_p);

// Dyson-expanded rate W ~ -2 Re Tr V^(m,p) (G^d - G^d L^nd G^d) V^(p,m) P_mm,
// valid for ||L^d + i w|| >> ||L^nd||. golden_part collects the per-element
// Lorentzian contributions 2 pi |V_fi|^2 P_ii delta^((G_f+G_i)/2)(eps_f-eps_i-w);
// coherent_part is the remainder (for a single-element V it equals the
// coherent correction built from H^nd and steady-state coherences, and it
// vanishes when H^nd = 0).
RateResult transition_rate_perturbative(SteadyStateMap& map, const TransverseBlock& block,
                                        double h_m, double h_p, bool golden_only = false);

RateResult transition_rate(SteadyStateMap& map, const TransverseBlock& block, double h_m,
                           double h_p, RateMethod method);

// Sum of all blocks matching (nucleus, direction) for a configuration.
double total_flip_rate(SteadyStateMap& map, const LongitudinalHfi& hfi,
                       std::span<const TransverseBlock> blocks, const BathConfig& config,
                       int nucleus, FlipDirection dir, RateMethod method);

// Pure dephasing of the (m,n) coherence:
//   Gamma^phi = Re Int_0^inf Tr_e[ Ktilde e^{L_mn t} Ktilde P_mn ] dt,
// Ktilde = K_mn - <K_mn>_mn. The steady-state component of Ktilde P_mn is
// projected out before the omega = 0 resolvent solve; a residual overlap above
// 1e-10 raises ProjectionError.
double dephasing_rate(SteadyStateMap& map, double h_m, double h_n);

// Cross rate entering coherence decay,
//   W_{p<-m|n} = -2 Re Tr V^(m,p) (L_pn + i w_pm)^{-1} (V^(p,m) P_mn - <V^(p,m)>_mn P_pn).
double cross_rate(SteadyStateMap& map, const TransverseBlock& block, double h_m, double h_n,
                  double h_p_of_m);

struct CoherenceDecay {
  double total = 0.0;      // Gamma^phi + (1/2) sum_p (W_{p<-n|m} + W_{p<-m|n})
  double dephasing = 0.0;  // Gamma^phi
  double flip_sum = 0.0;
};

CoherenceDecay coherence_decay_rate(SteadyStateMap& map, const LongitudinalHfi& hfi,
                                    std::span<const TransverseBlock> blocks, const BathConfig& m,
                                    const BathConfig& n);

// First-order mean-field Hamiltonian over the nuclear register:
// H_eff diagonal entry h_m <O>_{m,m}; pair_rate gives the first-order
// precession frequency of the (m,n) coherence.
class MeanFieldGenerator {
 public:
  explicit MeanFieldGenerator(SteadyStateMap& map) : map_(&map) {}

  double mean_field(double h) const;  // <O>_{h,h}
  double heff(double h) const { return h * mean_field(h); }
  double pair_rate(double h_m, double h_n) const { return heff(h_m) - heff(h_n); }

 private:
  SteadyStateMap* map_;
};

// Generator of the configuration-space master equation: column m holds
// out-rates, entry (p,m) the rate W_{p<-m}. Rates in (-1e-8 * scale, 0) are
// clipped to zero, more negative ones raise NegativeRate. Column sums vanish.
struct RateEdge {
  int to = 0;
  int from = 0;
  double rate = 0.0;
};

Eigen::MatrixXd relaxation_generator(int n_configs, std::span<const RateEdge> edges);

struct ValidityReport {
  double t_electron = 0.0;    // 1 / min nonzero |Re lambda(L)|
  double t_coherence = 0.0;   // 1 / max |<K_mn>|
  double t_dephasing = 0.0;   // 1 / max Gamma^phi
  double t_relaxation = 0.0;  // 1 / max W
  double separation_ratio = 0.0;  // t_electron / min(other three)
  bool violated = false;          // separation_ratio > 0.1
};

ValidityReport timescale_report(SteadyStateMap& map, const LongitudinalHfi& hfi,
                                std::span<const TransverseBlock> blocks,
                                std::span<const BathConfig> sample_configs);

}  // namespace hfine
