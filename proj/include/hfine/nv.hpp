#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hfine/adiabatic.hpp"
#include "hfine/hyperfine.hpp"
#include "hfine/operator_algebra.hpp"
#include "hfine/units.hpp"

namespace hfine {

// Basis order is fixed: {0, b, d, Ey, A1, A2, E1, E2, S}. |Ex> is left out:
// no drive or damping channel in the model connects it, so it would only add
// an invariant subspace.
enum NvState : int { kNv0 = 0, kNvB, kNvD, kNvEy, kNvA1, kNvA2, kNvE1, kNvE2, kNvS };
inline constexpr int kNvDim = 9;

BasisPtr nv_basis();

struct NvParams {
  // drives and fields, ordinary MHz
  double rabi_a_mhz = 2.0;        // Omega_A, |+-1> -> A1 pumping
  double rabi_e_mhz = 10.0;       // Omega_E, |0> -> Ey pumping
  double detuning_a2_mhz = 3000;  // Delta = eps_A2 - eps_A1
  double zeeman_mhz = 0.18;       // omega_e = g_e mu_B B
  double strain_mhz = 0.0;        // xi_perp
  double d_gs_mhz = 2870.0;       // ground-state zero-field splitting

  // lab-frame excited energies relative to eps_Ey (MHz); the paper gives no
  // numbers, these are synthetic GHz-range defaults and config inputs.
  double eps_ey_mhz = 0.0;
  double eps_a1_mhz = 2200.0;
  double eps_e1_mhz = -2500.0;
  double eps_e2_mhz = -2500.0;

  // damping rates, 1/us
  double gamma = 1e3 / 12.0;               // radiative, 1/(12 ns)
  double gamma_s1 = 1e3 / 12.0;            // A1, E1, E2 -> S
  double gamma_s2 = 1e3 / 12.0 / 120.0;    // A2 -> S
  double gamma_ce = 1e3 / 12.0 / 800.0;    // Ey -> b, d cross leak
  double gamma_s = 1e3 / 300.0;            // S -> 0; modeling default, not from the fit
  double gamma_phi = 0.0;                  // pure dephasing of each excited state

  bool a2_coupling = true;  // i Omega_A/sqrt(2) sigma_{A2,d} drive term

  double eps_a2_mhz() const { return eps_a1_mhz + detuning_a2_mhz; }
  double jump_width(NvState f) const;  // Gamma_f = sum of jump rates out of f
  void validate() const;
};

// H_e with the Zeeman entry replaced by the shifted two-photon detuning
// delta_m (rad/us). The strain phase convention Theta + 2 phi = pi is baked in.
Operator build_nv_hamiltonian(const NvParams& params, double delta_m_rad_us);

void build_nv_channels(const NvParams& params, std::vector<JumpChannel>& jumps,
                       std::vector<DephasingChannel>& dephasings);

// Model at delta_m = 0; every detuning (Zeeman plus nuclear field) enters as
// the longitudinal shift delta * S_g^z through the steady-state map.
ElectronModel build_nv_model(const NvParams& params, double delta_m_rad_us = 0.0);

// Ground / excited spin components in the 9-state basis (dimensionless).
Operator nv_sgz();
Operator nv_sg_plus();
Operator nv_se_plus();
Operator nv_sg_perp(int xy);  // 0: S_g^x, 1: S_g^y
Operator nv_se_perp(int xy);

// Closed-form steady state near the two-photon dark resonance.
struct AnalyticSteadyState {
  double p0 = 0;        // dip amplitude
  double delta0 = 0;    // intrinsic dip half width (rad/us), xi_perp = 0 form
  double eta1 = 0, eta2 = 0, eta3 = 0;
  double chi = 0;       // off-resonant excitation parameter
  double w_a = 0, w_e = 0, w_a2 = 0;

  double p_ey0(double delta) const { return p0 * delta * delta / (delta * delta + delta0 * delta0); }
  double p_dd0(double delta) const;
  double p_ey2(double delta) const;  // leading off-resonant correction
  double p_ey(double delta) const { return p_ey0(delta) + p_ey2(delta); }
  double p_a1(double delta) const;
  double p_a2(double delta) const;
  double p_ss(double delta) const;
  double p_00(double delta) const;
  double p_bb(double delta) const;

  // cached rate ratios filled by analytic_steady_state
  double w_e_ratio_ = 0;     // W_E / (gamma + 2 gamma_ce)
  double w_a2_ratio_ = 0;    // W_A2 / (gamma + gamma_s1)
  double w_a2_s2_ratio_ = 0; // W_A2 / (gamma + gamma_s2)
  double ss_ratio_ = 0;      // 2 gamma_ce / gamma_s
  double bb_ratio_ = 0;
};

AnalyticSteadyState analytic_steady_state(const NvParams& params);

// chi_g = (gamma + 2 gamma_ce)/D_gs^2, chi_f = (Gamma_f + gamma_phi)/(4 (eps_Ey - eps_f)^2),
// chi = (gamma + gamma_phi) Omega_A^2 / (4 eta_1 Delta^2 (gamma + gamma_s1)).
struct ChiFactors {
  double chi_g = 0;
  double chi_a1 = 0, chi_a2 = 0, chi_e1 = 0, chi_e2 = 0;
  double chi = 0;
  double sum_chi_f() const { return chi_a1 + chi_a2 + chi_e1 + chi_e2; }
};

ChiFactors chi_factors(const NvParams& params);

// Local frame of a 13C hyperfine tensor: e_z = (row z of A)/|row z of A|,
// e_x/e_y completing a deterministic right-handed orthonormal triad.
struct LocalFrame {
  Eigen::Matrix3d triad;  // columns e_x, e_y, e_z
  double a_z_mhz = 0;     // |e_z . A|
};

LocalFrame local_frame(const Eigen::Matrix3d& tensor_mhz);

// Point-dipole hyperfine tensor C/r^3 (1 - 3 rhat rhat^T), MHz for r in nm.
inline constexpr double kNvC13DipolarMhzNm3 = 0.0198852;
Eigen::Matrix3d dipolar_tensor(const Eigen::Vector3d& position_nm,
                               double prefactor_mhz_nm3 = kNvC13DipolarMhzNm3);

struct CarbonSite {
  Eigen::Matrix3d tensor_mhz = Eigen::Matrix3d::Zero();
  LocalFrame frame;
  // transverse amplitudes A_{n,alpha,-} = e_alpha . A . (e_nx - i e_ny), MHz;
  // first index global x, y, +-, second index the local lowering combination
  Complex a_xm{0, 0}, a_ym{0, 0}, a_mm{0, 0}, a_pm{0, 0};
};

CarbonSite make_carbon_site(const Eigen::Matrix3d& tensor_mhz);

struct NitrogenSite {
  double a_g_mhz = 2.2;   // ground contact HFI
  double a_e_mhz = 40.0;  // excited contact HFI
};

// K coefficients and transverse blocks for the full register (nitrogen first
// when present, then carbons). Block operators absorb the nuclear matrix
// elements, so rates are direction- and m-independent within each site.
struct HfiDecomposition {
  LongitudinalHfi longitudinal;
  std::vector<TransverseBlock> blocks;
};

HfiDecomposition decompose_hfi(const NvParams& params, const std::optional<NitrogenSite>& nitrogen,
                               const std::vector<CarbonSite>& carbons);

// Closed-form flip rates ("dominated by" sums); raise and lower are equal.
double nitrogen_flip_rate(const NvParams& params, const NitrogenSite& site, double p_eyey,
                          double gamma_n = 0.0);
double carbon_flip_rate(const NvParams& params, const CarbonSite& site, double p_eyey,
                        double gamma_c = 0.0);

// Everything commands need bundled: the delta = 0 model, the register
// decomposition and the Zeeman offset (total detuning = zeeman + h_m).
struct NvSystem {
  NvParams params;
  ElectronModel model;
  Operator k_operator;
  LongitudinalHfi hfi;
  std::vector<TransverseBlock> blocks;
  std::optional<NitrogenSite> nitrogen;
  std::vector<CarbonSite> carbons;
  double zeeman_rad_us = 0;

  double detuning_of(const BathConfig& config) const {
    return zeeman_rad_us + config.field(hfi);
  }
};

NvSystem make_nv_system(const NvParams& params, std::optional<NitrogenSite> nitrogen,
                        std::vector<CarbonSite> carbons);

}  // namespace hfine
