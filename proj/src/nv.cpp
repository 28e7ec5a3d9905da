#include "hfine/nv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hfine {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;

const BasisPtr& nv_basis_singleton() {
  static const BasisPtr basis = make_basis({"0", "b", "d", "Ey", "A1", "A2", "E1", "E2", "S"});
  return basis;
}

Matrix nv_zero() { return Matrix::Zero(kNvDim, kNvDim); }

Matrix sg_plus_matrix() {
  // sqrt(2)(sigma_{+1,0} + sigma_{0,-1}) with |+1> = (|b>+|d>)/sqrt(2),
  // |-1> = (|d>-|b>)/sqrt(2) (laser phase phi = 0).
  Matrix m = nv_zero();
  m(kNvB, kNv0) = 1.0;
  m(kNvD, kNv0) = 1.0;
  m(kNv0, kNvD) = 1.0;
  m(kNv0, kNvB) = -1.0;
  return m;
}

Matrix se_plus_matrix() {
  // Spin raising within the excited fine structure; |Ex> components dropped
  // with the state itself.
  Matrix m = nv_zero();
  const Complex c = kImag * kInvSqrt2;
  m(kNvA1, kNvEy) = c;
  m(kNvA2, kNvEy) = c;
  m(kNvE1, kNvEy) = -c;
  m(kNvE2, kNvEy) = c;
  m(kNvEy, kNvA1) = c;
  m(kNvEy, kNvA2) = -c;
  m(kNvEy, kNvE1) = -c;
  m(kNvEy, kNvE2) = -c;
  return m;
}

// Rotating-frame energies used to sort transverse matrix elements into
// oscillation-frequency classes. A2 shares the A1 frame (both are driven by
// the same laser; the residual Delta sits in the Hamiltonian), E1/E2 rotate at
// their own energies.
std::array<double, kNvDim> frame_energies(const NvParams& p) {
  std::array<double, kNvDim> e{};
  e[kNv0] = 0.0;
  e[kNvB] = e[kNvD] = mhz_to_rad_us(p.d_gs_mhz);
  e[kNvEy] = mhz_to_rad_us(p.eps_ey_mhz);
  e[kNvA1] = e[kNvA2] = mhz_to_rad_us(p.eps_a1_mhz);
  e[kNvE1] = mhz_to_rad_us(p.eps_e1_mhz);
  e[kNvE2] = mhz_to_rad_us(p.eps_e2_mhz);
  e[kNvS] = 0.0;
  return e;
}

void append_frequency_blocks(std::vector<TransverseBlock>& blocks, int nucleus, FlipDirection dir,
                             const Matrix& v, const std::array<double, kNvDim>& energies) {
  std::vector<std::pair<std::int64_t, Matrix>> classes;
  for (int col = 0; col < kNvDim; ++col) {
    for (int row = 0; row < kNvDim; ++row) {
      if (v(row, col) == Complex(0.0, 0.0)) continue;
      const double omega = energies[col] - energies[row];
      const std::int64_t key = std::llround(omega * 1e6);
      auto it = std::find_if(classes.begin(), classes.end(),
                             [&](const auto& c) { return c.first == key; });
      if (it == classes.end()) {
        classes.emplace_back(key, nv_zero());
        it = std::prev(classes.end());
      }
      it->second(row, col) = v(row, col);
    }
  }
  for (auto& [key, mat] : classes)
    blocks.push_back(TransverseBlock{nucleus, dir, Operator(nv_basis(), std::move(mat)),
                                     static_cast<double>(key) * 1e-6});
}

}  // namespace

BasisPtr nv_basis() { return nv_basis_singleton(); }

double NvParams::jump_width(NvState f) const {
  switch (f) {
    case kNvEy:
      return gamma + 2.0 * gamma_ce;
    case kNvA1:
    case kNvE1:
    case kNvE2:
      return gamma + gamma_s1;
    case kNvA2:
      return gamma + gamma_s2;
    case kNvS:
      return gamma_s;
    default:
      return 0.0;
  }
}

void NvParams::validate() const {
  const double rates[] = {gamma, gamma_s1, gamma_s2, gamma_ce, gamma_s, gamma_phi};
  for (double r : rates)
    if (!(r >= 0.0)) throw InvalidModel("NV rates must be nonnegative");
  if (!(detuning_a2_mhz > 0.0)) throw InvalidModel("A2 detuning must be positive");
  if (!(rabi_a_mhz >= 0.0) || !(rabi_e_mhz >= 0.0))
    throw InvalidModel("Rabi frequencies must be nonnegative");
}

Operator build_nv_hamiltonian(const NvParams& params, double delta_m_rad_us) {
  params.validate();
  Matrix h = nv_zero();
  const double xi = mhz_to_rad_us(params.strain_mhz);
  const double delta = mhz_to_rad_us(params.detuning_a2_mhz);
  const double oa = mhz_to_rad_us(params.rabi_a_mhz);
  const double oe = mhz_to_rad_us(params.rabi_e_mhz);

  h(kNvD, kNvD) = xi;
  h(kNvB, kNvB) = -xi;
  h(kNvB, kNvD) = delta_m_rad_us;
  h(kNvD, kNvB) = delta_m_rad_us;
  h(kNvA2, kNvA2) = delta;
  h(kNvA1, kNvB) = oa * kInvSqrt2;
  h(kNvB, kNvA1) = oa * kInvSqrt2;
  if (params.a2_coupling) {
    h(kNvA2, kNvD) = kImag * oa * kInvSqrt2;
    h(kNvD, kNvA2) = -kImag * oa * kInvSqrt2;
  }
  h(kNvEy, kNv0) = 0.5 * oe;
  h(kNv0, kNvEy) = 0.5 * oe;
  return Operator(nv_basis(), std::move(h));
}

void build_nv_channels(const NvParams& params, std::vector<JumpChannel>& jumps,
                       std::vector<DephasingChannel>& dephasings) {
  params.validate();
  jumps.clear();
  dephasings.clear();
  const double g2 = 0.5 * params.gamma;
  jumps.push_back({kNvEy, kNv0, params.gamma});
  jumps.push_back({kNvEy, kNvB, params.gamma_ce});
  jumps.push_back({kNvEy, kNvD, params.gamma_ce});
  for (NvState f : {kNvA1, kNvA2, kNvE1, kNvE2}) {
    jumps.push_back({f, kNvB, g2});
    jumps.push_back({f, kNvD, g2});
  }
  jumps.push_back({kNvA1, kNvS, params.gamma_s1});
  jumps.push_back({kNvA2, kNvS, params.gamma_s2});
  jumps.push_back({kNvE1, kNvS, params.gamma_s1});
  jumps.push_back({kNvE2, kNvS, params.gamma_s1});
  jumps.push_back({kNvS, kNv0, params.gamma_s});
  for (NvState s : {kNvEy, kNvA1, kNvA2, kNvE1, kNvE2})
    dephasings.push_back({s, params.gamma_phi});
}

ElectronModel build_nv_model(const NvParams& params, double delta_m_rad_us) {
  std::vector<JumpChannel> jumps;
  std::vector<DephasingChannel> dephasings;
  build_nv_channels(params, jumps, dephasings);
  return ElectronModel(build_nv_hamiltonian(params, delta_m_rad_us), std::move(jumps),
                       std::move(dephasings));
}

Operator nv_sgz() {
  Matrix m = nv_zero();
  m(kNvB, kNvD) = 1.0;
  m(kNvD, kNvB) = 1.0;
  return Operator(nv_basis(), std::move(m));
}

Operator nv_sg_plus() { return Operator(nv_basis(), sg_plus_matrix()); }
Operator nv_se_plus() { return Operator(nv_basis(), se_plus_matrix()); }

Operator nv_sg_perp(int xy) {
  const Matrix p = sg_plus_matrix();
  Matrix m = xy == 0 ? Matrix(0.5 * (p + p.adjoint())) : Matrix(-0.5 * kImag * (p - p.adjoint()));
  return Operator(nv_basis(), std::move(m));
}

Operator nv_se_perp(int xy) {
  const Matrix p = se_plus_matrix();
  Matrix m = xy == 0 ? Matrix(0.5 * (p + p.adjoint())) : Matrix(-0.5 * kImag * (p - p.adjoint()));
  return Operator(nv_basis(), std::move(m));
}

double AnalyticSteadyState::p_dd0(double delta) const {
  return 1.0 - (2.0 + 1.0 / w_e_ratio_) * p_ey0(delta);
}

double AnalyticSteadyState::p_ey2(double delta) const {
  return 0.5 / eta1 * w_a2_ratio_ * p_dd0(delta);
}

double AnalyticSteadyState::p_a1(double delta) const {
  return 2.0 * eta1 * p_ey0(delta) + w_a2_ratio_ * p_dd0(delta);
}

double AnalyticSteadyState::p_a2(double delta) const { return w_a2_s2_ratio_ * p_dd0(delta); }

double AnalyticSteadyState::p_ss(double delta) const { return ss_ratio_ * p_ey(delta); }

double AnalyticSteadyState::p_00(double delta) const { return (1.0 + 1.0 / w_e_ratio_) * p_ey(delta); }

double AnalyticSteadyState::p_bb(double delta) const { return bb_ratio_ * p_ey(delta); }

AnalyticSteadyState analytic_steady_state(const NvParams& params) {
  params.validate();
  if (params.gamma_s1 <= 0 || params.gamma_s <= 0 || params.gamma <= 0)
    throw SingularDenominator("analytic steady state needs gamma, gamma_s1, gamma_s > 0");
  AnalyticSteadyState a;
  const double gamma_a1 = params.jump_width(kNvA1);
  const double gamma_a2 = params.jump_width(kNvA2);
  const double oa = mhz_to_rad_us(params.rabi_a_mhz);
  const double oe = mhz_to_rad_us(params.rabi_e_mhz);
  const double delta = mhz_to_rad_us(params.detuning_a2_mhz);

  a.eta1 = params.gamma_ce / params.gamma_s1;
  a.eta2 = params.gamma_s / (params.gamma_s + params.gamma_ce);
  a.eta3 = gamma_a1 * gamma_a2 / ((params.gamma + params.gamma_s1) * (params.gamma + params.gamma_s1));
  // Effective pump rates Omega^2 / (width of the driven coherence). The b-A1
  // transition carries the A1 width, the 0-Ey transition the Ey width; the
  // latter is what the balance relation P_00/P_Ey and the full Liouvillian
  // both fix. Excited-state dephasing widens every line by 2 gamma_phi.
  a.w_a = oa * oa / (gamma_a1 + 2.0 * params.gamma_phi);
  a.w_e = oe * oe / (params.jump_width(kNvEy) + 2.0 * params.gamma_phi);
  a.w_a2 = 0.5 * oa * oa * (gamma_a2 + 2.0 * params.gamma_phi) / (delta * delta);
  a.chi = (params.gamma + params.gamma_phi) * oa * oa /
          (4.0 * a.eta1 * delta * delta * (params.gamma + params.gamma_s1));

  const double g_plus_2ce = params.gamma + 2.0 * params.gamma_ce;
  const double g_plus_s1 = params.gamma + params.gamma_s1;
  a.p0 = 1.0 / (2.0 / a.eta2 + 2.0 * a.eta1 * g_plus_s1 / a.w_a + g_plus_2ce / a.w_e);
  const double num = a.w_a * a.w_a;  // xi_perp = 0 form
  const double den = a.eta1 * a.eta2 +
                     a.w_a / g_plus_s1 * (1.0 + 0.5 * a.eta2 * g_plus_2ce / a.w_e);
  a.delta0 = std::sqrt(0.25 * a.eta1 * a.eta2 * num / den);

  a.w_e_ratio_ = a.w_e / g_plus_2ce;
  a.w_a2_ratio_ = a.w_a2 / g_plus_s1;
  a.w_a2_s2_ratio_ = a.w_a2 / (params.gamma + params.gamma_s2);
  a.ss_ratio_ = 2.0 * params.gamma_ce / params.gamma_s;
  a.bb_ratio_ = a.eta1 * (1.0 + params.gamma_phi / gamma_a1 + g_plus_s1 / a.w_a);
  return a;
}

ChiFactors chi_factors(const NvParams& params) {
  params.validate();
  ChiFactors c;
  const double dgs = mhz_to_rad_us(params.d_gs_mhz);
  c.chi_g = (params.gamma + 2.0 * params.gamma_ce) / (dgs * dgs);

  auto chi_f = [&](NvState f, double eps_f_mhz) {
    const double gap = mhz_to_rad_us(params.eps_ey_mhz - eps_f_mhz);
    if (gap == 0.0) throw SingularDenominator("chi_f: excited energy coincides with eps_Ey");
    return 0.25 * (params.jump_width(f) + params.gamma_phi) / (gap * gap);
  };
  c.chi_a1 = chi_f(kNvA1, params.eps_a1_mhz);
  c.chi_a2 = chi_f(kNvA2, params.eps_a2_mhz());
  c.chi_e1 = chi_f(kNvE1, params.eps_e1_mhz);
  c.chi_e2 = chi_f(kNvE2, params.eps_e2_mhz);

  if (params.gamma_s1 <= 0) throw SingularDenominator("chi: gamma_s1 must be positive");
  const double eta1 = params.gamma_ce / params.gamma_s1;
  const double oa = mhz_to_rad_us(params.rabi_a_mhz);
  const double delta = mhz_to_rad_us(params.detuning_a2_mhz);
  if (eta1 > 0) {
    c.chi = (params.gamma + params.gamma_phi) * oa * oa /
            (4.0 * eta1 * delta * delta * (params.gamma + params.gamma_s1));
  } else {
    // no cross leak: the off-resonant excitation parameter degenerates
    c.chi = oa > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return c;
}

LocalFrame local_frame(const Eigen::Matrix3d& tensor_mhz) {
  const Eigen::Vector3d row_z = tensor_mhz.row(2).transpose();
  const double a_z = row_z.norm();
  if (a_z <= 0.0) throw DegenerateTensor("local_frame: zero longitudinal tensor row");

  LocalFrame frame;
  frame.a_z_mhz = a_z;
  const Eigen::Vector3d ez = row_z / a_z;
  Eigen::Vector3d ex = Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitX().dot(ez) * ez;
  if (ex.norm() < 1e-8) ex = Eigen::Vector3d::UnitY() - Eigen::Vector3d::UnitY().dot(ez) * ez;
  ex.normalize();
  const Eigen::Vector3d ey = ez.cross(ex);
  frame.triad.col(0) = ex;
  frame.triad.col(1) = ey;
  frame.triad.col(2) = ez;
  return frame;
}

Eigen::Matrix3d dipolar_tensor(const Eigen::Vector3d& position_nm, double prefactor_mhz_nm3) {
  const double r = position_nm.norm();
  if (r < 0.05) throw InvalidModel("dipolar_tensor: position too close to the origin");
  const Eigen::Vector3d n = position_nm / r;
  Eigen::Matrix3d tensor = prefactor_mhz_nm3 / (r * r * r) *
                           (Eigen::Matrix3d::Identity() - 3.0 * n * n.transpose());
  tensor = 0.5 * (tensor + tensor.transpose().eval());
  return tensor;
}

CarbonSite make_carbon_site(const Eigen::Matrix3d& tensor_mhz) {
  CarbonSite site;
  site.tensor_mhz = tensor_mhz;
  site.frame = local_frame(tensor_mhz);
  const Eigen::Vector3cd e_minus_local =
      site.frame.triad.col(0).cast<Complex>() - kImag * site.frame.triad.col(1).cast<Complex>();
  const Eigen::Vector3cd a_dot = tensor_mhz.cast<Complex>() * e_minus_local;
  site.a_xm = a_dot(0);
  site.a_ym = a_dot(1);
  site.a_mm = site.a_xm - kImag * site.a_ym;
  site.a_pm = site.a_xm + kImag * site.a_ym;
  return site;
}

HfiDecomposition decompose_hfi(const NvParams& params, const std::optional<NitrogenSite>& nitrogen,
                               const std::vector<CarbonSite>& carbons) {
  HfiDecomposition out;
  out.longitudinal.electron_operator = nv_sgz();
  const auto energies = frame_energies(params);

  const Matrix sg_p = sg_plus_matrix();
  const Matrix se_p = se_plus_matrix();
  const Matrix sg_m = sg_p.adjoint();
  const Matrix se_m = se_p.adjoint();

  int nucleus = 0;
  if (nitrogen) {
    out.longitudinal.field_coefficients.push_back(mhz_to_rad_us(nitrogen->a_g_mhz));
    out.longitudinal.spins.push_back(1.0);
    // contact HFI; the spin-1 matrix element sqrt(2) is absorbed, so the same
    // operator serves every allowed m -> m+1 transition
    const Matrix v_raise = kInvSqrt2 * (mhz_to_rad_us(nitrogen->a_g_mhz) * sg_m +
                                        mhz_to_rad_us(nitrogen->a_e_mhz) * se_m);
    append_frequency_blocks(out.blocks, nucleus, FlipDirection::kRaise, v_raise, energies);
    append_frequency_blocks(out.blocks, nucleus, FlipDirection::kLower, v_raise.adjoint(), energies);
    ++nucleus;
  }

  for (const auto& site : carbons) {
    if (!(site.frame.a_z_mhz > 0)) throw DegenerateTensor("carbon site with a_z = 0");
    out.longitudinal.field_coefficients.push_back(mhz_to_rad_us(site.frame.a_z_mhz));
    out.longitudinal.spins.push_back(0.5);
    const Complex a_mm = mhz_to_rad_us(1.0) * site.a_mm;
    const Complex a_pm = mhz_to_rad_us(1.0) * site.a_pm;
    const Matrix v_raise = 0.25 * (a_mm * (sg_p + se_p) + a_pm * (sg_m + se_m));
    if (v_raise.cwiseAbs().maxCoeff() > 0) {
      append_frequency_blocks(out.blocks, nucleus, FlipDirection::kRaise, v_raise, energies);
      append_frequency_blocks(out.blocks, nucleus, FlipDirection::kLower, v_raise.adjoint(),
                              energies);
    }
    ++nucleus;
  }
  return out;
}

double nitrogen_flip_rate(const NvParams& params, const NitrogenSite& site, double p_eyey,
                          double gamma_n) {
  if (p_eyey < 0 || p_eyey > 1) throw InvalidModel("nitrogen_flip_rate: population out of range");
  const ChiFactors c = chi_factors(params);
  const double a_g = mhz_to_rad_us(site.a_g_mhz);
  const double a_e = mhz_to_rad_us(site.a_e_mhz);
  return (a_g * a_g * c.chi_g + a_e * a_e * c.sum_chi_f()) * p_eyey + gamma_n;
}

double carbon_flip_rate(const NvParams& params, const CarbonSite& site, double p_eyey,
                        double gamma_c) {
  if (p_eyey < 0 || p_eyey > 1) throw InvalidModel("carbon_flip_rate: population out of range");
  const ChiFactors c = chi_factors(params);
  const double scale = kTwoPi * kTwoPi;  // amplitudes are stored in MHz
  const double ground =
      c.chi_g * (std::norm(site.a_mm) + std::norm(site.a_pm)) * scale / 8.0;
  const double excited_y = std::norm(site.a_ym) * scale * (c.chi_a1 + c.chi_e1) / 2.0;
  const double excited_x = std::norm(site.a_xm) * scale * (c.chi_a2 + c.chi_e2) / 2.0;
  return (ground + excited_y + excited_x) * p_eyey + gamma_c;
}

NvSystem make_nv_system(const NvParams& params, std::optional<NitrogenSite> nitrogen,
                        std::vector<CarbonSite> carbons) {
  NvSystem sys;
  sys.params = params;
  sys.model = build_nv_model(params, 0.0);
  sys.k_operator = nv_sgz();
  auto decomposition = decompose_hfi(params, nitrogen, carbons);
  sys.hfi = std::move(decomposition.longitudinal);
  sys.blocks = std::move(decomposition.blocks);
  sys.nitrogen = std::move(nitrogen);
  sys.carbons = std::move(carbons);
  sys.zeeman_rad_us = mhz_to_rad_us(params.zeeman_mhz);
  return sys;
}

}  // namespace hfine
