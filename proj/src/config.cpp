#include "hfine/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hfine/units.hpp"

namespace hfine {

namespace {

struct Value {
  enum Kind { kNumber, kBool, kList } kind = kNumber;
  double number = 0;
  bool boolean = false;
  std::vector<double> list;
  int line = 0;
  bool consumed = false;
};

using Section = std::map<std::string, Value>;

struct RawConfig {
  std::map<std::string, Section> sections;       // [name]
  std::vector<Section> carbons;                  // [[carbon]]
};

[[noreturn]] void fail(int line, const std::string& message) {
  throw ConfigError("config line " + std::to_string(line) + ": " + message);
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_number(const std::string& text, int line) {
  const std::string t = trim(text);
  if (t.empty()) fail(line, "empty numeric value");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) fail(line, "malformed number '" + t + "'");
  if (!std::isfinite(v)) fail(line, "non-finite value");
  return v;
}

Value parse_value(const std::string& text, int line) {
  Value v;
  v.line = line;
  const std::string t = trim(text);
  if (t == "true" || t == "false") {
    v.kind = Value::kBool;
    v.boolean = t == "true";
    return v;
  }
  if (!t.empty() && t.front() == '[') {
    if (t.back() != ']') fail(line, "unterminated list");
    v.kind = Value::kList;
    std::stringstream items(t.substr(1, t.size() - 2));
    std::string item;
    while (std::getline(items, item, ',')) v.list.push_back(parse_number(item, line));
    return v;
  }
  v.kind = Value::kNumber;
  v.number = parse_number(t, line);
  return v;
}

RawConfig tokenize(const std::string& text) {
  RawConfig raw;
  Section* current = nullptr;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.size() >= 4 && line[1] == '[') {
        if (line.substr(0, 2) != "[[" || line.substr(line.size() - 2) != "]]")
          fail(line_no, "malformed table header");
        const std::string name = trim(line.substr(2, line.size() - 4));
        if (name != "carbon") fail(line_no, "unknown table '" + name + "'");
        raw.carbons.emplace_back();
        current = &raw.carbons.back();
        continue;
      }
      if (line.back() != ']') fail(line_no, "malformed section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      static const std::set<std::string> known = {"nv", "nitrogen", "bath", "run"};
      if (!known.count(name)) fail(line_no, "unknown section '" + name + "'");
      current = &raw.sections[name];
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
    if (current == nullptr) fail(line_no, "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(line_no, "empty key");
    if (current->count(key)) fail(line_no, "duplicate key '" + key + "'");
    (*current)[key] = parse_value(line.substr(eq + 1), line_no);
  }
  return raw;
}

class SectionReader {
 public:
  SectionReader(Section* section, std::string name) : section_(section), name_(std::move(name)) {}

  bool has(const std::string& key) const { return section_ && section_->count(key); }

  void number(const std::string& key, double& out) {
    if (Value* v = get(key)) {
      if (v->kind != Value::kNumber) fail(v->line, "'" + key + "' must be a number");
      out = v->number;
    }
  }

  void integer(const std::string& key, int& out) {
    if (Value* v = get(key)) {
      if (v->kind != Value::kNumber || v->number != std::floor(v->number))
        fail(v->line, "'" + key + "' must be an integer");
      out = static_cast<int>(v->number);
    }
  }

  void unsigned64(const std::string& key, std::uint64_t& out) {
    if (Value* v = get(key)) {
      if (v->kind != Value::kNumber || v->number < 0 || v->number != std::floor(v->number))
        fail(v->line, "'" + key + "' must be a nonnegative integer");
      out = static_cast<std::uint64_t>(v->number);
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (Value* v = get(key)) {
      if (v->kind != Value::kBool) fail(v->line, "'" + key + "' must be true or false");
      out = v->boolean;
    }
  }

  void list(const std::string& key, std::vector<double>& out, int required_size = -1) {
    if (Value* v = get(key)) {
      if (v->kind != Value::kList) fail(v->line, "'" + key + "' must be a list");
      if (required_size >= 0 && static_cast<int>(v->list.size()) != required_size)
        fail(v->line, "'" + key + "' needs exactly " + std::to_string(required_size) + " entries");
      out = v->list;
    }
  }

  bool optional_number(const std::string& key, double& out) {
    const bool present = has(key);
    number(key, out);
    return present;
  }

  // rate given either per ns or per us; both present is an error
  void rate(const std::string& stem, double& out_per_us) {
    const std::string ns_key = stem + "_per_ns";
    const std::string us_key = stem + "_per_us";
    if (has(ns_key) && has(us_key)) {
      fail((*section_)[ns_key].line, "give '" + stem + "' in one unit only");
    }
    double v;
    if (Value* raw = get(ns_key)) {
      if (raw->kind != Value::kNumber) fail(raw->line, "'" + ns_key + "' must be a number");
      v = per_ns_to_per_us(raw->number);
      out_per_us = v;
    } else if (Value* raw2 = get(us_key)) {
      if (raw2->kind != Value::kNumber) fail(raw2->line, "'" + us_key + "' must be a number");
      out_per_us = raw2->number;
    }
  }

  void finish() const {
    if (!section_) return;
    for (const auto& [key, value] : *section_) {
      if (!value.consumed)
        fail(value.line, "unknown key '" + key + "' in section [" + name_ + "]");
    }
  }

 private:
  Value* get(const std::string& key) {
    if (!section_) return nullptr;
    auto it = section_->find(key);
    if (it == section_->end()) return nullptr;
    it->second.consumed = true;
    return &it->second;
  }

  Section* section_;
  std::string name_;
};

void read_grid(SectionReader& reader, const std::string& range_key, const std::string& points_key,
               double& lo, double& hi, int& points) {
  std::vector<double> range = {lo, hi};
  reader.list(range_key, range, 2);
  lo = range[0];
  hi = range[1];
  reader.integer(points_key, points);
  if (points < 2) throw ConfigError("'" + points_key + "' must be at least 2");
  if (!(hi > lo)) throw ConfigError("'" + range_key + "' range must be increasing");
}

}  // namespace

std::vector<double> RunSection::rabi_scan_grid() const {
  std::vector<double> grid(rabi_scan_points);
  if (rabi_scan_log) {
    const double l0 = std::log(rabi_scan_lo_mhz);
    const double l1 = std::log(rabi_scan_hi_mhz);
    for (int i = 0; i < rabi_scan_points; ++i)
      grid[i] = std::exp(l0 + (l1 - l0) * i / (rabi_scan_points - 1));
  } else {
    for (int i = 0; i < rabi_scan_points; ++i)
      grid[i] = rabi_scan_lo_mhz + (rabi_scan_hi_mhz - rabi_scan_lo_mhz) * i / (rabi_scan_points - 1);
  }
  return grid;
}

std::vector<double> RunSection::delta_scan_grid_rad_us() const {
  std::vector<double> grid(delta_scan_points);
  for (int i = 0; i < delta_scan_points; ++i)
    grid[i] = mhz_to_rad_us(delta_scan_lo_mhz +
                            (delta_scan_hi_mhz - delta_scan_lo_mhz) * i / (delta_scan_points - 1));
  return grid;
}

std::vector<double> RunSection::omega_re_grid_rad_us() const {
  std::vector<double> grid(omega_re_points);
  for (int i = 0; i < omega_re_points; ++i)
    grid[i] = mhz_to_rad_us(omega_re_lo_mhz +
                            (omega_re_hi_mhz - omega_re_lo_mhz) * i / (omega_re_points - 1));
  return grid;
}

NarrowingParams Scenario::narrowing_params(double zeeman_rad_us) const {
  NarrowingParams params =
      narrowing_from_nv(nv, bath.n_spins, bath.a_par_mhz, bath.a_perp_mhz, bath.gamma_c_per_us,
                        zeeman_rad_us);
  if (bath.flip_rate_override) params.flip_rate = *bath.flip_rate_override;
  if (bath.delta0_override_mhz) params.delta0 = mhz_to_rad_us(*bath.delta0_override_mhz);
  if (bath.depol_override)
    params.depol_total = *bath.depol_override;
  else if (bath.flip_rate_override)
    params.depol_total = bath.gamma_c_per_us + params.chi * params.flip_rate;
  return params;
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

Scenario parse_scenario_text(const std::string& text, const std::string& source_name) {
  RawConfig raw = tokenize(text);
  Scenario scenario;
  scenario.source = source_name;
  scenario.config_hash = fnv1a_hash(text);

  {
    auto it = raw.sections.find("nv");
    SectionReader nv(it == raw.sections.end() ? nullptr : &it->second, "nv");
    NvParams& p = scenario.nv;
    nv.number("Omega_A_MHz", p.rabi_a_mhz);
    nv.number("Omega_E_MHz", p.rabi_e_mhz);
    nv.number("Delta_MHz", p.detuning_a2_mhz);
    nv.number("zeeman_MHz", p.zeeman_mhz);
    nv.number("strain_MHz", p.strain_mhz);
    nv.number("D_gs_MHz", p.d_gs_mhz);
    nv.number("eps_Ey_MHz", p.eps_ey_mhz);
    nv.number("eps_A1_MHz", p.eps_a1_mhz);
    nv.number("eps_E1_MHz", p.eps_e1_mhz);
    nv.number("eps_E2_MHz", p.eps_e2_mhz);
    nv.rate("gamma", p.gamma);
    nv.rate("gamma_s1", p.gamma_s1);
    nv.rate("gamma_s2", p.gamma_s2);
    nv.rate("gamma_ce", p.gamma_ce);
    nv.rate("gamma_s", p.gamma_s);
    nv.rate("gamma_phi", p.gamma_phi);
    nv.boolean("a2_coupling", p.a2_coupling);
    nv.finish();
    p.validate();
  }

  {
    auto it = raw.sections.find("nitrogen");
    if (it != raw.sections.end()) {
      SectionReader nitrogen(&it->second, "nitrogen");
      NitrogenSite site;
      nitrogen.number("A_g_MHz", site.a_g_mhz);
      nitrogen.number("A_e_MHz", site.a_e_mhz);
      double gamma_n = scenario.gamma_n_per_us;
      nitrogen.rate("gamma_N", gamma_n);
      nitrogen.finish();
      if (site.a_g_mhz < 0 || site.a_e_mhz < 0)
        throw ConfigError("nitrogen couplings must be nonnegative");
      scenario.gamma_n_per_us = gamma_n;
      scenario.nitrogen = site;
    }
  }

  for (auto& section : raw.carbons) {
    SectionReader carbon(&section, "carbon");
    std::vector<double> tensor, position;
    carbon.list("tensor_MHz", tensor);
    carbon.list("position_nm", position);
    double prefactor = kNvC13DipolarMhzNm3;
    carbon.number("dipolar_prefactor_MHz_nm3", prefactor);
    carbon.finish();
    if (tensor.empty() == position.empty())
      throw ConfigError("each [[carbon]] needs exactly one of tensor_MHz or position_nm");
    Eigen::Matrix3d a;
    if (!tensor.empty()) {
      if (tensor.size() != 9) throw ConfigError("tensor_MHz needs 9 row-major entries");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a(r, c) = tensor[static_cast<std::size_t>(3 * r + c)];
    } else {
      if (position.size() != 3) throw ConfigError("position_nm needs 3 entries");
      a = dipolar_tensor(Eigen::Vector3d(position[0], position[1], position[2]), prefactor);
    }
    scenario.carbons.push_back(make_carbon_site(a));
  }

  {
    auto it = raw.sections.find("bath");
    SectionReader bath(it == raw.sections.end() ? nullptr : &it->second, "bath");
    BathSection& b = scenario.bath;
    bath.integer("N", b.n_spins);
    bath.number("A_par_MHz", b.a_par_mhz);
    bath.number("A_perp_MHz", b.a_perp_mhz);
    if (bath.has("gamma_C_per_s") && bath.has("gamma_C_per_us"))
      throw ConfigError("give gamma_C in one unit only");
    double per_s;
    if (bath.optional_number("gamma_C_per_s", per_s)) b.gamma_c_per_us = per_s_to_per_us(per_s);
    bath.number("gamma_C_per_us", b.gamma_c_per_us);
    double v;
    if (bath.optional_number("R_per_us", v)) b.flip_rate_override = v;
    if (bath.optional_number("Gamma_dep_per_us", v)) b.depol_override = v;
    if (bath.optional_number("delta0_MHz", v)) b.delta0_override_mhz = v;
    bath.finish();
    if (b.n_spins <= 0 || b.n_spins > kMaxEnumeratedConfigs)
      throw ConfigError("bath N out of range");
    if (b.gamma_c_per_us < 0) throw ConfigError("gamma_C must be nonnegative");
  }

  {
    auto it = raw.sections.find("run");
    SectionReader run(it == raw.sections.end() ? nullptr : &it->second, "run");
    RunSection& r = scenario.run;
    run.unsigned64("seed", r.seed);
    read_grid(run, "delta_scan_MHz", "delta_scan_points", r.delta_scan_lo_mhz,
              r.delta_scan_hi_mhz, r.delta_scan_points);
    read_grid(run, "omega_re_scan_MHz", "omega_re_points", r.omega_re_lo_mhz,
              r.omega_re_hi_mhz, r.omega_re_points);
    run.list("Omega_A_readout_MHz", r.rabi_a_readout_mhz);
    run.number("C_photon", r.photon_factor_c);
    read_grid(run, "Omega_A_scan_MHz", "Omega_A_scan_points", r.rabi_scan_lo_mhz,
              r.rabi_scan_hi_mhz, r.rabi_scan_points);
    run.boolean("Omega_A_scan_log", r.rabi_scan_log);
    run.boolean("kmc", r.kmc);
    run.integer("kmc_trajectories", r.kmc_trajectories);
    run.unsigned64("kmc_events", r.kmc_events);
    run.number("squeeze_rabi_MHz", r.squeeze_rabi_mhz);
    run.number("squeeze_detuning_MHz", r.squeeze_detuning_mhz);
    run.rate("squeeze_gamma", r.squeeze_gamma_per_us);
    run.number("squeeze_coupling_MHz", r.squeeze_coupling_mhz);
    run.integer("squeeze_n_spins", r.squeeze_n_spins);
    run.finish();
    if (r.rabi_scan_log && r.rabi_scan_lo_mhz <= 0)
      throw ConfigError("log Omega_A scan needs a positive lower bound");
    if (r.photon_factor_c < 0) throw ConfigError("C_photon must be nonnegative");
    if (r.kmc_trajectories <= 0 || r.kmc_events == 0)
      throw ConfigError("kmc settings must be positive");
    if (r.rabi_a_readout_mhz.empty()) throw ConfigError("need at least one readout Rabi frequency");
  }

  return scenario;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse_scenario_text(buffer.str(), path);
}

}  // namespace hfine
