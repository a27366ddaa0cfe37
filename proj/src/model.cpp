#include "psw/model.hpp"

#include <cmath>

namespace psw {

std::string to_string(AtomLevel level) {
  switch (level) {
    case AtomLevel::GMinus: return "g_minus";
    case AtomLevel::GZero: return "g_zero";
    case AtomLevel::GPlus: return "g_plus";
    case AtomLevel::Excited: return "excited";
  }
  return "?";
}

AtomLevel parse_atom_level(const std::string& text) {
  if (text == "g_minus" || text == "-1") return AtomLevel::GMinus;
  if (text == "g_zero" || text == "0") return AtomLevel::GZero;
  if (text == "g_plus" || text == "+1" || text == "1") return AtomLevel::GPlus;
  if (text == "excited") return AtomLevel::Excited;
  throw InvalidParameter("unknown atom level '" + text + "'");
}

bool is_ground(AtomLevel level) { return level != AtomLevel::Excited; }

AtomLevel mirrored(AtomLevel level) {
  switch (level) {
    case AtomLevel::GMinus: return AtomLevel::GPlus;
    case AtomLevel::GPlus: return AtomLevel::GMinus;
    default: return level;
  }
}

std::string to_string(Direction dir) { return dir == Direction::Rightward ? "right" : "left"; }

Direction parse_direction(const std::string& text) {
  if (text == "right" || text == "rightward") return Direction::Rightward;
  if (text == "left" || text == "leftward") return Direction::Leftward;
  throw InvalidParameter("unknown direction '" + text + "'");
}

std::string to_string(SwitchState s) {
  switch (s) {
    case SwitchState::ReflectRightward: return "reflect_rightward";
    case SwitchState::ReflectLeftward: return "reflect_leftward";
    case SwitchState::Inert: return "inert";
  }
  return "?";
}

SwitchState switch_state(AtomLevel level) {
  switch (level) {
    case AtomLevel::GMinus: return SwitchState::ReflectRightward;
    case AtomLevel::GPlus: return SwitchState::ReflectLeftward;
    default: return SwitchState::Inert;
  }
}

SwitchState toggled(SwitchState s) {
  switch (s) {
    case SwitchState::ReflectRightward: return SwitchState::ReflectLeftward;
    case SwitchState::ReflectLeftward: return SwitchState::ReflectRightward;
    default: return s;
  }
}

void SystemParams::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw InvalidParameter(std::string(name) + " must be a finite rate >= 0");
  };
  nonneg(g, "g");
  nonneg(g_minus, "g_minus");
  nonneg(g_pi, "g_pi");
  nonneg(kappa_i, "kappa_i");
  nonneg(kappa_ex, "kappa_ex");
  nonneg(h, "h");
  nonneg(gamma, "gamma");
  nonneg(kappa_s, "kappa_s");
  if (g_minus > g) throw InvalidParameter("g_minus must not exceed g");
  if (g_pi > g) throw InvalidParameter("g_pi must not exceed g");
}

SystemParams SystemParams::experiment() {
  SystemParams p;
  p.g = 27.0 / std::sqrt(3.0);
  auto para = parasitic_couplings(p.g);
  p.g_minus = para.g_minus;
  p.g_pi = para.g_pi;
  p.kappa_i = 7.6;
  p.kappa_ex = 30.0;
  p.h = 1.0;
  p.gamma = 2.94;
  p.kappa_s = 0.3;
  return p;
}

GDistribution GDistribution::experiment() { return {27.0 / std::sqrt(3.0), 10.0 / std::sqrt(3.0)}; }

double cooperativity(double g, double kappa_i, double kappa_ex, double gamma) {
  const double denom = (kappa_i + kappa_ex) * gamma;
  if (!(denom > 0.0)) throw InvalidParameter("cooperativity needs gamma > 0 and kappa_i + kappa_ex > 0");
  return g * g / denom;
}

double cooperativity(const SystemParams& p) { return cooperativity(p.g, p.kappa_i, p.kappa_ex, p.gamma); }

double critical_coupling_kex(double kappa_i, double h) { return std::hypot(kappa_i, h); }

ParasiticCouplings parasitic_couplings(double g) { return {g / 5.0, g / 7.0}; }

SystemParams system_params_from_config(KeyValueConfig& cfg) {
  SystemParams p = SystemParams::experiment();
  p.g = cfg.take_double("g", p.g);
  auto para = parasitic_couplings(p.g);
  p.g_minus = cfg.take_double("g_minus", para.g_minus);
  p.g_pi = cfg.take_double("g_pi", para.g_pi);
  p.kappa_i = cfg.take_double("kappa_i", p.kappa_i);
  p.kappa_ex = cfg.take_double("kappa_ex", p.kappa_ex);
  p.h = cfg.take_double("h", p.h);
  p.gamma = cfg.take_double("gamma", p.gamma);
  p.kappa_s = cfg.take_double("kappa_s", p.kappa_s);
  p.validate();
  return p;
}

GDistribution g_distribution_from_config(KeyValueConfig& cfg) {
  GDistribution d = GDistribution::experiment();
  d.mean_g = cfg.take_double("g_mean", d.mean_g);
  d.sigma_g = cfg.take_double("g_sigma", d.sigma_g);
  if (d.mean_g < 0.0 || d.sigma_g < 0.0) throw InvalidParameter("g_mean and g_sigma must be >= 0");
  return d;
}

SystemParams load_system_params(const std::filesystem::path& path) {
  auto cfg = KeyValueConfig::load(path);
  auto p = system_params_from_config(cfg);
  cfg.require_all_consumed();
  return p;
}

void add_to_manifest(Manifest& m, const SystemParams& p) {
  m.add("g", p.g);
  m.add("g_minus", p.g_minus);
  m.add("g_pi", p.g_pi);
  m.add("kappa_i", p.kappa_i);
  m.add("kappa_ex", p.kappa_ex);
  m.add("h", p.h);
  m.add("gamma", p.gamma);
  m.add("kappa_s", p.kappa_s);
}

}  // namespace psw
