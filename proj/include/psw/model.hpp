#pragma once

#include <filesystem>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "psw/config.hpp"

namespace psw {

// Every rate in this project is a frequency nu = omega / 2pi quoted in MHz and
// acting as a half-width (amplitude damping) rate; time is in ns. Dynamics run
// on angular rates in rad/ns.
template <typename Real>
constexpr Real angular_rate(Real mhz) {
  return Real(2) * std::numbers::pi_v<Real> * Real(1e-3) * mhz;
}

class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Ground sublevels of F=1 and the F'=0 excited state. The integer value is
// the basis ordering used by the Hilbert space.
enum class AtomLevel : int { GMinus = 0, GZero = 1, GPlus = 2, Excited = 3 };
inline constexpr int kAtomLevels = 4;

std::string to_string(AtomLevel level);
AtomLevel parse_atom_level(const std::string& text);
bool is_ground(AtomLevel level);
// m_F -> -m_F.
AtomLevel mirrored(AtomLevel level);

// Propagation direction in the fiber. Rightward light is sigma+, leftward is
// sigma-.
enum class Direction : int { Rightward = 0, Leftward = 1 };
std::string to_string(Direction dir);
Direction parse_direction(const std::string& text);
constexpr Direction opposite(Direction d) {
  return d == Direction::Rightward ? Direction::Leftward : Direction::Rightward;
}

enum class SwitchState { ReflectRightward, ReflectLeftward, Inert };
std::string to_string(SwitchState s);
SwitchState switch_state(AtomLevel level);
SwitchState toggled(SwitchState s);

struct SystemParams {
  double g = 0.0;         // dominant coupling of each chiral transition
  double g_minus = 0.0;   // parasitic coupling to the opposite circular transition
  double g_pi = 0.0;      // parasitic coupling to the pi transition
  double kappa_i = 0.0;   // intrinsic cavity loss
  double kappa_ex = 0.0;  // fiber coupling
  double h = 0.0;         // coupling between counter-propagating modes
  double gamma = 0.0;     // atomic free-space dipole decay
  double kappa_s = 0.0;   // source-mode decay (inverse input-pulse width)

  double kappa() const { return kappa_i + kappa_ex; }
  // Throws InvalidParameter if any invariant is violated.
  void validate() const;

  // The experimental operating point: g = 27/sqrt(3) MHz on the F=1 -> F'=0
  // manifold, kappa_ex = 30 MHz overcoupled, parasitic couplings (g/5, g/7),
  // gamma back-solved from C = 2.2.
  static SystemParams experiment();
};

// Coupling strength distribution across atom transits. Samples below zero
// are rejected and redrawn.
struct GDistribution {
  double mean_g = 0.0;
  double sigma_g = 0.0;

  template <typename URNG>
  double sample(URNG& rng) const {
    if (sigma_g <= 0.0) return mean_g;
    std::normal_distribution<double> normal(mean_g, sigma_g);
    for (;;) {
      double g = normal(rng);
      if (g >= 0.0) return g;
    }
  }

  static GDistribution experiment();
};

double cooperativity(const SystemParams& params);
double cooperativity(double g, double kappa_i, double kappa_ex, double gamma);

// kappa_ex at which the empty-cavity on-resonance transmission vanishes.
double critical_coupling_kex(double kappa_i, double h);

struct ParasiticCouplings {
  double g_minus = 0.0;
  double g_pi = 0.0;
};
ParasiticCouplings parasitic_couplings(double g);

// Reads g, g_minus, g_pi, kappa_i, kappa_ex, h, gamma, kappa_s. Missing keys
// fall back to SystemParams::experiment(); g_minus and g_pi default to the
// parasitic ratios of whatever g ends up being.
SystemParams system_params_from_config(KeyValueConfig& cfg);
// Reads g_mean / g_sigma.
GDistribution g_distribution_from_config(KeyValueConfig& cfg);
// Standalone loader: every key in the file must be a SystemParams key.
SystemParams load_system_params(const std::filesystem::path& path);

void add_to_manifest(Manifest& m, const SystemParams& p);

}  // namespace psw
