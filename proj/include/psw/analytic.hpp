#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "psw/model.hpp"

namespace psw {

// Steady-state fiber transmission of a whispering-gallery resonator with a
// forward mode driven through the fiber and a backward mode coupled to it at
// rate h, both damped at kappa = kappa_i + kappa_ex. Returns the complex
// transmission amplitude t such that T = |t|^2.
template <typename Real>
std::complex<Real> empty_cavity_amplitude(Real detuning, Real kappa_i, Real kappa_ex, Real h) {
  const std::complex<Real> z(kappa_i + kappa_ex, detuning);
  return Real(1) - Real(2) * kappa_ex * z / (z * z + h * h);
}

template <typename Real>
Real empty_cavity_transmission(Real detuning, Real kappa_i, Real kappa_ex, Real h) {
  return std::norm(empty_cavity_amplitude(detuning, kappa_i, kappa_ex, h));
}

// Power leaving backwards through the fiber (backscatter via h).
template <typename Real>
Real empty_cavity_reflection(Real detuning, Real kappa_i, Real kappa_ex, Real h) {
  const std::complex<Real> z(kappa_i + kappa_ex, detuning);
  return std::norm(Real(2) * kappa_ex * h / (z * z + h * h));
}

// Low-bandwidth single-photon reflection/transmission of a cavity-coupled
// Lambda atom in the reflecting state (no parasitic couplings).
template <typename Real>
Real reflection_probability(Real kappa_i, Real kappa_ex, Real C) {
  const Real k = kappa_i + kappa_ex;
  const Real r = kappa_ex / k;
  return r * r * Real(4) * C * C / ((Real(1) + Real(2) * C) * (Real(1) + Real(2) * C));
}

template <typename Real>
Real transmission_probability(Real kappa_i, Real kappa_ex, Real C) {
  const Real k = kappa_i + kappa_ex;
  const Real num = kappa_i - kappa_ex / (Real(1) + Real(2) * C);
  return num * num / (k * k);
}

double reflection_probability(const SystemParams& params);
double transmission_probability(const SystemParams& params);

// How the calibration atom couples to the two counter-propagating modes.
// Chiral: the atom couples at g only to the forward (probe) mode, which is
// the TM behaviour that produces a single pair of Rabi lobes. StandingWave:
// the atom couples at g to the symmetric combination (a + b)/sqrt(2).
enum class AtomGeometry { Chiral, StandingWave };

// Transmission amplitude with a resonant two-level atom. Solves the
// three-amplitude steady state (forward mode, backward mode, polarization).
std::complex<double> atom_cavity_amplitude(double detuning, double g, const SystemParams& params,
                                           AtomGeometry geometry = AtomGeometry::Chiral);
double atom_cavity_transmission(double detuning, double g, const SystemParams& params,
                                AtomGeometry geometry = AtomGeometry::Chiral);

struct SpectrumPoint {
  double detuning = 0.0;
  double transmission = 0.0;
};

std::vector<SpectrumPoint> empty_cavity_spectrum(std::span<const double> detunings, const SystemParams& params);

// Monte Carlo average of the atom spectrum over g ~ gdist; the same g samples
// are used at every detuning. Deterministic given the seed.
std::vector<SpectrumPoint> averaged_atom_spectrum(std::span<const double> detunings, const GDistribution& gdist,
                                                  const SystemParams& params, std::size_t n_samples,
                                                  std::uint64_t seed = 0,
                                                  AtomGeometry geometry = AtomGeometry::Chiral);

std::vector<double> linear_grid(double lo, double hi, std::size_t points);

// CSV with header `detuning_mhz,transmission`.
void write_spectrum_csv(const std::filesystem::path& path, std::span<const SpectrumPoint> points);
std::vector<SpectrumPoint> read_spectrum_csv(const std::filesystem::path& path);

// Least-squares fit of (g, kappa_i, h) to a measured atom spectrum, holding
// kappa_ex and gamma of `base` fixed (set fix_critical to tie kappa_ex to
// sqrt(kappa_i^2 + h^2) instead). h is constrained to be >= 0.
struct SpectrumFit {
  double g = 0.0, kappa_i = 0.0, h = 0.0;
  double g_stderr = 0.0, kappa_i_stderr = 0.0, h_stderr = 0.0;
  double rms_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct SpectrumFitOptions {
  bool fix_critical = true;
  AtomGeometry geometry = AtomGeometry::Chiral;
  double initial_kappa_i = 5.0;
  double initial_h = 0.5;
};

SpectrumFit fit_atom_spectrum(std::span<const SpectrumPoint> data, const SystemParams& base,
                              const SpectrumFitOptions& options = {});

// Half the separation of the two deepest minima on either side of zero
// detuning; the fit's starting value for g.
double lobe_half_separation(std::span<const SpectrumPoint> data);

// `{param: value, stderr}` flat text.
void write_fit_report(const std::filesystem::path& path, const SpectrumFit& fit);

}  // namespace psw
