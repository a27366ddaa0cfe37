#include "psw/analytic.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>

#include "psw/random.hpp"

namespace psw {

double reflection_probability(const SystemParams& p) {
  return reflection_probability(p.kappa_i, p.kappa_ex, cooperativity(p));
}

double transmission_probability(const SystemParams& p) {
  return transmission_probability(p.kappa_i, p.kappa_ex, cooperativity(p));
}

std::complex<double> atom_cavity_amplitude(double detuning, double g, const SystemParams& p,
                                           AtomGeometry geometry) {
  using cd = std::complex<double>;
  const cd i(0.0, 1.0);
  const cd z(p.kappa(), detuning);
  const cd w(p.gamma, detuning);
  const double ga = geometry == AtomGeometry::Chiral ? g : g / std::sqrt(2.0);
  const double gb = geometry == AtomGeometry::Chiral ? 0.0 : g / std::sqrt(2.0);

  // Rows: forward mode, backward mode, atomic polarization.
  Eigen::Matrix3cd m;
  m << z, i * p.h, i * ga,
       i * p.h, z, i * gb,
       i * ga, i * gb, w;
  Eigen::Vector3cd drive(std::sqrt(2.0 * p.kappa_ex), 0.0, 0.0);
  Eigen::Vector3cd amp = m.partialPivLu().solve(drive);
  return 1.0 - std::sqrt(2.0 * p.kappa_ex) * amp(0);
}

double atom_cavity_transmission(double detuning, double g, const SystemParams& p, AtomGeometry geometry) {
  return std::norm(atom_cavity_amplitude(detuning, g, p, geometry));
}

std::vector<SpectrumPoint> empty_cavity_spectrum(std::span<const double> detunings, const SystemParams& p) {
  std::vector<SpectrumPoint> out;
  out.reserve(detunings.size());
  for (double d : detunings) out.push_back({d, empty_cavity_transmission(d, p.kappa_i, p.kappa_ex, p.h)});
  return out;
}

namespace {

// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0.0, c = 0.0;
  void add(double x) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      c += (sum - t) + x;
    else
      c += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

}  // namespace

std::vector<SpectrumPoint> averaged_atom_spectrum(std::span<const double> detunings, const GDistribution& gdist,
                                                  const SystemParams& p, std::size_t n_samples,
                                                  std::uint64_t seed, AtomGeometry geometry) {
  if (n_samples < 1) throw InvalidParameter("averaged_atom_spectrum needs n_samples >= 1");
  Rng rng(child_seed(seed, 0x5fec, 0));
  std::vector<double> gs(n_samples);
  for (auto& g : gs) g = gdist.sample(rng);

  std::vector<SpectrumPoint> out;
  out.reserve(detunings.size());
  for (double d : detunings) {
    CompensatedSum acc;
    for (double g : gs) acc.add(atom_cavity_transmission(d, g, p, geometry));
    out.push_back({d, acc.value() / static_cast<double>(n_samples)});
  }
  return out;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  if (points == 0) return {};
  if (points == 1) return {lo};
  std::vector<double> out(points);
  for (std::size_t k = 0; k < points; ++k)
    out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  return out;
}

void write_spectrum_csv(const std::filesystem::path& path, std::span<const SpectrumPoint> points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(12);
  out << "detuning_mhz,transmission\n";
  for (const auto& pt : points) out << pt.detuning << ',' << pt.transmission << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<SpectrumPoint> read_spectrum_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::vector<SpectrumPoint> out;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.rfind("detuning", 0) == 0) continue;
    std::istringstream ls(line);
    SpectrumPoint pt;
    char comma = 0;
    if (!(ls >> pt.detuning >> comma >> pt.transmission) || comma != ',')
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed spectrum row");
    out.push_back(pt);
  }
  return out;
}

double lobe_half_separation(std::span<const SpectrumPoint> data) {
  const SpectrumPoint* left = nullptr;
  const SpectrumPoint* right = nullptr;
  for (const auto& pt : data) {
    if (pt.detuning < 0 && (!left || pt.transmission < left->transmission)) left = &pt;
    if (pt.detuning > 0 && (!right || pt.transmission < right->transmission)) right = &pt;
  }
  if (!left || !right) return 0.0;
  return 0.5 * (right->detuning - left->detuning);
}

void write_fit_report(const std::filesystem::path& path, const SpectrumFit& fit) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(8);
  out << "{g: " << fit.g << ", " << fit.g_stderr << "}\n";
  out << "{kappa_i: " << fit.kappa_i << ", " << fit.kappa_i_stderr << "}\n";
  out << "{h: " << fit.h << ", " << fit.h_stderr << "}\n";
  out << "{rms_residual: " << fit.rms_residual << ", 0}\n";
  out << "{converged: " << (fit.converged ? 1 : 0) << ", 0}\n";
}

}  // namespace psw
