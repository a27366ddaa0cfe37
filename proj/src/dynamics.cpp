#include "psw/dynamics.hpp"

#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "psw/random.hpp"

namespace psw {

namespace odeint = boost::numeric::odeint;

Eigen::MatrixXcd assemble(const std::vector<OperatorTerm>& terms, Index dimension, double kappa_s) {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dimension, dimension);
  const double scale[3] = {1.0, std::sqrt(kappa_s), kappa_s};
  for (const auto& t : terms) m(t.row, t.col) += t.value * scale[static_cast<int>(t.scale)];
  return m;
}

Eigen::MatrixXcd build_effective_hamiltonian(const SystemParams& params, const HilbertSpace& space,
                                             Direction drive) {
  return assemble(hamiltonian_terms(params, space, drive), space.dimension(), angular_rate(params.kappa_s));
}

Eigen::MatrixXcd build_jump_operator(const SystemParams& params, const HilbertSpace& space, JumpChannel channel,
                                     Direction drive) {
  const auto ops = jump_terms(params, space, drive);
  return assemble(ops[static_cast<int>(channel)], space.dimension(), angular_rate(params.kappa_s));
}

QuantumState fock_input_state(const HilbertSpace& space, AtomLevel atom, int n_photons) {
  space.validate();
  if (n_photons < 0 || n_photons > space.fock_cut_s)
    throw InvalidParameter("source photon number " + std::to_string(n_photons) + " outside [0, fock_cut_s = " +
                           std::to_string(space.fock_cut_s) + "]");
  QuantumState s;
  s.amplitudes = Eigen::VectorXcd::Zero(space.dimension());
  s.amplitudes(space.index({atom, 0, 0, n_photons})) = 1.0;
  return s;
}

namespace {

constexpr double kFwhmToSigma = 0.42466090014400953;  // 1 / (2 sqrt(2 ln 2))
// Beyond this many sigmas the Gaussian source is empty to within 1e-23 and
// its emission rate is held constant to keep the problem non-stiff.
constexpr double kHazardClampSigma = 10.0;
constexpr double kGaussianLeadSigma = 8.0;

}  // namespace

double source_rate(const SourceShape& shape, double kappa_s_mhz, double t_ns) {
  if (const auto* e = std::get_if<ExponentialSource>(&shape)) return t_ns >= e->start_ns ? angular_rate(kappa_s_mhz) : 0.0;
  const auto& g = std::get<GaussianSource>(shape);
  const double sigma = g.fwhm_ns * kFwhmToSigma;
  const double z = std::min((t_ns - g.center_ns) / sigma, kHazardClampSigma);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double survival = 0.5 * std::erfc(z / std::numbers::sqrt2);
  // The source population decays as exp(-2 int kappa_s dt), so kappa_s is
  // half the hazard rate of the Gaussian arrival-time distribution.
  return pdf / (2.0 * sigma * survival);
}

double source_start_time(const SourceShape& shape) {
  if (const auto* e = std::get_if<ExponentialSource>(&shape)) return e->start_ns;
  const auto& g = std::get<GaussianSource>(shape);
  return g.center_ns - kGaussianLeadSigma * g.fwhm_ns * kFwhmToSigma;
}

double source_max_step(const SourceShape& shape, double kappa_s_mhz) {
  if (std::holds_alternative<ExponentialSource>(shape)) return 0.05 / angular_rate(kappa_s_mhz);
  return std::get<GaussianSource>(shape).fwhm_ns / 20.0;
}

double FirstJumpDistribution::channel(JumpChannel k) const {
  double s = 0.0;
  for (double p : probability[static_cast<int>(k)]) s += p;
  return s;
}

double FirstJumpDistribution::total() const {
  double s = 0.0;
  for (int k = 0; k < kJumpChannels; ++k) s += channel(static_cast<JumpChannel>(k));
  return s;
}

ScatteringModel::ScatteringModel(const SystemParams& params, const HilbertSpace& space, Direction drive)
    : params_(params), space_(space), drive_(drive) {
  params_.validate();
  space_.validate();
  const Index dim = space_.dimension();
  const int n_max = space_.fock_cut_a + space_.fock_cut_b + space_.fock_cut_s + 1;
  manifolds_.resize(n_max + 1);
  std::vector<int> manifold_of(dim);
  std::vector<Index> local_of(dim);
  for (Index k = 0; k < dim; ++k) {
    const int n = space_.state(k).excitations();
    manifold_of[k] = n;
    local_of[k] = static_cast<Index>(manifolds_[n].basis.size());
    manifolds_[n].basis.push_back(k);
  }

  using Triplet = Eigen::Triplet<Complex>;
  const Complex minus_i(0.0, -1.0);
  std::vector<std::vector<Triplet>> fixed(manifolds_.size()), cascade(manifolds_.size());
  for (auto& m : manifolds_) m.drift_source = Eigen::VectorXcd::Zero(static_cast<Index>(m.basis.size()));
  for (const auto& t : hamiltonian_terms(params_, space_, drive_)) {
    const int n = manifold_of[t.col];
    if (manifold_of[t.row] != n) throw std::logic_error("Hamiltonian term couples excitation manifolds");
    const Index r = local_of[t.row], c = local_of[t.col];
    switch (t.scale) {
      case TermScale::Fixed: fixed[n].emplace_back(r, c, minus_i * t.value); break;
      case TermScale::SqrtKappaS: cascade[n].emplace_back(r, c, minus_i * t.value); break;
      case TermScale::KappaS:
        if (r != c) throw std::logic_error("source damping term must be diagonal");
        manifolds_[n].drift_source(r) += minus_i * t.value;
        break;
    }
  }
  for (std::size_t n = 0; n < manifolds_.size(); ++n) {
    auto& m = manifolds_[n];
    const auto size = static_cast<Index>(m.basis.size());
    m.drift_fixed.resize(size, size);
    m.drift_fixed.setFromTriplets(fixed[n].begin(), fixed[n].end());
    m.drift_cascade.resize(size, size);
    m.drift_cascade.setFromTriplets(cascade[n].begin(), cascade[n].end());
  }

  const auto jumps = jump_terms(params_, space_, drive_);
  for (int k = 0; k < kJumpChannels; ++k) {
    std::vector<std::vector<Triplet>> jf(manifolds_.size()), js(manifolds_.size());
    for (const auto& t : jumps[k]) {
      const int n = manifold_of[t.col];
      if (manifold_of[t.row] != n - 1) throw std::logic_error("jump operator must remove one excitation");
      auto& target = t.scale == TermScale::Fixed ? jf[n] : js[n];
      target.emplace_back(local_of[t.row], local_of[t.col], t.value);
    }
    for (std::size_t n = 1; n < manifolds_.size(); ++n) {
      const auto rows = static_cast<Index>(manifolds_[n - 1].basis.size());
      const auto cols = static_cast<Index>(manifolds_[n].basis.size());
      auto& m = manifolds_[n];
      m.jump_fixed[k].resize(rows, cols);
      m.jump_fixed[k].setFromTriplets(jf[n].begin(), jf[n].end());
      m.jump_source[k].resize(rows, cols);
      m.jump_source[k].setFromTriplets(js[n].begin(), js[n].end());
    }
  }
}

void ScatteringModel::check_request(AtomLevel initial_atom, int n_photons) const {
  if (!is_ground(initial_atom)) throw InvalidParameter("initial atom must be a ground level");
  if (n_photons < 1 || n_photons > space_.fock_cut_s)
    throw InvalidParameter("source photon number " + std::to_string(n_photons) + " outside [1, fock_cut_s = " +
                           std::to_string(space_.fock_cut_s) + "]");
}

Eigen::VectorXcd ScatteringModel::initial_vector(AtomLevel initial_atom, int n_photons) const {
  const auto& m = manifolds_[n_photons];
  const Index target = space_.index({initial_atom, 0, 0, n_photons});
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Index>(m.basis.size()));
  for (std::size_t j = 0; j < m.basis.size(); ++j)
    if (m.basis[j] == target) psi(static_cast<Index>(j)) = 1.0;
  return psi;
}

void ScatteringModel::derivative(const Manifold& m, double kappa_s, const Complex* psi, Complex* dpsi) const {
  const auto n = static_cast<Index>(m.basis.size());
  Eigen::Map<const Eigen::VectorXcd> x(psi, n);
  Eigen::Map<Eigen::VectorXcd> dx(dpsi, n);
  dx.noalias() = m.drift_fixed * x;
  if (kappa_s > 0.0) {
    dx.noalias() += std::sqrt(kappa_s) * (m.drift_cascade * x);
    dx.array() += kappa_s * m.drift_source.array() * x.array();
  }
}

Eigen::VectorXcd ScatteringModel::apply_jump(const Manifold& m, int channel, double kappa_s,
                                             const Eigen::Ref<const Eigen::VectorXcd>& psi) const {
  Eigen::VectorXcd out = m.jump_fixed[channel] * psi;
  if (kappa_s > 0.0 && m.jump_source[channel].nonZeros() > 0) out += std::sqrt(kappa_s) * (m.jump_source[channel] * psi);
  return out;
}

AtomLevel ScatteringModel::atom_of(int manifold, Index local) const {
  return space_.state(manifolds_[manifold].basis[static_cast<std::size_t>(local)]).atom;
}

namespace {

using State = std::vector<double>;
using Dopri = odeint::runge_kutta_dopri5<State>;

const Complex* as_complex(const State& x) { return reinterpret_cast<const Complex*>(x.data()); }
Complex* as_complex(State& x) { return reinterpret_cast<Complex*>(x.data()); }

double squared_norm(const State& x, std::size_t n_real) {
  double s = 0.0;
  for (std::size_t k = 0; k < n_real; ++k) s += x[k] * x[k];
  return s;
}

std::string describe_norm_increase(double t, double before, double after) {
  std::ostringstream os;
  os.precision(17);
  os << "norm increased during no-jump evolution at t = " << t << " ns: " << before << " -> " << after;
  return os.str();
}

}  // namespace

TrajectoryRecord ScatteringModel::run(AtomLevel initial_atom, int n_photons, std::uint64_t seed,
                                      const TrajectoryOptions& options) const {
  check_request(initial_atom, n_photons);
  Rng rng(seed);
  Rng check_rng(child_seed(seed, 0xc4ec, 0));
  TrajectoryRecord rec;
  rec.seed = seed;
  rec.initial_atom = initial_atom;

  const double kappa_s_mhz = params_.kappa_s;
  const double t_start = source_start_time(options.source);
  const double max_dt = source_max_step(options.source, kappa_s_mhz);
  double t = t_start;
  int n = n_photons;
  Eigen::VectorXcd psi = initial_vector(initial_atom, n_photons);
  int checks_left = options.completeness_checks;

  while (n > 0) {
    const Manifold& m = manifolds_[n];
    const auto dim = static_cast<Index>(m.basis.size());
    const std::size_t n_real = 2 * static_cast<std::size_t>(dim);
    const double threshold = uniform_open_closed(rng);

    State x(n_real);
    std::copy_n(reinterpret_cast<const double*>(psi.data()), n_real, x.begin());
    auto system = [&](const State& in, State& out, double time) {
      out.resize(in.size());
      derivative(m, source_rate(options.source, kappa_s_mhz, time), as_complex(in), as_complex(out));
    };
    auto stepper = odeint::make_dense_output(options.atol, options.rtol, max_dt, Dopri());
    stepper.initialize(x, t, std::min(max_dt, 0.1));

    double norm_before = squared_norm(x, n_real);
    State probe(n_real), dprobe(n_real);
    for (;;) {
      const auto [t0, t1] = stepper.do_step(system);
      const State& xc = stepper.current_state();
      const double norm_after = squared_norm(xc, n_real);
      if (!(norm_after <= norm_before * (1.0 + 1e-9) + 1e-15))
        throw IntegrationError(describe_norm_increase(t1, norm_before, norm_after));

      if (checks_left > 0) {
        --checks_left;
        const double tc = t0 + (t1 - t0) * std::uniform_real_distribution<double>(0.0, 1.0)(check_rng);
        stepper.calc_state(tc, probe);
        system(probe, dprobe, tc);
        Eigen::Map<const Eigen::VectorXcd> p(as_complex(probe), dim), dp(as_complex(dprobe), dim);
        const double decay = -2.0 * p.dot(dp).real();
        const double kappa_s = source_rate(options.source, kappa_s_mhz, tc);
        double flux = 0.0;
        for (int k = 0; k < kJumpChannels; ++k) flux += apply_jump(m, k, kappa_s, p).squaredNorm();
        if (flux > 1e-300)
          rec.completeness_error = std::max(rec.completeness_error, std::abs(flux - decay) / flux);
      }

      if (norm_after <= threshold) {
        double lo = t0, hi = t1;
        State x_hi = xc;
        while (hi - lo > options.jump_time_tol_ns) {
          const double mid = 0.5 * (lo + hi);
          stepper.calc_state(mid, probe);
          if (squared_norm(probe, n_real) > threshold) {
            lo = mid;
          } else {
            hi = mid;
            x_hi = probe;
          }
        }
        t = hi;
        psi = Eigen::Map<const Eigen::VectorXcd>(as_complex(x_hi), dim);
        break;
      }
      norm_before = norm_after;
      if (t1 - t_start > options.max_duration_ns)
        throw IntegrationError("trajectory exceeded max_duration_ns = " + std::to_string(options.max_duration_ns));
    }

    const double kappa_s = source_rate(options.source, kappa_s_mhz, t);
    std::array<Eigen::VectorXcd, kJumpChannels> candidates;
    std::array<double, kJumpChannels> weight{};
    double total = 0.0;
    for (int k = 0; k < kJumpChannels; ++k) {
      candidates[k] = apply_jump(m, k, kappa_s, psi);
      weight[k] = candidates[k].squaredNorm();
      total += weight[k];
    }
    if (!(total > 0.0)) throw IntegrationError("no jump channel has weight at t = " + std::to_string(t));
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    int chosen = kJumpChannels - 1;
    while (chosen > 0 && weight[chosen] == 0.0) --chosen;
    for (int k = 0; k < kJumpChannels; ++k) {
      if (weight[k] > 0.0 && u < weight[k]) {
        chosen = k;
        break;
      }
      u -= weight[k];
    }
    psi = candidates[chosen] / std::sqrt(weight[chosen]);
    rec.jumps.push_back({t, static_cast<JumpChannel>(chosen)});
    --n;
  }

  // With every excitation gone the atom is left in a superposition of
  // ground levels; it is assigned one level with the Born probabilities.
  double u = std::uniform_real_distribution<double>(0.0, psi.squaredNorm())(rng);
  rec.final_atom = atom_of(0, psi.size() - 1);
  for (Index j = 0; j < psi.size(); ++j) {
    const double p = std::norm(psi(j));
    if (p > 0.0 && u < p) {
      rec.final_atom = atom_of(0, j);
      break;
    }
    u -= p;
  }
  return rec;
}

FirstJumpDistribution ScatteringModel::first_jump(AtomLevel initial_atom, int n_photons,
                                                  const TrajectoryOptions& options) const {
  check_request(initial_atom, n_photons);
  const Manifold& m = manifolds_[n_photons];
  const auto dim = static_cast<Index>(m.basis.size());
  const std::size_t n_real = 2 * static_cast<std::size_t>(dim);
  const std::size_t n_acc = static_cast<std::size_t>(kJumpChannels) * kAtomLevels;
  std::vector<int> target_level(manifolds_[n_photons - 1].basis.size());
  for (std::size_t j = 0; j < target_level.size(); ++j)
    target_level[j] = static_cast<int>(atom_of(n_photons - 1, static_cast<Index>(j)));

  const double kappa_s_mhz = params_.kappa_s;
  auto system = [&](const State& in, State& out, double time) {
    out.assign(in.size(), 0.0);
    const double kappa_s = source_rate(options.source, kappa_s_mhz, time);
    derivative(m, kappa_s, as_complex(in), as_complex(out));
    Eigen::Map<const Eigen::VectorXcd> psi(as_complex(in), dim);
    for (int k = 0; k < kJumpChannels; ++k) {
      const Eigen::VectorXcd v = apply_jump(m, k, kappa_s, psi);
      for (Index j = 0; j < v.size(); ++j)
        out[n_real + static_cast<std::size_t>(k * kAtomLevels + target_level[static_cast<std::size_t>(j)])] +=
            std::norm(v(j));
    }
  };

  State x(n_real + n_acc, 0.0);
  const Eigen::VectorXcd psi0 = initial_vector(initial_atom, n_photons);
  std::copy_n(reinterpret_cast<const double*>(psi0.data()), n_real, x.begin());
  const double t_start = source_start_time(options.source);
  const double max_dt = source_max_step(options.source, kappa_s_mhz);
  // This is the reference the trajectories are checked against, so it is
  // integrated tightly whatever the trajectory tolerances are.
  auto stepper = odeint::make_dense_output(std::min(options.atol, 1e-16), std::min(options.rtol, 1e-13), max_dt, Dopri());
  stepper.initialize(x, t_start, std::min(max_dt, 0.1));
  double norm = 1.0;
  while (norm > 1e-14) {
    const auto [t0, t1] = stepper.do_step(system);
    (void)t0;
    norm = squared_norm(stepper.current_state(), n_real);
    if (t1 - t_start > options.max_duration_ns) break;
  }
  const State& xf = stepper.current_state();
  FirstJumpDistribution out;
  out.residual_norm = norm;
  for (int k = 0; k < kJumpChannels; ++k)
    for (int l = 0; l < kAtomLevels; ++l)
      out.probability[k][l] = xf[n_real + static_cast<std::size_t>(k * kAtomLevels + l)];
  return out;
}

TrajectoryRecord run_trajectory(const SystemParams& params, const HilbertSpace& space, AtomLevel initial_atom,
                                int n_source_photons, std::uint64_t seed, const TrajectoryOptions& options,
                                Direction drive) {
  return ScatteringModel(params, space, drive).run(initial_atom, n_source_photons, seed, options);
}

void write_trajectory(std::ostream& out, const TrajectoryRecord& record) {
  const auto precision = out.precision(10);
  for (const auto& j : record.jumps) out << j.time_ns << ' ' << to_string(j.channel) << '\n';
  out.precision(precision);
}

}  // namespace psw
