#include "psw/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>

#include <boost/math/distributions/normal.hpp>

#include "psw/analytic.hpp"
#include "psw/parallel.hpp"
#include "psw/random.hpp"
#include "psw/scattering.hpp"

namespace psw {

namespace {

constexpr std::uint64_t kCycleStream = 0xc1c1e;
constexpr std::uint64_t kCalibrationStream = 0xca11b;
constexpr std::uint64_t kLibraryStream = 0x11b7;
constexpr double kFwhmToSigma = 0.42466090014400953;

}  // namespace

std::string to_string(PulseKind k) { return k == PulseKind::Detection ? "detection" : "target"; }

std::string to_string(PulseRole r) {
  switch (r) {
    case PulseRole::Prepare: return "prepare";
    case PulseRole::Control: return "control";
    case PulseRole::Target: return "target";
    case PulseRole::Reset: return "reset";
    case PulseRole::Confirm1: return "confirm1";
    case PulseRole::Confirm2: return "confirm2";
  }
  return "?";
}

std::string to_string(SequenceKind k) { return k == SequenceKind::A ? "A" : "B"; }

SequenceKind parse_sequence_kind(const std::string& text) {
  if (text == "A") return SequenceKind::A;
  if (text == "B") return SequenceKind::B;
  throw InvalidParameter("unknown sequence kind '" + text + "'");
}

std::string to_string(TransitMode m) {
  switch (m) {
    case TransitMode::Sampled: return "sampled";
    case TransitMode::None: return "none";
    case TransitMode::Infinite: return "infinite";
  }
  return "?";
}

TransitMode parse_transit_mode(const std::string& text) {
  for (auto m : {TransitMode::Sampled, TransitMode::None, TransitMode::Infinite})
    if (to_string(m) == text) return m;
  throw ConfigError("unknown transit mode '" + text + "' (expected sampled, none or infinite)");
}

std::optional<std::size_t> PulseChain::pulse_at(double t) const {
  auto it = std::upper_bound(pulses.begin(), pulses.end(), t,
                             [&](double x, const PulseSpec& p) { return x < p.start - gate_margin_ns; });
  if (it == pulses.begin()) return std::nullopt;
  const auto i = static_cast<std::size_t>(std::distance(pulses.begin(), it) - 1);
  if (t < gate_end(i)) return i;
  return std::nullopt;
}

PulseChain build_pulse_chain(const ChainConfig& c) {
  if (c.sequences < 0) throw ConfigError("chain.sequences must be >= 0");
  if (!(c.detection_fwhm > 0) || !(c.target_fwhm > 0)) throw ConfigError("pulse FWHM must be > 0");
  if (c.detection_photons < 0 || c.target_photons < 0) throw ConfigError("mean photon numbers must be >= 0");
  if (c.pulse_gap_ns < 0 || c.control_gap_ns < 0 || c.post_control_wait_ns < 0 || c.sequence_gap_ns < 0 ||
      c.gate_margin_ns < 0 || c.lead_ns < 0 || c.tail_ns < 0)
    throw ConfigError("chain gaps, margins, lead and tail must be >= 0");

  PulseChain chain;
  chain.gate_margin_ns = c.gate_margin_ns;
  const auto R = Direction::Rightward;
  const auto L = Direction::Leftward;
  double t = c.lead_ns;
  for (int s = 0; s < c.sequences; ++s) {
    const auto kind = s % 2 == 0 ? SequenceKind::A : SequenceKind::B;
    // The target is always rightward; detection pulses alternate.
    const std::array<Direction, 6> dirs =
        kind == SequenceKind::A ? std::array<Direction, 6>{R, L, R, R, L, R} : std::array<Direction, 6>{L, R, R, L, R, L};
    for (int r = 0; r < 6; ++r) {
      PulseSpec p;
      p.role = static_cast<PulseRole>(r);
      p.kind = p.role == PulseRole::Target ? PulseKind::Target : PulseKind::Detection;
      p.direction = dirs[r];
      p.fwhm = p.kind == PulseKind::Target ? c.target_fwhm : c.detection_fwhm;
      p.mean_photons = p.kind == PulseKind::Target ? c.target_photons : c.detection_photons;
      p.sequence = s;
      p.sequence_kind = kind;
      if (p.role == PulseRole::Control)
        t += c.control_gap_ns;
      else if (p.role == PulseRole::Target)
        t += c.post_control_wait_ns;
      else if (r > 0)
        t += c.pulse_gap_ns;
      p.start = t;
      t = p.end();
      chain.pulses.push_back(p);
    }
    t += c.sequence_gap_ns;
  }
  for (std::size_t i = 1; i < chain.pulses.size(); ++i)
    if (chain.gate_begin(i) < chain.gate_end(i - 1))
      throw ConfigError("overlapping pulses: gate of pulse " + std::to_string(i) + " starts before pulse " +
                        std::to_string(i - 1) + " ends");
  chain.duration_ns = (chain.pulses.empty() ? c.lead_ns : chain.pulses.back().end()) + c.tail_ns;
  return chain;
}

std::vector<Transit> sample_transits(const TransitModel& model, double window_ns, std::uint64_t seed) {
  if (!(window_ns > 0)) throw InvalidParameter("transit window must be > 0");
  if (model.arrival_rate < 0 || !(model.mean_duration_ns > 0) || model.inert_fraction < 0 || model.inert_fraction > 1)
    throw InvalidParameter("invalid transit model");
  Rng rng(seed);
  std::vector<Transit> out;
  if (model.arrival_rate == 0) return out;
  const auto n = std::poisson_distribution<long>(model.arrival_rate * window_ns * 1e-9)(rng);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::exponential_distribution<double> dur(1.0 / model.mean_duration_ns);
  const auto levels = model.g_levels > 0 ? g_quantile_levels(model.g_dist, model.g_levels) : std::vector<double>{};
  for (long k = 0; k < n; ++k) {
    Transit t;
    t.start = window_ns * uni(rng);
    t.duration = dur(rng);
    if (levels.empty()) {
      t.g = model.g_dist.sample(rng);
    } else {
      t.g_level = std::min(static_cast<int>(uni(rng) * model.g_levels), model.g_levels - 1);
      t.g = levels[static_cast<std::size_t>(t.g_level)];
    }
    const double u = uni(rng);
    if (u < model.inert_fraction)
      t.initial_atom = AtomLevel::GZero;
    else
      t.initial_atom = uni(rng) < 0.5 ? AtomLevel::GMinus : AtomLevel::GPlus;
    out.push_back(t);
  }
  std::stable_sort(out.begin(), out.end(), [](const Transit& a, const Transit& b) { return a.start < b.start; });
  return out;
}

double AfterpulseModel::delay_fraction(double lo, double hi) const {
  auto survival = [&](double x, double tau) { return x <= 0 ? 1.0 : std::exp(-x / tau); };
  auto part = [&](double tau) { return survival(lo - dead_time_ns, tau) - survival(hi - dead_time_ns, tau); };
  if (hi <= lo) return 0.0;
  return fast_fraction * part(fast_tau_ns) + (1.0 - fast_fraction) * part(slow_tau_ns);
}

std::vector<int> DetectorParams::detectors_on(Direction port_dir) const {
  std::vector<int> out;
  for (std::size_t d = 0; d < port.size(); ++d)
    if (port[d] == port_dir) out.push_back(static_cast<int>(d));
  return out;
}

void DetectorParams::validate() const {
  if (!(path_transmission >= 0 && path_transmission <= 1)) throw ConfigError("path_transmission must be in [0, 1]");
  if (resolution_ps <= 0) throw ConfigError("detector resolution must be > 0");
  if (port.size() != 5) throw ConfigError("exactly 5 detectors must be mapped");
  if (detectors_on(Direction::Leftward).empty() || detectors_on(Direction::Rightward).empty())
    throw ConfigError("each output port needs at least one detector");
  if (dark_rate < 0) throw ConfigError("dark_rate must be >= 0");
  const auto& a = afterpulse;
  if (!(a.fast_fraction >= 0 && a.fast_fraction <= 1) || !(a.fast_tau_ns > 0) || !(a.slow_tau_ns > 0) ||
      a.dead_time_ns < 0 || a.target_window_prob[0] < 0 || a.target_window_prob[1] < 0)
    throw ConfigError("invalid afterpulse model");
}

DelayWindow target_window_after_control(const ChainConfig& c) {
  ChainConfig one = c;
  one.sequences = 1;
  const PulseChain chain = build_pulse_chain(one);
  const auto& control = chain.pulses[chain.index_of(0, PulseRole::Control)];
  const auto target = chain.index_of(0, PulseRole::Target);
  return {chain.gate_begin(target) - control.start, chain.gate_end(target) - control.start};
}

namespace {

// Per-click afterpulse probability per port such that a click at the control
// pulse center produces a target-window afterpulse with the configured
// probability.
std::array<double, 2> afterpulse_totals(const DetectorParams& det, const ChainConfig& chain) {
  const DelayWindow w = target_window_after_control(chain);
  const double frac = det.afterpulse.delay_fraction(w.lo - chain.detection_fwhm, w.hi - chain.detection_fwhm);
  std::array<double, 2> out{};
  for (int p = 0; p < 2; ++p) {
    out[p] = det.afterpulsing && frac > 0 ? det.afterpulse.target_window_prob[p] / frac : 0.0;
    if (out[p] > 1.0) throw ConfigError("afterpulse model needs a per-click probability above 1");
  }
  return out;
}

double sample_afterpulse_delay(const AfterpulseModel& a, Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double tau = uni(rng) < a.fast_fraction ? a.fast_tau_ns : a.slow_tau_ns;
  return a.dead_time_ns + std::exponential_distribution<double>(1.0 / tau)(rng);
}

struct RawClick {
  double t_ns;
  int detector;
};

// Adds afterpulses and dark counts, quantizes and sorts.
std::vector<ClickRecord> finish_cycle(std::vector<RawClick> raw, std::uint64_t cycle, double duration_ns,
                                      const DetectorParams& det, const std::array<double, 2>& ap_prob, Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const std::size_t real_clicks = raw.size();
  for (std::size_t k = 0; k < real_clicks; ++k) {
    const auto port = static_cast<int>(det.port[static_cast<std::size_t>(raw[k].detector)]);
    if (ap_prob[port] > 0 && uni(rng) < ap_prob[port])
      raw.push_back({raw[k].t_ns + sample_afterpulse_delay(det.afterpulse, rng), raw[k].detector});
  }
  if (det.dark_rate > 0) {
    std::poisson_distribution<long> count(det.dark_rate * duration_ns * 1e-9);
    for (int d = 0; d < static_cast<int>(det.port.size()); ++d) {
      const long n = count(rng);
      for (long k = 0; k < n; ++k) raw.push_back({duration_ns * uni(rng), d});
    }
  }
  std::vector<ClickRecord> out;
  out.reserve(raw.size());
  const double res = static_cast<double>(det.resolution_ps);
  for (const auto& c : raw) {
    if (!(c.t_ns >= 0.0) || c.t_ns >= duration_ns) continue;
    const auto ticks = static_cast<std::int64_t>(std::floor(c.t_ns * 1000.0 / res));
    out.push_back({cycle, c.detector, ticks * det.resolution_ps});
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct CycleResult {
  std::vector<ClickRecord> clicks;
  std::vector<TransitTruth> transits;
  std::vector<PulseTruth> pulses;
};

SystemParams with_coupling(const SystemParams& base, double g) {
  SystemParams p = base;
  p.g = g;
  p.g_minus = base.g > 0 ? base.g_minus * g / base.g : 0.0;
  p.g_pi = base.g > 0 ? base.g_pi * g / base.g : 0.0;
  return p;
}

// Cutoffs equal to the photon number make every reachable manifold complete,
// so truncation is exact.
HilbertSpace space_for(int n_photons) {
  const int cut = std::max(2, n_photons);
  return HilbertSpace{cut, cut, cut};
}

struct PhotonOut {
  double t_ns;
  Outcome outcome;
};

struct StoredTrajectory {
  std::vector<PhotonOut> photons;  // times relative to the pulse center
  AtomLevel final_atom = AtomLevel::GMinus;
};

// Scattering models of one transit, rebuilt when a pulse needs a larger
// photon cutoff.
class TransitModels {
 public:
  TransitModels(const SystemParams& base, double g) : params_(with_coupling(base, g)) {}
  const ScatteringModel& get(Direction d, int n_photons) {
    auto& slot = models_[static_cast<int>(d)];
    if (!slot || slot->space().fock_cut_s < n_photons) slot.emplace(params_, space_for(n_photons), d);
    return *slot;
  }

 private:
  SystemParams params_;
  std::array<std::optional<ScatteringModel>, 2> models_;
};

// Memoized rightward-pulse trajectories. Entry k of a cell is seeded by the
// cell key and k only, so it does not matter which cycle simulates it first.
// Leftward pulses use the mirror image (m_F -> -m_F).
class PulseLibrary {
 public:
  PulseLibrary(const SystemParams& base, std::vector<double> g_values, int size, std::uint64_t seed, double rtol,
               double atol)
      : base_(base), g_values_(std::move(g_values)), size_(size), seed_(seed), rtol_(rtol), atol_(atol) {}

  int size() const { return size_; }

  const StoredTrajectory& get(int g_level, AtomLevel initial, int n, double fwhm, int k) {
    const auto fwhm_key = std::llround(fwhm * 1000.0);
    Cell* cell = nullptr;
    {
      std::lock_guard lock(mutex_);
      auto& slot = cells_[{g_level, static_cast<int>(initial), n, fwhm_key}];
      if (!slot) slot = std::make_unique<Cell>(size_);
      cell = slot.get();
    }
    auto& entry = cell->entries[static_cast<std::size_t>(k)];
    std::call_once(entry.once, [&] {
      const std::uint64_t stream =
          mix_seed((static_cast<std::uint64_t>(g_level) << 40) ^ (static_cast<std::uint64_t>(initial) << 32) ^
                   (static_cast<std::uint64_t>(n) << 24) ^ static_cast<std::uint64_t>(fwhm_key));
      TrajectoryOptions opts;
      opts.source = GaussianSource{0.0, fwhm};
      opts.rtol = rtol_;
      opts.atol = atol_;
      const auto rec = model(g_level, n).run(initial, n, child_seed(seed_, stream, static_cast<std::uint64_t>(k)), opts);
      for (const auto& j : rec.jumps) entry.value.photons.push_back({j.time_ns, classify_outcome(j.channel)});
      entry.value.final_atom = rec.final_atom;
      simulated_.fetch_add(1, std::memory_order_relaxed);
    });
    return entry.value;
  }

  std::uint64_t simulated() const { return simulated_.load(); }

 private:
  struct Entry {
    std::once_flag once;
    StoredTrajectory value;
  };
  struct Cell {
    explicit Cell(int n) : entries(static_cast<std::size_t>(n)) {}
    std::vector<Entry> entries;
  };
  struct ModelSlot {
    std::once_flag once;
    std::optional<ScatteringModel> model;
  };

  const ScatteringModel& model(int g_level, int n) {
    ModelSlot* slot = nullptr;
    {
      std::lock_guard lock(mutex_);
      auto& s = models_[{g_level, n}];
      if (!s) s = std::make_unique<ModelSlot>();
      slot = s.get();
    }
    std::call_once(slot->once, [&] {
      slot->model.emplace(with_coupling(base_, g_values_.at(static_cast<std::size_t>(g_level))), space_for(n),
                          Direction::Rightward);
    });
    return *slot->model;
  }

  SystemParams base_;
  std::vector<double> g_values_;
  int size_;
  std::uint64_t seed_;
  double rtol_, atol_;
  std::mutex mutex_;
  std::map<std::tuple<int, int, int, long long>, std::unique_ptr<Cell>> cells_;
  std::map<std::pair<int, int>, std::unique_ptr<ModelSlot>> models_;
  std::atomic<std::uint64_t> simulated_{0};
};

struct CycleContext {
  const ExperimentConfig& cfg;
  const PulseChain& chain;
  std::array<double, 2> ap_prob;
  std::vector<double> g_values;
  PulseLibrary* library;
};

CycleResult simulate_cycle(const CycleContext& ctx, std::uint64_t seed, std::uint64_t cycle) {
  const auto& cfg = ctx.cfg;
  const auto& chain = ctx.chain;
  Rng rng(child_seed(seed, kCycleStream, cycle));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& det = cfg.detectors;
  const auto& p = cfg.params;

  std::vector<Transit> transits;
  if (cfg.transit_mode == TransitMode::Sampled) {
    transits = sample_transits(cfg.transits, chain.duration_ns, rng());
  } else if (cfg.transit_mode == TransitMode::Infinite) {
    // One atom per sequence, present from its first gate to the next
    // sequence. A single atom per cycle would end up pumped into G_ZERO.
    for (int s = 0; s < chain.sequences(); ++s) {
      Transit t;
      t.start = chain.gate_begin(chain.index_of(s, PulseRole::Prepare));
      t.duration = (s + 1 < chain.sequences() ? chain.gate_begin(chain.index_of(s + 1, PulseRole::Prepare))
                                              : chain.duration_ns) -
                   t.start;
      if (!ctx.g_values.empty()) {
        t.g_level = static_cast<int>(uni(rng) * static_cast<double>(ctx.g_values.size()));
        t.g_level = std::min(t.g_level, static_cast<int>(ctx.g_values.size()) - 1);
        t.g = ctx.g_values[static_cast<std::size_t>(t.g_level)];
      } else {
        t.g = cfg.transits.g_dist.sample(rng);
      }
      t.initial_atom = uni(rng) < 0.5 ? AtomLevel::GMinus : AtomLevel::GPlus;
      transits.push_back(t);
    }
  }

  CycleResult out;
  for (const auto& t : transits) out.transits.push_back({cycle, t});
  std::vector<AtomLevel> level;
  std::vector<std::optional<TransitModels>> models(transits.size());
  for (const auto& t : transits) level.push_back(t.initial_atom);

  const double t_empty = empty_cavity_transmission(0.0, p.kappa_i, p.kappa_ex, p.h);
  const double r_empty = empty_cavity_reflection(0.0, p.kappa_i, p.kappa_ex, p.h);
  const double cavity_delay_mean = 1.0 / (2.0 * angular_rate(p.kappa()));
  const auto left = det.detectors_on(Direction::Leftward);
  const auto right = det.detectors_on(Direction::Rightward);

  std::vector<RawClick> raw;
  auto emit = [&](double t_ns, Direction port) {
    if (uni(rng) >= det.path_transmission) return false;
    const auto& group = port == Direction::Leftward ? left : right;
    const auto pick = static_cast<std::size_t>(uni(rng) * static_cast<double>(group.size()));
    raw.push_back({t_ns, group[std::min(pick, group.size() - 1)]});
    return true;
  };
  auto record = [&](PulseTruth& truth, const PulseSpec& pulse, const PhotonOut& ph) {
    switch (ph.outcome) {
      case Outcome::Reflection:
        ++truth.reflected;
        truth.outcomes += emit(ph.t_ns, opposite(pulse.direction)) ? 'R' : 'r';
        break;
      case Outcome::Transmission:
        ++truth.transmitted;
        truth.outcomes += emit(ph.t_ns, pulse.direction) ? 'T' : 't';
        break;
      case Outcome::Loss:
        ++truth.lost;
        truth.outcomes += 'L';
        break;
    }
  };

  for (std::size_t i = 0; i < chain.pulses.size(); ++i) {
    const PulseSpec& pulse = chain.pulses[i];
    const int n = static_cast<int>(std::poisson_distribution<long>(pulse.mean_photons)(rng));
    // A pulse meets the atom of the earliest transit covering its center.
    std::optional<std::size_t> ti;
    for (std::size_t k = 0; k < transits.size(); ++k)
      if (transits[k].covers(pulse.center())) {
        ti = k;
        break;
      }

    PulseTruth truth;
    truth.cycle_id = cycle;
    truth.pulse_index = static_cast<int>(i);
    truth.photons = n;
    if (ti) {
      truth.transit_index = static_cast<int>(*ti);
      truth.atom_before = level[*ti];
      if (n > 0) {
        const Transit& tr = transits[*ti];
        if (ctx.library && tr.g_level >= 0) {
          const bool mirror = pulse.direction == Direction::Leftward;
          const int k = static_cast<int>(rng() % static_cast<std::uint64_t>(ctx.library->size()));
          const auto& stored =
              ctx.library->get(tr.g_level, mirror ? mirrored(level[*ti]) : level[*ti], n, pulse.fwhm, k);
          for (const auto& ph : stored.photons) record(truth, pulse, {pulse.center() + ph.t_ns, ph.outcome});
          level[*ti] = mirror ? mirrored(stored.final_atom) : stored.final_atom;
        } else {
          if (!models[*ti]) models[*ti].emplace(p, tr.g);
          TrajectoryOptions opts;
          opts.source = GaussianSource{pulse.center(), pulse.fwhm};
          opts.rtol = cfg.rtol;
          opts.atol = cfg.atol;
          const auto rec = models[*ti]->get(pulse.direction, n).run(level[*ti], n, rng(), opts);
          for (const auto& j : rec.jumps) record(truth, pulse, {j.time_ns, classify_outcome(j.channel)});
          level[*ti] = rec.final_atom;
        }
      }
      truth.atom_after = level[*ti];
      out.pulses.push_back(truth);
      continue;
    }

    const double sigma = pulse.fwhm * kFwhmToSigma;
    std::exponential_distribution<double> delay(1.0 / cavity_delay_mean);
    std::vector<std::pair<double, Outcome>> photons;
    for (int k = 0; k < n; ++k) {
      const double u = uni(rng);
      const double t_ns = pulse.center() + sigma * normal(rng) + delay(rng);
      photons.emplace_back(t_ns, u < t_empty           ? Outcome::Transmission
                                 : u < t_empty + r_empty ? Outcome::Reflection
                                                         : Outcome::Loss);
    }
    std::sort(photons.begin(), photons.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [t_ns, outcome] : photons) record(truth, pulse, {t_ns, outcome});
    if (pulse.kind == PulseKind::Target) out.pulses.push_back(truth);
  }
  out.clicks = finish_cycle(std::move(raw), cycle, chain.duration_ns, det, ctx.ap_prob, rng);
  return out;
}

}  // namespace

std::vector<double> g_quantile_levels(const GDistribution& dist, int levels) {
  if (levels < 1) throw InvalidParameter("g_levels must be >= 1");
  if (dist.mean_g < 0 || dist.sigma_g < 0) throw InvalidParameter("g distribution needs mean >= 0 and sigma >= 0");
  std::vector<double> out;
  if (dist.sigma_g == 0.0) return std::vector<double>(static_cast<std::size_t>(levels), dist.mean_g);
  const boost::math::normal_distribution<double> normal(dist.mean_g, dist.sigma_g);
  const double below = boost::math::cdf(normal, 0.0);  // mass removed by the g >= 0 truncation
  for (int k = 0; k < levels; ++k) {
    const double u = below + (1.0 - below) * (k + 0.5) / levels;
    out.push_back(boost::math::quantile(normal, u));
  }
  return out;
}

struct ExperimentRunner::Impl {
  ExperimentConfig cfg;
  PulseChain chain;
  std::array<double, 2> ap_prob{};
  std::vector<double> g_values;
  std::unique_ptr<PulseLibrary> library;
  std::uint64_t seed = 0;
};

ExperimentRunner::ExperimentRunner(const ExperimentConfig& cfg, std::uint64_t seed) : impl_(std::make_unique<Impl>()) {
  cfg.params.validate();
  cfg.detectors.validate();
  if (cfg.library_size < 0) throw ConfigError("library_size must be >= 0");
  if (cfg.transits.g_levels < 0) throw ConfigError("transit.g_levels must be >= 0");
  impl_->cfg = cfg;
  impl_->seed = seed;
  impl_->chain = build_pulse_chain(cfg.chain);
  impl_->ap_prob = afterpulse_totals(cfg.detectors, cfg.chain);
  if (cfg.transits.g_levels > 0) impl_->g_values = g_quantile_levels(cfg.transits.g_dist, cfg.transits.g_levels);
  if (cfg.library_size > 0 && !impl_->g_values.empty())
    impl_->library = std::make_unique<PulseLibrary>(cfg.params, impl_->g_values, cfg.library_size,
                                                    child_seed(seed, kLibraryStream, 0), cfg.rtol, cfg.atol);
}

ExperimentRunner::~ExperimentRunner() = default;

const PulseChain& ExperimentRunner::chain() const { return impl_->chain; }

std::uint64_t ExperimentRunner::trajectories_simulated() const {
  return impl_->library ? impl_->library->simulated() : 0;
}

ExperimentOutput ExperimentRunner::run(std::uint64_t first_cycle, std::uint64_t n_cycles, unsigned jobs) const {
  const CycleContext ctx{impl_->cfg, impl_->chain, impl_->ap_prob, impl_->g_values, impl_->library.get()};
  ExperimentOutput out;
  const std::uint64_t block = 64 * std::max(1u, jobs);
  for (std::uint64_t lo = 0; lo < n_cycles; lo += block) {
    const std::uint64_t count = std::min(block, n_cycles - lo);
    auto parts =
        parallel_map(count, jobs, [&](std::size_t k) { return simulate_cycle(ctx, impl_->seed, first_cycle + lo + k); });
    for (auto& part : parts) {
      out.clicks.insert(out.clicks.end(), part.clicks.begin(), part.clicks.end());
      out.truth.transits.insert(out.truth.transits.end(), part.transits.begin(), part.transits.end());
      out.truth.pulses.insert(out.truth.pulses.end(), part.pulses.begin(), part.pulses.end());
    }
  }
  return out;
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, unsigned jobs) {
  return ExperimentRunner(cfg, seed).run(0, cfg.n_cycles, jobs);
}

std::vector<ClickRecord> run_calibration(const CalibrationConfig& cfg, const DetectorParams& det, std::uint64_t seed,
                                         unsigned jobs) {
  det.validate();
  if (cfg.mean_clicks < 0 || !(cfg.pulse_fwhm > 0) || !(cfg.cycle_ns > cfg.pulse_start_ns))
    throw ConfigError("invalid calibration config");
  // The injected per-click probability is defined against the experiment's
  // target window, which the calibration must use too.
  ChainConfig chain;
  chain.detection_fwhm = cfg.pulse_fwhm;
  const auto ap_prob = afterpulse_totals(det, chain);
  const double sigma = cfg.pulse_fwhm * kFwhmToSigma;
  std::vector<ClickRecord> out;
  constexpr std::uint64_t kBlock = 4096;
  for (std::uint64_t lo = 0; lo < cfg.n_pulses; lo += kBlock) {
    const std::uint64_t count = std::min<std::uint64_t>(kBlock, cfg.n_pulses - lo);
    auto parts = parallel_map(count, jobs, [&](std::size_t k) {
      const std::uint64_t cycle = lo + k;
      Rng rng(child_seed(seed, kCalibrationStream, cycle));
      std::normal_distribution<double> normal(0.0, 1.0);
      std::poisson_distribution<long> clicks(cfg.mean_clicks);
      std::vector<RawClick> raw;
      for (int d = 0; d < static_cast<int>(det.port.size()); ++d) {
        const long n = clicks(rng);
        for (long j = 0; j < n; ++j) raw.push_back({cfg.pulse_start_ns + cfg.pulse_fwhm + sigma * normal(rng), d});
      }
      return finish_cycle(std::move(raw), cycle, cfg.cycle_ns, det, ap_prob, rng);
    });
    for (auto& part : parts) out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

ChainConfig chain_config_from(KeyValueConfig& cfg) {
  ChainConfig c;
  c.sequences = static_cast<int>(cfg.take_int("chain.sequences", c.sequences));
  c.lead_ns = cfg.take_double("chain.lead_ns", c.lead_ns);
  c.tail_ns = cfg.take_double("chain.tail_ns", c.tail_ns);
  c.detection_fwhm = cfg.take_double("chain.detection_fwhm_ns", c.detection_fwhm);
  c.detection_photons = cfg.take_double("chain.detection_photons", c.detection_photons);
  c.target_fwhm = cfg.take_double("chain.target_fwhm_ns", c.target_fwhm);
  c.target_photons = cfg.take_double("chain.target_photons", c.target_photons);
  c.pulse_gap_ns = cfg.take_double("chain.pulse_gap_ns", c.pulse_gap_ns);
  c.control_gap_ns = cfg.take_double("chain.control_gap_ns", c.control_gap_ns);
  c.post_control_wait_ns = cfg.take_double("chain.post_control_wait_ns", c.post_control_wait_ns);
  c.sequence_gap_ns = cfg.take_double("chain.sequence_gap_ns", c.sequence_gap_ns);
  c.gate_margin_ns = cfg.take_double("chain.gate_margin_ns", c.gate_margin_ns);
  build_pulse_chain(c);
  return c;
}

TransitModel transit_model_from(KeyValueConfig& cfg) {
  TransitModel t;
  t.arrival_rate = cfg.take_double("transit.arrival_rate", t.arrival_rate);
  t.mean_duration_ns = cfg.take_double("transit.mean_duration_ns", t.mean_duration_ns);
  t.inert_fraction = cfg.take_double("transit.inert_fraction", t.inert_fraction);
  t.g_levels = static_cast<int>(cfg.take_int("transit.g_levels", t.g_levels));
  t.g_dist = g_distribution_from_config(cfg);
  if (t.arrival_rate < 0 || !(t.mean_duration_ns > 0) || t.inert_fraction < 0 || t.inert_fraction > 1)
    throw ConfigError("invalid transit model");
  return t;
}

DetectorParams detector_params_from(KeyValueConfig& cfg) {
  DetectorParams d;
  for (std::size_t k = 0; k < d.port.size(); ++k) {
    const std::string key = "detector." + std::to_string(k) + ".port";
    const auto value = cfg.take_string(key);
    if (!value) throw ConfigError("missing detector role mapping '" + key + "' (left or right)");
    try {
      d.port[k] = parse_direction(*value);
    } catch (const std::exception& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  d.path_transmission = cfg.take_double("detector.path_transmission", d.path_transmission);
  d.resolution_ps = cfg.take_int("detector.resolution_ps", d.resolution_ps);
  d.dark_rate = cfg.take_double("detector.dark_rate", d.dark_rate);
  d.afterpulsing = cfg.take_bool("afterpulse.enabled", d.afterpulsing);
  auto& a = d.afterpulse;
  a.target_window_prob[static_cast<int>(Direction::Leftward)] =
      cfg.take_double("afterpulse.left_window_prob", a.target_window_prob[static_cast<int>(Direction::Leftward)]);
  a.target_window_prob[static_cast<int>(Direction::Rightward)] =
      cfg.take_double("afterpulse.right_window_prob", a.target_window_prob[static_cast<int>(Direction::Rightward)]);
  a.dead_time_ns = cfg.take_double("afterpulse.dead_time_ns", a.dead_time_ns);
  a.fast_fraction = cfg.take_double("afterpulse.fast_fraction", a.fast_fraction);
  a.fast_tau_ns = cfg.take_double("afterpulse.fast_tau_ns", a.fast_tau_ns);
  a.slow_tau_ns = cfg.take_double("afterpulse.slow_tau_ns", a.slow_tau_ns);
  d.validate();
  return d;
}

CalibrationConfig calibration_config_from(KeyValueConfig& cfg, const ChainConfig& chain) {
  CalibrationConfig c;
  c.pulse_fwhm = chain.detection_fwhm;
  c.n_pulses = static_cast<std::uint64_t>(cfg.take_int("calibration.pulses", static_cast<std::int64_t>(c.n_pulses)));
  c.mean_clicks = cfg.take_double("calibration.mean_clicks", c.mean_clicks);
  c.pulse_start_ns = cfg.take_double("calibration.pulse_start_ns", c.pulse_start_ns);
  c.cycle_ns = cfg.take_double("calibration.cycle_ns", c.cycle_ns);
  return c;
}

void add_to_manifest(Manifest& m, const ChainConfig& c) {
  m.add("chain.sequences", static_cast<std::int64_t>(c.sequences));
  m.add("chain.lead_ns", c.lead_ns);
  m.add("chain.tail_ns", c.tail_ns);
  m.add("chain.detection_fwhm_ns", c.detection_fwhm);
  m.add("chain.detection_photons", c.detection_photons);
  m.add("chain.target_fwhm_ns", c.target_fwhm);
  m.add("chain.target_photons", c.target_photons);
  m.add("chain.pulse_gap_ns", c.pulse_gap_ns);
  m.add("chain.control_gap_ns", c.control_gap_ns);
  m.add("chain.post_control_wait_ns", c.post_control_wait_ns);
  m.add("chain.sequence_gap_ns", c.sequence_gap_ns);
  m.add("chain.gate_margin_ns", c.gate_margin_ns);
}

void add_to_manifest(Manifest& m, const TransitModel& t) {
  m.add("transit.arrival_rate", t.arrival_rate);
  m.add("transit.mean_duration_ns", t.mean_duration_ns);
  m.add("transit.inert_fraction", t.inert_fraction);
  m.add("transit.g_levels", static_cast<std::int64_t>(t.g_levels));
  m.add("g_mean", t.g_dist.mean_g);
  m.add("g_sigma", t.g_dist.sigma_g);
}

void add_to_manifest(Manifest& m, const DetectorParams& d) {
  for (std::size_t k = 0; k < d.port.size(); ++k) m.add("detector." + std::to_string(k) + ".port", to_string(d.port[k]));
  m.add("detector.path_transmission", d.path_transmission);
  m.add("detector.resolution_ps", d.resolution_ps);
  m.add("detector.dark_rate", d.dark_rate);
  m.add("afterpulse.enabled", std::string(d.afterpulsing ? "true" : "false"));
  m.add("afterpulse.left_window_prob", d.afterpulse.target_window_prob[static_cast<int>(Direction::Leftward)]);
  m.add("afterpulse.right_window_prob", d.afterpulse.target_window_prob[static_cast<int>(Direction::Rightward)]);
  m.add("afterpulse.dead_time_ns", d.afterpulse.dead_time_ns);
  m.add("afterpulse.fast_fraction", d.afterpulse.fast_fraction);
  m.add("afterpulse.fast_tau_ns", d.afterpulse.fast_tau_ns);
  m.add("afterpulse.slow_tau_ns", d.afterpulse.slow_tau_ns);
}

}  // namespace psw
