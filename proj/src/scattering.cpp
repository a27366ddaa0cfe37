#include "psw/scattering.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "psw/parallel.hpp"
#include "psw/random.hpp"

namespace psw {

namespace {

constexpr std::uint64_t kScatterStream = 0x5ca7;
constexpr std::uint64_t kCouplingStream = 0x9c0b;
constexpr std::uint64_t kSecondPhotonStream = 0x2e1f;

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Reflection: return "reflection";
    case Outcome::Transmission: return "transmission";
    case Outcome::Loss: return "loss";
  }
  return "?";
}

std::string to_string(ToggleClass t) {
  switch (t) {
    case ToggleClass::Toggle: return "toggle";
    case ToggleClass::NoToggle: return "no_toggle";
    case ToggleClass::Dark: return "dark";
  }
  return "?";
}

Outcome parse_outcome(const std::string& text) {
  for (int k = 0; k < 3; ++k)
    if (to_string(static_cast<Outcome>(k)) == text) return static_cast<Outcome>(k);
  throw InvalidParameter("unknown outcome '" + text + "'");
}

ToggleClass parse_toggle_class(const std::string& text) {
  for (int k = 0; k < 3; ++k)
    if (to_string(static_cast<ToggleClass>(k)) == text) return static_cast<ToggleClass>(k);
  throw InvalidParameter("unknown toggle class '" + text + "'");
}

Outcome classify_outcome(JumpChannel channel) {
  if (channel == JumpChannel::Reflect) return Outcome::Reflection;
  if (channel == JumpChannel::Transmit) return Outcome::Transmission;
  return Outcome::Loss;
}

ToggleClass classify_toggle(AtomLevel initial, AtomLevel final_level) {
  if (!is_ground(initial) || !is_ground(final_level)) throw InvalidParameter("toggle classification needs ground levels");
  if (final_level == initial) return ToggleClass::NoToggle;
  if (final_level == AtomLevel::GZero) return ToggleClass::Dark;
  return ToggleClass::Toggle;
}

void OutcomeTable::add(Outcome o, ToggleClass t, std::uint64_t n) {
  counts[static_cast<int>(o)][static_cast<int>(t)] += n;
  n_trajectories += n;
}

OutcomeTable& OutcomeTable::operator+=(const OutcomeTable& other) {
  for (int o = 0; o < 3; ++o)
    for (int t = 0; t < 3; ++t) counts[o][t] += other.counts[o][t];
  n_trajectories += other.n_trajectories;
  return *this;
}

double OutcomeTable::probability(Outcome o, ToggleClass t) const {
  return ratio(static_cast<double>(count(o, t)), static_cast<double>(n_trajectories));
}

double OutcomeTable::folded_probability(Outcome o, bool toggle) const {
  if (!toggle) return probability(o, ToggleClass::NoToggle);
  return ratio(static_cast<double>(count(o, ToggleClass::Toggle) + count(o, ToggleClass::Dark)),
               static_cast<double>(n_trajectories));
}

double OutcomeTable::probability(Outcome o) const {
  const auto& row = counts[static_cast<int>(o)];
  return ratio(static_cast<double>(row[0] + row[1] + row[2]), static_cast<double>(n_trajectories));
}

double OutcomeTable::normalized_reflection() const {
  const double r = probability(Outcome::Reflection);
  return ratio(r, r + probability(Outcome::Transmission));
}

double OutcomeTable::toggle_given_reflection() const {
  return ratio(folded_probability(Outcome::Reflection, true), probability(Outcome::Reflection));
}

double OutcomeTable::toggle_given_detected() const {
  const double toggled = folded_probability(Outcome::Reflection, true) + folded_probability(Outcome::Transmission, true);
  return ratio(toggled, probability(Outcome::Reflection) + probability(Outcome::Transmission));
}

double OutcomeTable::post_toggle_loss_fraction() const {
  return ratio(folded_probability(Outcome::Loss, true), probability(Outcome::Loss));
}

double OutcomeTable::standard_error(double p) const {
  if (n_trajectories == 0) return 0.0;
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n_trajectories));
}

OutcomeTable tally(const TrajectoryRecord& record) {
  if (record.jumps.size() != 1)
    throw InvalidParameter("outcome tally expects a single-photon trajectory, got " +
                           std::to_string(record.jumps.size()) + " jumps");
  OutcomeTable t;
  t.add(classify_outcome(record.jumps.front().channel), classify_toggle(record.initial_atom, record.final_atom));
  return t;
}

void write_outcome_table(const std::filesystem::path& path, const OutcomeTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "outcome,toggle,count,probability\n";
  for (int o = 0; o < 3; ++o)
    for (int t = 0; t < 3; ++t) {
      const auto oc = static_cast<Outcome>(o);
      const auto tc = static_cast<ToggleClass>(t);
      out << to_string(oc) << ',' << to_string(tc) << ',' << table.count(oc, tc) << ',' << table.probability(oc, tc)
          << '\n';
    }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

OutcomeTable read_outcome_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  OutcomeTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line_no == 1) continue;
    std::istringstream ls(line);
    std::string outcome, toggle, count;
    if (!std::getline(ls, outcome, ',') || !std::getline(ls, toggle, ',') || !std::getline(ls, count, ','))
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed outcome row");
    try {
      table.add(parse_outcome(outcome), parse_toggle_class(toggle), std::stoull(count));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

namespace {

SystemParams with_coupling(const SystemParams& base, double g) {
  SystemParams p = base;
  p.g = g;
  p.g_minus = base.g > 0.0 ? base.g_minus * g / base.g : 0.0;
  p.g_pi = base.g > 0.0 ? base.g_pi * g / base.g : 0.0;
  return p;
}

// Runs `body(model, i)` for trajectories i in [lo, hi), reusing one model
// unless couplings are drawn per trajectory.
template <typename Body>
void for_each_trajectory(const SystemParams& params, std::uint64_t seed, const ScatterOptions& options,
                         std::uint64_t lo, std::uint64_t hi, Body&& body) {
  if (!options.g_distribution) {
    const ScatteringModel model(params, options.space, options.drive);
    for (std::uint64_t i = lo; i < hi; ++i) body(model, i);
    return;
  }
  for (std::uint64_t i = lo; i < hi; ++i) {
    Rng rng(child_seed(seed, kCouplingStream, i));
    const ScatteringModel model(with_coupling(params, options.g_distribution->sample(rng)), options.space,
                                options.drive);
    body(model, i);
  }
}

std::size_t chunk_count(std::uint64_t n, unsigned jobs) {
  return static_cast<std::size_t>(std::min<std::uint64_t>(n, std::max(64u, 8u * jobs)));
}

}  // namespace

OutcomeTable simulate_pulse_scattering(const SystemParams& params, AtomLevel initial_atom, std::uint64_t n_traj,
                                       std::uint64_t seed, const ScatterOptions& options) {
  if (n_traj < 1) throw InvalidParameter("n_traj must be >= 1");
  const std::size_t chunks = chunk_count(n_traj, options.jobs);
  const auto parts = parallel_map(chunks, options.jobs, [&](std::size_t c) {
    OutcomeTable t;
    for_each_trajectory(params, seed, options, n_traj * c / chunks, n_traj * (c + 1) / chunks,
                        [&](const ScatteringModel& model, std::uint64_t i) {
                          t += tally(model.run(initial_atom, 1, child_seed(seed, kScatterStream, i), options.trajectory));
                        });
    return t;
  });
  OutcomeTable total;
  for (const auto& p : parts) total += p;
  return total;
}

SecondPhotonEstimate probe_second_photon(const SystemParams& params, std::uint64_t seed, std::uint64_t n_traj,
                                         const ScatterOptions& options) {
  if (n_traj < 1) throw InvalidParameter("n_traj must be >= 1");
  if (options.space.fock_cut_s < 2) throw InvalidParameter("probe_second_photon needs fock_cut_s >= 2");
  struct Counts {
    std::uint64_t first = 0, second = 0;
  };
  const std::size_t chunks = chunk_count(n_traj, options.jobs);
  const auto parts = parallel_map(chunks, options.jobs, [&](std::size_t c) {
    Counts k;
    for_each_trajectory(params, seed, options, n_traj * c / chunks, n_traj * (c + 1) / chunks,
                        [&](const ScatteringModel& model, std::uint64_t i) {
                          const auto rec = model.run(AtomLevel::GMinus, 2, child_seed(seed, kSecondPhotonStream, i),
                                                     options.trajectory);
                          if (rec.jumps[0].channel != JumpChannel::Reflect) return;
                          ++k.first;
                          if (rec.jumps[1].channel == JumpChannel::Reflect) ++k.second;
                        });
    return k;
  });
  SecondPhotonEstimate est;
  est.n_trajectories = n_traj;
  for (const auto& p : parts) {
    est.first_reflected += p.first;
    est.second_reflected += p.second;
  }
  if (est.first_reflected > 0) {
    const double n = static_cast<double>(est.first_reflected);
    est.value = static_cast<double>(est.second_reflected) / n;
    est.standard_error = std::sqrt(est.value * (1.0 - est.value) / n);
  }
  return est;
}

double OutcomeProbabilities::probability(Outcome o) const {
  const auto& row = p[static_cast<int>(o)];
  return row[0] + row[1] + row[2];
}

double OutcomeProbabilities::normalized_reflection() const {
  const double r = probability(Outcome::Reflection);
  return ratio(r, r + probability(Outcome::Transmission));
}

double OutcomeProbabilities::toggle_given_reflection() const {
  const auto& row = p[static_cast<int>(Outcome::Reflection)];
  return ratio(row[0] + row[2], probability(Outcome::Reflection));
}

double OutcomeProbabilities::toggle_given_detected() const {
  const auto& r = p[static_cast<int>(Outcome::Reflection)];
  const auto& t = p[static_cast<int>(Outcome::Transmission)];
  return ratio(r[0] + r[2] + t[0] + t[2], probability(Outcome::Reflection) + probability(Outcome::Transmission));
}

OutcomeProbabilities exact_single_photon_outcomes(const SystemParams& params, AtomLevel initial_atom,
                                                  const HilbertSpace& space, Direction drive,
                                                  const TrajectoryOptions& options) {
  const FirstJumpDistribution d = ScatteringModel(params, space, drive).first_jump(initial_atom, 1, options);
  OutcomeProbabilities out;
  out.residual = d.residual_norm;
  for (int k = 0; k < kJumpChannels; ++k) {
    const int o = static_cast<int>(classify_outcome(static_cast<JumpChannel>(k)));
    for (int l = 0; l < kAtomLevels; ++l) {
      const auto level = static_cast<AtomLevel>(l);
      if (!is_ground(level)) continue;
      out.p[o][static_cast<int>(classify_toggle(initial_atom, level))] += d.probability[k][l];
    }
  }
  return out;
}

}  // namespace psw
