#include "psw/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "psw/random.hpp"

namespace psw {

namespace {

constexpr double kPsPerNs = 1000.0;

// A click that fell inside some pulse gate.
struct GatedClick {
  std::size_t pulse;
  int detector;
  std::int64_t t_ps;
  bool reflected;
};

bool counts_for_herald(PulseRole role) { return role != PulseRole::Target && role != PulseRole::Reset; }

// Is there a window shorter than `window_ps` holding every anchor and at
// least `min_count` counted clicks in total?
bool window_satisfied(const std::vector<std::int64_t>& counted, std::int64_t lo, std::int64_t hi,
                      std::int64_t window_ps, int min_count) {
  if (hi - lo >= window_ps) return false;
  for (std::size_t a = 0; a < counted.size(); ++a) {
    const std::int64_t x = counted[a];
    if (x > lo) break;
    if (hi - x >= window_ps) continue;
    const auto end = std::lower_bound(counted.begin() + static_cast<std::ptrdiff_t>(a), counted.end(), x + window_ps);
    if (std::distance(counted.begin() + static_cast<std::ptrdiff_t>(a), end) >= min_count) return true;
  }
  return false;
}

void scan_cycle(std::uint64_t cycle, std::span<const ClickRecord> clicks, const AnalysisSetup& setup,
                const HeraldCriterion& criterion, std::vector<AtomEvent>& out) {
  const auto& chain = setup.chain;
  std::vector<GatedClick> gated;
  for (const auto& c : clicks) {
    const auto pulse = chain.pulse_at(static_cast<double>(c.timestamp_ps) / kPsPerNs);
    if (!pulse) continue;
    const bool reflected =
        setup.port[static_cast<std::size_t>(c.detector_id)] == opposite(chain.pulses[*pulse].direction);
    gated.push_back({*pulse, c.detector_id, c.timestamp_ps, reflected});
  }
  if (gated.empty()) return;

  std::vector<std::int64_t> counted;
  for (const auto& g : gated)
    if (g.reflected && counts_for_herald(chain.pulses[g.pulse].role)) counted.push_back(g.t_ps);

  const auto window_ps = static_cast<std::int64_t>(std::llround(criterion.window_ns * kPsPerNs));
  auto reflected_in = [&](std::size_t pulse) {
    std::vector<std::int64_t> t;
    for (const auto& g : gated)
      if (g.pulse == pulse && g.reflected) t.push_back(g.t_ps);
    return t;
  };

  for (int s = 0; s < chain.sequences(); ++s) {
    std::vector<std::vector<std::int64_t>> anchors;
    if (criterion.require_control) anchors.push_back(reflected_in(chain.index_of(s, PulseRole::Control)));
    anchors.push_back(reflected_in(chain.index_of(s, PulseRole::Confirm1)));
    if (criterion.confirmations == 2) anchors.push_back(reflected_in(chain.index_of(s, PulseRole::Confirm2)));
    if (std::any_of(anchors.begin(), anchors.end(), [](const auto& a) { return a.empty(); })) continue;

    // Try every combination of one anchor click per required pulse.
    std::optional<std::int64_t> herald;
    std::vector<std::size_t> pick(anchors.size(), 0);
    for (;;) {
      std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = std::numeric_limits<std::int64_t>::min();
      for (std::size_t k = 0; k < anchors.size(); ++k) {
        lo = std::min(lo, anchors[k][pick[k]]);
        hi = std::max(hi, anchors[k][pick[k]]);
      }
      if (window_satisfied(counted, lo, hi, window_ps, criterion.min_reflected_photons)) {
        herald = hi;
        break;
      }
      std::size_t k = 0;
      while (k < pick.size() && ++pick[k] == anchors[k].size()) pick[k++] = 0;
      if (k == pick.size()) break;
    }
    if (!herald) continue;

    AtomEvent e;
    e.cycle_id = cycle;
    e.sequence = s;
    e.herald_time_ps = *herald;
    const auto control = chain.index_of(s, PulseRole::Control);
    const auto target = chain.index_of(s, PulseRole::Target);
    e.sequence_kind = chain.pulses[control].sequence_kind;
    e.control_dir = chain.pulses[control].direction;
    for (const auto& g : gated) {
      if (g.pulse == control) {
        ++e.control_clicks[static_cast<std::size_t>(g.detector)];
        e.control_sequence.push_back(g.reflected);
      } else if (g.pulse == target && !e.first_target_port) {
        e.first_target_port = setup.port[static_cast<std::size_t>(g.detector)];
      }
    }
    out.push_back(std::move(e));
  }
}

double beta_sd(std::uint64_t num, std::uint64_t den) {
  const double a = static_cast<double>(num) + 1.0, b = static_cast<double>(den - num) + 1.0;
  return std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));
}

}  // namespace

void HeraldCriterion::validate() const {
  if (!(window_ns > 0)) throw ConfigError("herald window must be > 0");
  if (confirmations < 1 || confirmations > 2) throw ConfigError("herald confirmations must be 1 or 2");
  if (min_reflected_photons < confirmations + (require_control ? 1 : 0))
    throw ConfigError("herald min_reflected_photons must cover every required pulse");
}

AnalysisSetup AnalysisSetup::from(const ChainConfig& chain, const DetectorParams& detectors) {
  AnalysisSetup s;
  s.chain = build_pulse_chain(chain);
  s.port = detectors.port;
  s.target_photons = chain.target_photons;
  s.path_transmission = detectors.path_transmission;
  return s;
}

std::vector<AtomEvent> detect_atoms(std::span<const ClickRecord> clicks, const AnalysisSetup& setup,
                                    const HeraldCriterion& criterion) {
  criterion.validate();
  std::vector<AtomEvent> out;
  std::size_t lo = 0;
  while (lo < clicks.size()) {
    std::size_t hi = lo + 1;
    while (hi < clicks.size() && clicks[hi].cycle_id == clicks[lo].cycle_id) {
      if (clicks[hi].timestamp_ps < clicks[hi - 1].timestamp_ps)
        throw InvalidParameter("click stream not sorted within cycle " + std::to_string(clicks[lo].cycle_id));
      ++hi;
    }
    if (hi < clicks.size() && clicks[hi].cycle_id < clicks[lo].cycle_id)
      throw InvalidParameter("click stream not sorted by cycle");
    for (std::size_t k = lo; k < hi; ++k)
      if (clicks[k].detector_id < 0 || static_cast<std::size_t>(clicks[k].detector_id) >= setup.port.size())
        throw InvalidParameter("click on unmapped detector " + std::to_string(clicks[k].detector_id));
    scan_cycle(clicks[lo].cycle_id, clicks.subspan(lo, hi - lo), setup, criterion, out);
    lo = hi;
  }
  return out;
}

double AfterpulseCalibration::port_probability(const std::vector<Direction>& port, Direction which) const {
  double num = 0.0, den = 0.0;
  for (std::size_t d = 0; d < window_prob.size() && d < port.size(); ++d) {
    if (port[d] != which) continue;
    num += window_prob[d] * static_cast<double>(pulse_clicks[d]);
    den += static_cast<double>(pulse_clicks[d]);
  }
  return den > 0 ? num / den : 0.0;
}

AfterpulseCalibration afterpulse_calibrate(std::span<const ClickRecord> clicks, const CalibrationConfig& config,
                                           const DelayWindow& window, double histogram_span_ns) {
  constexpr double kMarginNs = 5.0;
  AfterpulseCalibration cal;
  const double pulse_end = 2.0 * config.pulse_fwhm + kMarginNs;
  const double late_lo = 0.5 * (config.cycle_ns - config.pulse_start_ns);
  const double late_hi = config.cycle_ns - config.pulse_start_ns;
  if (!(window.hi > window.lo) || window.lo < pulse_end || window.hi > late_lo)
    throw InvalidParameter("target window must lie between the calibration pulse and the background region");
  const auto bins = static_cast<std::size_t>(std::ceil(histogram_span_ns / cal.bin_ns));
  for (auto& h : cal.histogram) h.assign(bins, 0);

  std::array<std::uint64_t, 5> in_window{}, late{};
  for (const auto& c : clicks) {
    if (c.detector_id < 0 || c.detector_id > 4) throw InvalidParameter("detector id outside 0..4");
    const auto d = static_cast<std::size_t>(c.detector_id);
    const double t = static_cast<double>(c.timestamp_ps) / kPsPerNs - config.pulse_start_ns;
    if (t >= -kMarginNs && t < pulse_end) {
      ++cal.pulse_clicks[d];
      continue;
    }
    if (t >= pulse_end) {
      const auto bin = static_cast<std::size_t>(t / cal.bin_ns);
      if (bin < bins) ++cal.histogram[d][bin];
    }
    if (t >= window.lo && t < window.hi) ++in_window[d];
    if (t >= late_lo && t < late_hi) ++late[d];
  }
  // Dark counts are flat; the late region estimates their share of the window.
  const double scale = (window.hi - window.lo) / (late_hi - late_lo);
  for (std::size_t d = 0; d < 5; ++d) {
    if (cal.pulse_clicks[d] == 0) continue;
    const double n = static_cast<double>(cal.pulse_clicks[d]);
    const double background = static_cast<double>(late[d]) * scale;
    cal.window_prob[d] = std::max(0.0, static_cast<double>(in_window[d]) - background) / n;
    cal.window_prob_error[d] = std::sqrt(static_cast<double>(in_window[d]) + background * scale) / n;
  }
  return cal;
}

void write_calibration(const std::filesystem::path& path, const AfterpulseCalibration& cal) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "# afterpulse calibration v1\n";
  out << "bin_ns\t" << cal.bin_ns << '\n';
  for (std::size_t d = 0; d < 5; ++d) {
    out << "detector\t" << d << '\t' << cal.pulse_clicks[d] << '\t' << cal.window_prob[d] << '\t'
        << cal.window_prob_error[d] << '\t';
    for (std::size_t b = 0; b < cal.histogram[d].size(); ++b) out << (b ? "," : "") << cal.histogram[d][b];
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

AfterpulseCalibration read_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  AfterpulseCalibration cal;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "bin_ns") {
      ls >> cal.bin_ns;
    } else if (tag == "detector") {
      std::size_t d = 0;
      std::string hist;
      ls >> d;
      if (!ls || d > 4) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad detector");
      ls >> cal.pulse_clicks[d] >> cal.window_prob[d] >> cal.window_prob_error[d] >> hist;
      std::istringstream hs(hist);
      std::string cell;
      while (std::getline(hs, cell, ',')) cal.histogram[d].push_back(std::stoull(cell));
    } else {
      ls.setstate(std::ios::failbit);
    }
    if (ls.fail()) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed line");
  }
  return cal;
}

CorrectedCount subtract_afterpulses(double raw, std::span<const double> prob, std::span<const double> control_clicks) {
  if (prob.size() != control_clicks.size()) throw InvalidParameter("probability and click arrays differ in size");
  double expected = 0.0;
  for (std::size_t d = 0; d < prob.size(); ++d) expected += prob[d] * control_clicks[d];
  const double v = raw - expected;
  if (v < 0.0) return {0.0, true};
  return {v, false};
}

HeraldedStats heralded_switch_stats(std::span<const AtomEvent> events, const AnalysisSetup& setup,
                                    const AfterpulseCalibration* calibration) {
  HeraldedStats out;
  for (int k = 0; k < 2; ++k) {
    StateStats s;
    std::array<double, 5> control{};
    std::optional<Direction> target_dir;
    for (const auto& e : events) {
      if (static_cast<int>(e.sequence_kind) != k) continue;
      ++s.events;
      for (std::size_t d = 0; d < 5; ++d) control[d] += e.control_clicks[d];
      const auto dir = setup.chain.pulses[setup.chain.index_of(e.sequence, PulseRole::Target)].direction;
      target_dir = dir;
      if (!e.first_target_port) continue;
      if (*e.first_target_port == opposite(dir))
        ++s.raw_reflected;
      else
        ++s.raw_transmitted;
    }
    if (s.events == 0) continue;
    s.reflected = static_cast<double>(s.raw_reflected);
    s.transmitted = static_cast<double>(s.raw_transmitted);
    if (calibration) {
      // Expected false first clicks per port, from the control clicks on the
      // detectors of that port.
      for (const bool reflect_port : {true, false}) {
        const Direction port = reflect_port ? opposite(*target_dir) : *target_dir;
        std::vector<double> prob, clicks;
        for (std::size_t d = 0; d < 5 && d < setup.port.size(); ++d) {
          if (setup.port[d] != port) continue;
          prob.push_back(calibration->window_prob[d]);
          clicks.push_back(control[d]);
        }
        auto& value = reflect_port ? s.reflected : s.transmitted;
        const auto c = subtract_afterpulses(value, prob, clicks);
        value = c.value;
        s.clamped = s.clamped || c.clamped;
      }
    }
    const double detected = s.reflected + s.transmitted;
    if (!(detected > 0)) continue;
    s.normalized_reflection = s.reflected / detected;
    s.normalized_transmission = s.transmitted / detected;
    s.normalized_error = std::sqrt(s.normalized_reflection * s.normalized_transmission / detected);
    const double budget = static_cast<double>(s.events) * setup.target_photons * setup.path_transmission;
    s.absolute_reflection = s.reflected / budget;
    s.absolute_transmission = s.transmitted / budget;
    s.absolute_reflection_error = std::sqrt(static_cast<double>(s.raw_reflected)) / budget;
    s.absolute_transmission_error = std::sqrt(static_cast<double>(s.raw_transmitted)) / budget;
    out.state[static_cast<std::size_t>(k)] = s;
  }
  return out;
}

RatioEstimate second_photon_stats(std::span<const AtomEvent> events) {
  RatioEstimate r;
  for (const auto& e : events) {
    if (e.control_sequence.size() < 2 || !e.control_sequence[0]) continue;
    ++r.denominator;
    if (e.control_sequence[1]) ++r.numerator;
  }
  if (r.denominator > 0) r.value = static_cast<double>(r.numerator) / static_cast<double>(r.denominator);
  // Posterior spread under a flat prior: binomial for large samples, wide
  // when there is little data.
  r.standard_error = beta_sd(r.numerator, r.denominator);
  return r;
}

namespace {

struct DetectorSeries {
  std::array<std::vector<double>, 3> d;
};

DetectorSeries reflected_series(std::span<const AtomEvent> events, const AnalysisSetup& setup) {
  std::array<std::vector<int>, 2> triple;
  bool any = false;
  for (int p = 0; p < 2; ++p) {
    for (std::size_t d = 0; d < setup.port.size(); ++d)
      if (static_cast<int>(setup.port[d]) == p) triple[static_cast<std::size_t>(p)].push_back(static_cast<int>(d));
    any = any || triple[static_cast<std::size_t>(p)].size() >= 3;
  }
  if (!any) throw ConfigError("antibunching needs an output port with at least three detectors");
  DetectorSeries s;
  for (const auto& e : events) {
    const auto& dets = triple[static_cast<std::size_t>(opposite(e.control_dir))];
    if (dets.size() < 3) continue;
    for (std::size_t k = 0; k < 3; ++k)
      s.d[k].push_back(e.control_clicks[static_cast<std::size_t>(dets[k])]);
  }
  return s;
}

AntibunchingResult correlate(const DetectorSeries& s, int max_dn) {
  if (max_dn < 1) throw InvalidParameter("max_dn must be >= 1");
  AntibunchingResult r;
  const auto n = static_cast<long>(s.d[0].size());
  r.events = static_cast<std::uint64_t>(n);
  std::vector<double> off;
  for (int dn = -max_dn; dn <= max_dn; ++dn) {
    double c = 0.0;
    for (long i = std::max(0L, static_cast<long>(dn)); i < n && i - dn < n; ++i) {
      const auto j = static_cast<std::size_t>(i - dn);
      const auto k = static_cast<std::size_t>(i);
      c += s.d[0][k] * s.d[1][j] + s.d[1][k] * s.d[2][j] + s.d[0][k] * s.d[2][j];
    }
    r.dn.push_back(dn);
    r.coincidences.push_back(c);
    const long pairs = n - std::abs(dn);
    if (pairs <= 0) continue;
    if (dn == 0)
      r.peak = c / static_cast<double>(pairs);
    else
      off.push_back(c / static_cast<double>(pairs));
  }
  if (!off.empty()) {
    r.off_peak_mean = std::accumulate(off.begin(), off.end(), 0.0) / static_cast<double>(off.size());
    double ss = 0.0;
    for (double v : off) ss += (v - r.off_peak_mean) * (v - r.off_peak_mean);
    r.off_peak_sigma = off.size() > 1 ? std::sqrt(ss / static_cast<double>(off.size() - 1)) : 0.0;
  }
  r.suppression = r.peak > 0 ? r.off_peak_mean / r.peak : std::numeric_limits<double>::infinity();
  return r;
}

}  // namespace

AntibunchingResult antibunching(std::span<const AtomEvent> events, const AnalysisSetup& setup, int max_dn) {
  return correlate(reflected_series(events, setup), max_dn);
}

AntibunchingResult shuffled_antibunching(std::span<const AtomEvent> events, const AnalysisSetup& setup, int max_dn,
                                         std::uint64_t seed) {
  auto s = reflected_series(events, setup);
  Rng rng(seed);
  for (auto& series : s.d) std::shuffle(series.begin(), series.end(), rng);
  return correlate(s, max_dn);
}

PhotonsPerSwitch photons_per_switch(double normalized_reflection, double absolute_reflection,
                                    double loss_timing_fraction) {
  if (!(normalized_reflection > 0) || !(absolute_reflection > 0))
    throw InvalidParameter("photons per switch is undefined for zero reflection");
  if (loss_timing_fraction < 0 || loss_timing_fraction > 1)
    throw InvalidParameter("loss timing fraction must be in [0, 1]");
  PhotonsPerSwitch p;
  p.normalized = 1.0 / normalized_reflection;
  p.absolute = 1.0 / absolute_reflection;
  p.corrected = p.absolute - loss_timing_fraction * (p.absolute - p.normalized);
  return p;
}

FalseDetection false_detection(std::span<const ClickRecord> clicks, std::uint64_t n_cycles, const AnalysisSetup& setup,
                               const HeraldCriterion& criterion) {
  FalseDetection f;
  f.events = detect_atoms(clicks, setup, criterion).size();
  f.sequences = n_cycles * static_cast<std::uint64_t>(setup.chain.sequences());
  f.ratio = f.sequences > 0 ? static_cast<double>(f.events) / static_cast<double>(f.sequences) : 0.0;
  return f;
}

void write_events_csv(const std::filesystem::path& path, std::span<const AtomEvent> events) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "cycle_id,herald_time_ps,sequence_kind,control_dir\n";
  for (const auto& e : events)
    out << e.cycle_id << ',' << e.herald_time_ps << ',' << to_string(e.sequence_kind) << ','
        << to_string(e.control_dir) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_correlation_csv(const std::filesystem::path& path, const AntibunchingResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "dn,coincidences\n";
  for (std::size_t k = 0; k < result.dn.size(); ++k) out << result.dn[k] << ',' << result.coincidences[k] << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace psw
