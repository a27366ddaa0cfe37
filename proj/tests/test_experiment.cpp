#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "psw/analytic.hpp"
#include "psw/experiment.hpp"
#include "psw/scattering.hpp"

using namespace psw;
namespace fs = std::filesystem;

namespace {

ExperimentConfig quiet_config() {
  ExperimentConfig c;
  c.chain.sequences = 24;
  c.detectors.afterpulsing = false;
  c.detectors.dark_rate = 0.0;
  return c;
}

// Inverse standard normal CDF by bisection on erfc.
double normal_quantile(double u) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("pulse chain layout") {
  ChainConfig c;
  c.sequences = 4;
  const auto chain = build_pulse_chain(c);
  REQUIRE(chain.pulses.size() == 24);
  CHECK(chain.sequences() == 4);
  for (int s = 0; s < 4; ++s) {
    const auto& ctrl = chain.pulses[chain.index_of(s, PulseRole::Control)];
    const auto& target = chain.pulses[chain.index_of(s, PulseRole::Target)];
    CHECK(ctrl.sequence_kind == (s % 2 == 0 ? SequenceKind::A : SequenceKind::B));
    CHECK(target.kind == PulseKind::Target);
    CHECK(target.direction == Direction::Rightward);
    CHECK(target.fwhm == c.target_fwhm);
    CHECK(target.mean_photons == c.target_photons);
    CHECK(target.start - ctrl.end() == doctest::Approx(c.post_control_wait_ns));
    // A controls from the left input (reflecting state for the rightward target), B from the right.
    CHECK(ctrl.direction == (s % 2 == 0 ? Direction::Leftward : Direction::Rightward));
  }
  for (std::size_t i = 1; i < chain.pulses.size(); ++i) CHECK(chain.gate_begin(i) >= chain.gate_end(i - 1));
  // Detection pulses inside a sequence alternate in direction, skipping the target.
  for (int s = 0; s < 4; ++s) {
    std::vector<Direction> d;
    for (int r = 0; r < 6; ++r)
      if (r != static_cast<int>(PulseRole::Target)) d.push_back(chain.pulses[chain.index_of(s, static_cast<PulseRole>(r))].direction);
    for (std::size_t k = 1; k < d.size(); ++k) CHECK(d[k] != d[k - 1]);
  }
}

TEST_CASE("pulse lookup by time") {
  const auto chain = build_pulse_chain(ChainConfig{});
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(chain.pulse_at(chain.pulses[i].center()) == i);
    CHECK(chain.pulse_at(chain.gate_begin(i)) == i);
  }
  CHECK_FALSE(chain.pulse_at(0.0).has_value());
}

TEST_CASE("empty chain is valid and overlapping gates are rejected") {
  ChainConfig c;
  c.sequences = 0;
  const auto chain = build_pulse_chain(c);
  CHECK(chain.pulses.empty());
  CHECK(chain.duration_ns == doctest::Approx(c.lead_ns + c.tail_ns));
  c.sequences = 2;
  c.pulse_gap_ns = 5.0;
  c.gate_margin_ns = 5.0;
  CHECK_THROWS_AS(build_pulse_chain(c), ConfigError);
  c.pulse_gap_ns = -1.0;
  CHECK_THROWS_AS(build_pulse_chain(c), ConfigError);
}

TEST_CASE("transit sampling") {
  TransitModel m;
  m.arrival_rate = 0.0;
  CHECK(sample_transits(m, 1e6, 1).empty());

  m.arrival_rate = 1e6;
  const auto a = sample_transits(m, 5e6, 7);
  const auto b = sample_transits(m, 5e6, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].start == b[i].start);
    CHECK(a[i].g == b[i].g);
  }
  // 5 ms window at 1e6 / s: Poisson(5000).
  CHECK(std::abs(static_cast<double>(a.size()) - 5000.0) < 4.0 * std::sqrt(5000.0));
  double long_ones = 0, inert = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i > 0) CHECK(a[i].start >= a[i - 1].start);
    CHECK(a[i].start >= 0.0);
    CHECK(a[i].start < 5e6);
    CHECK(a[i].g >= 0.0);
    CHECK(a[i].g_level >= 0);
    long_ones += a[i].duration > 300.0;
    inert += a[i].initial_atom == AtomLevel::GZero;
  }
  const double n = static_cast<double>(a.size());
  CHECK(long_ones / n == doctest::Approx(std::exp(-300.0 / 380.0)).epsilon(0.05));
  CHECK(long_ones / n < 0.5);
  CHECK(inert / n == doctest::Approx(1.0 / 3.0).epsilon(0.08));
}

TEST_CASE("quantile levels of the coupling distribution") {
  const GDistribution d{27.0, 10.0};
  const auto levels = g_quantile_levels(d, 8);
  REQUIRE(levels.size() == 8);
  const double cut = 0.5 * std::erfc(27.0 / 10.0 / std::sqrt(2.0));  // mass below g = 0
  for (int k = 0; k < 8; ++k) {
    const double u = cut + (1.0 - cut) * (k + 0.5) / 8.0;
    CHECK(levels[static_cast<std::size_t>(k)] == doctest::Approx(27.0 + 10.0 * normal_quantile(u)).epsilon(1e-9));
    if (k > 0) CHECK(levels[static_cast<std::size_t>(k)] > levels[static_cast<std::size_t>(k - 1)]);
  }
  for (double g : g_quantile_levels(GDistribution{5.0, 0.0}, 3)) CHECK(g == 5.0);
  CHECK_THROWS_AS(g_quantile_levels(d, 0), InvalidParameter);
}

TEST_CASE("afterpulse delay distribution") {
  AfterpulseModel a;
  CHECK(a.delay_fraction(0.0, a.dead_time_ns) == 0.0);
  CHECK(a.delay_fraction(0.0, 1e7) == doctest::Approx(1.0));
  CHECK(a.delay_fraction(0.0, 60.0) + a.delay_fraction(60.0, 1e7) == doctest::Approx(1.0));
  CHECK(a.delay_fraction(50.0, 10.0) == 0.0);
}

TEST_CASE("detector mapping validation") {
  DetectorParams d;
  CHECK_NOTHROW(d.validate());
  CHECK(d.detectors_on(Direction::Leftward) == std::vector<int>{0, 1, 2});
  d.port.assign(5, Direction::Leftward);
  CHECK_THROWS(d.validate());
  auto cfg = KeyValueConfig::parse_string("detector.0.port = left\n");
  CHECK_THROWS_AS(detector_params_from(cfg), ConfigError);
}

TEST_CASE("empty overcoupled cavity transmits the analytic fraction of each detection pulse") {
  auto c = quiet_config();
  c.transit_mode = TransitMode::None;
  c.detectors.path_transmission = 1.0;
  c.n_cycles = 200;
  const auto out = run_experiment(c, 3);
  const auto chain = build_pulse_chain(c.chain);
  double transmitted = 0, pulses = 0;
  for (std::size_t i = 0; i < chain.pulses.size(); ++i)
    if (chain.pulses[i].kind == PulseKind::Detection) pulses += 1;
  for (const auto& k : out.clicks) {
    const auto i = chain.pulse_at(k.timestamp_ps * 1e-3);
    if (i && chain.pulses[*i].kind == PulseKind::Detection && c.detectors.port[k.detector_id] == chain.pulses[*i].direction)
      transmitted += 1;
  }
  const auto& p = c.params;
  const double expected = empty_cavity_transmission(0.0, p.kappa_i, p.kappa_ex, p.h) * c.chain.detection_photons;
  const double per_pulse = transmitted / (pulses * static_cast<double>(c.n_cycles));
  CHECK(per_pulse == doctest::Approx(expected).epsilon(0.03));
  CHECK(expected == doctest::Approx(0.354 * 2.5).epsilon(0.01));
}

TEST_CASE("target photons scatter off a present atom with the single-pulse probabilities") {
  auto c = quiet_config();
  c.transit_mode = TransitMode::Infinite;
  c.transits.g_dist = GDistribution{SystemParams::experiment().g, 0.0};
  c.transits.g_levels = 1;
  c.library_size = 0;
  c.n_cycles = 300;
  const auto out = run_experiment(c, 5);
  const auto chain = build_pulse_chain(c.chain);
  double reflected = 0, photons = 0;
  for (const auto& p : out.truth.pulses) {
    if (chain.pulses[static_cast<std::size_t>(p.pulse_index)].kind != PulseKind::Target) continue;
    if (p.atom_before != AtomLevel::GMinus || p.photons != 1) continue;
    photons += 1;
    reflected += p.reflected;
  }
  TrajectoryOptions o;
  o.source = GaussianSource{0.0, c.chain.target_fwhm};
  const double expected =
      exact_single_photon_outcomes(c.params, AtomLevel::GMinus, {}, Direction::Rightward, o).probability(Outcome::Reflection);
  REQUIRE(photons > 200);
  const double se = std::sqrt(expected * (1 - expected) / photons);
  CHECK(std::abs(reflected / photons - expected) < 4 * se);
}

TEST_CASE("atom state persists from pulse to pulse within a transit") {
  auto c = quiet_config();
  c.n_cycles = 40;
  const auto out = run_experiment(c, 8);
  std::map<std::pair<std::uint64_t, int>, AtomLevel> last;
  std::size_t checked = 0;
  for (const auto& p : out.truth.pulses) {
    if (p.transit_index < 0) continue;
    const auto key = std::make_pair(p.cycle_id, p.transit_index);
    if (auto it = last.find(key); it != last.end()) {
      CHECK(p.atom_before == it->second);
      ++checked;
    }
    last[key] = p.atom_after;
    CHECK(p.reflected + p.transmitted + p.lost == p.photons);
    CHECK(p.outcomes.size() == static_cast<std::size_t>(p.photons));
  }
  CHECK(checked > 50);
}

TEST_CASE("click streams are ordered, quantized and deterministic") {
  auto c = quiet_config();
  c.detectors.afterpulsing = true;
  c.detectors.dark_rate = 1e4;
  c.n_cycles = 30;
  const auto a = run_experiment(c, 21, 1);
  const auto b = run_experiment(c, 21, 3);
  CHECK(a.clicks == b.clicks);
  CHECK(a.truth.pulses == b.truth.pulses);
  for (std::size_t i = 1; i < a.clicks.size(); ++i) CHECK_FALSE(a.clicks[i] < a.clicks[i - 1]);
  const auto duration = build_pulse_chain(c.chain).duration_ns;
  for (const auto& k : a.clicks) {
    CHECK(k.timestamp_ps % 100 == 0);
    CHECK(k.timestamp_ps < static_cast<std::int64_t>(duration * 1000.0));
  }
  // Streaming the same cycles in blocks gives the same records.
  const ExperimentRunner runner(c, 21);
  auto first = runner.run(0, 13);
  const auto rest = runner.run(13, 17);
  first.clicks.insert(first.clicks.end(), rest.clicks.begin(), rest.clicks.end());
  CHECK(first.clicks == a.clicks);
  const auto other = run_experiment(c, 22, 1);
  CHECK_FALSE(other.clicks == a.clicks);
}

TEST_CASE("click file round trip and validation") {
  const auto dir = fs::temp_directory_path() / "psw_clicks_test";
  fs::create_directories(dir);
  const std::vector<ClickRecord> clicks{{0, 1, 100}, {0, 3, 2500}, {2, 0, 0}, {2, 4, 900}};
  write_clicks(dir / "c.txt", clicks);
  CHECK(read_clicks(dir / "c.txt") == clicks);

  ClickStreamReader reader(dir / "c.txt");
  std::vector<ClickRecord> cycle;
  REQUIRE(reader.next_cycle(cycle));
  CHECK(cycle.size() == 2);
  REQUIRE(reader.next_cycle(cycle));
  CHECK(cycle.front().cycle_id == 2);
  CHECK_FALSE(reader.next_cycle(cycle));
  CHECK(reader.last_cycle() == 2u);

  auto bad = [](const std::string& text) {
    std::istringstream in(text);
    return read_clicks(in, "bad");
  };
  CHECK_THROWS(bad("0\t1\t100\n"));
  CHECK_THROWS(bad("# clicks v1\n0\t7\t100\n"));
  CHECK_THROWS(bad("# clicks v1\n0\t1\t150\n"));
  CHECK_THROWS(bad("# clicks v1\n0\t1\n"));
  CHECK_THROWS(bad("# clicks v1\n0\t1\t-100\n"));
  try {
    bad("# clicks v1\n0\t1\t100\n0\tx\t100\n");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("bad:3") != std::string::npos);
  }

  std::ofstream(dir / "order.txt") << "# clicks v1\n3\t0\t100\n1\t0\t100\n";
  ClickStreamReader unordered(dir / "order.txt");
  REQUIRE(unordered.next_cycle(cycle));
  CHECK_THROWS(unordered.next_cycle(cycle));
  fs::remove_all(dir);
}

TEST_CASE("truth sidecar round trip") {
  auto c = quiet_config();
  c.n_cycles = 10;
  const auto out = run_experiment(c, 4);
  const auto path = fs::temp_directory_path() / "psw_truth_test.truth";
  write_truth(path, out.truth);
  const auto back = read_truth(path);
  CHECK(back.pulses == out.truth.pulses);
  REQUIRE(back.transits.size() == out.truth.transits.size());
  for (std::size_t i = 0; i < back.transits.size(); ++i) {
    CHECK(back.transits[i].transit.start == out.truth.transits[i].transit.start);
    CHECK(back.transits[i].transit.g == out.truth.transits[i].transit.g);
  }
  CHECK(truth_path_for("run/clicks.txt") == fs::path("run/clicks.truth"));
  fs::remove(path);
}

TEST_CASE("calibration pulses land in their window") {
  CalibrationConfig cc;
  cc.n_pulses = 2000;
  DetectorParams d;
  d.afterpulsing = false;
  d.dark_rate = 0.0;
  const auto clicks = run_calibration(cc, d, 1);
  double n = 0;
  for (const auto& k : clicks) {
    const double t = k.timestamp_ps * 1e-3 - cc.pulse_start_ns;
    CHECK(t > -20.0);
    CHECK(t < 2 * cc.pulse_fwhm + 20.0);
    n += 1;
  }
  CHECK(n / (cc.n_pulses * 5.0) == doctest::Approx(cc.mean_clicks).epsilon(0.05));
}
