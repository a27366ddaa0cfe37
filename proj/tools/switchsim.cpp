// switchsim: spectrum, scatter, generate, analyze and calibrate stages of the
// single-photon switch pipeline. Stages talk to each other only via files.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "psw/analysis.hpp"
#include "psw/analytic.hpp"
#include "psw/config.hpp"
#include "psw/experiment.hpp"
#include "psw/model.hpp"
#include "psw/parallel.hpp"
#include "psw/scattering.hpp"

namespace fs = std::filesystem;
using namespace psw;

namespace {

struct Options {
  std::string command;
  std::string config;
  std::uint64_t seed = 1;
  std::string out = "out";
  unsigned jobs = default_jobs();
  bool report = false;
};

// Every subcommand resolves the whole schema so one file can drive all
// stages; whatever is left over is a typo and fails the run.
struct Settings {
  SystemParams params;
  TransitModel transits;
  ChainConfig chain;
  DetectorParams detectors;
  CalibrationConfig calibration;
  ExperimentConfig experiment;
  HeraldCriterion herald;

  double spectrum_lo = -150.0, spectrum_hi = 150.0;
  std::int64_t spectrum_points = 601, spectrum_g_samples = 2000;
  std::string spectrum_fit_input;
  AtomGeometry spectrum_geometry = AtomGeometry::Chiral;

  std::int64_t scatter_trajectories = 20000;
  double scatter_fwhm = 50.0;  // target pulse width
  bool scatter_distributed_g = true;
  bool scatter_ideal = false;
  std::int64_t scatter_second_photon = 20000;

  std::string analyze_clicks;
  std::string analyze_calibration;
  std::string analyze_false_clicks;
  std::int64_t analyze_max_dn = 10;
  std::int64_t analyze_loss_trajectories = 20000;

  Manifest manifest;
};

AtomGeometry parse_geometry(const std::string& s) {
  if (s == "chiral") return AtomGeometry::Chiral;
  if (s == "standing_wave") return AtomGeometry::StandingWave;
  throw ConfigError("spectrum.geometry must be chiral or standing_wave, got '" + s + "'");
}

bool has_detector_map(const KeyValueConfig& cfg) {
  for (int k = 0; k < 5; ++k)
    if (cfg.contains("detector." + std::to_string(k) + ".port")) return true;
  return false;
}

Settings resolve(const Options& opt) {
  KeyValueConfig cfg = opt.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(opt.config);
  Settings s;
  s.params = system_params_from_config(cfg);
  s.transits = transit_model_from(cfg);
  s.chain = chain_config_from(cfg);
  const bool needs_map = opt.command == "generate" || opt.command == "analyze" || opt.command == "calibrate";
  if (needs_map || has_detector_map(cfg)) s.detectors = detector_params_from(cfg);
  s.calibration = calibration_config_from(cfg, s.chain);

  auto& e = s.experiment;
  e.n_cycles = static_cast<std::uint64_t>(cfg.take_int("experiment.cycles", static_cast<std::int64_t>(e.n_cycles)));
  e.transit_mode = parse_transit_mode(cfg.take_string("experiment.transit_mode", to_string(e.transit_mode)));
  e.library_size = static_cast<int>(cfg.take_int("experiment.library_size", e.library_size));
  e.rtol = cfg.take_double("experiment.rtol", e.rtol);
  e.atol = cfg.take_double("experiment.atol", e.atol);
  e.params = s.params;
  e.chain = s.chain;
  e.transits = s.transits;
  e.detectors = s.detectors;

  s.herald.min_reflected_photons =
      static_cast<int>(cfg.take_int("herald.min_reflected_photons", s.herald.min_reflected_photons));
  s.herald.window_ns = cfg.take_double("herald.window_ns", s.herald.window_ns);
  s.herald.confirmations = static_cast<int>(cfg.take_int("herald.confirmations", s.herald.confirmations));
  s.herald.require_control = cfg.take_bool("herald.require_control", s.herald.require_control);
  s.herald.validate();

  s.spectrum_lo = cfg.take_double("spectrum.lo_mhz", s.spectrum_lo);
  s.spectrum_hi = cfg.take_double("spectrum.hi_mhz", s.spectrum_hi);
  s.spectrum_points = cfg.take_int("spectrum.points", s.spectrum_points);
  s.spectrum_g_samples = cfg.take_int("spectrum.g_samples", s.spectrum_g_samples);
  s.spectrum_fit_input = cfg.take_string("spectrum.fit_input", "");
  s.spectrum_geometry = parse_geometry(cfg.take_string("spectrum.geometry", "chiral"));
  if (!(s.spectrum_hi > s.spectrum_lo) || s.spectrum_points < 2)
    throw ConfigError("spectrum grid needs hi_mhz > lo_mhz and points >= 2");
  if (s.spectrum_g_samples < 1) throw ConfigError("spectrum.g_samples must be >= 1");

  s.scatter_trajectories = cfg.take_int("scatter.trajectories", s.scatter_trajectories);
  s.scatter_fwhm = cfg.take_double("scatter.fwhm_ns", s.scatter_fwhm);
  s.scatter_distributed_g = cfg.take_bool("scatter.distributed_g", s.scatter_distributed_g);
  s.scatter_ideal = cfg.take_bool("scatter.ideal", s.scatter_ideal);
  s.scatter_second_photon = cfg.take_int("scatter.second_photon_trajectories", s.scatter_second_photon);
  if (s.scatter_trajectories < 1 || !(s.scatter_fwhm > 0) || s.scatter_second_photon < 0)
    throw ConfigError("scatter needs trajectories >= 1 and fwhm_ns > 0");

  s.analyze_clicks = cfg.take_string("analyze.clicks", "");
  s.analyze_calibration = cfg.take_string("analyze.calibration", "");
  s.analyze_false_clicks = cfg.take_string("analyze.false_clicks", "");
  s.analyze_max_dn = cfg.take_int("analyze.max_dn", s.analyze_max_dn);
  s.analyze_loss_trajectories = cfg.take_int("analyze.loss_trajectories", s.analyze_loss_trajectories);
  if (s.analyze_max_dn < 1 || s.analyze_loss_trajectories < 1)
    throw ConfigError("analyze.max_dn and analyze.loss_trajectories must be >= 1");

  cfg.require_all_consumed();

  auto& m = s.manifest;
  m.add("command", opt.command);
  m.add("config", opt.config.empty() ? std::string("(defaults)") : fs::absolute(opt.config).string());
  m.add("seed", std::to_string(opt.seed));
  m.add("jobs", static_cast<std::int64_t>(opt.jobs));
  add_to_manifest(m, s.params);
  add_to_manifest(m, s.transits);
  add_to_manifest(m, s.chain);
  add_to_manifest(m, s.detectors);
  m.add("calibration.pulses", static_cast<std::int64_t>(s.calibration.n_pulses));
  m.add("calibration.mean_clicks", s.calibration.mean_clicks);
  m.add("calibration.pulse_start_ns", s.calibration.pulse_start_ns);
  m.add("calibration.cycle_ns", s.calibration.cycle_ns);
  m.add("experiment.cycles", static_cast<std::int64_t>(e.n_cycles));
  m.add("experiment.transit_mode", to_string(e.transit_mode));
  m.add("experiment.library_size", static_cast<std::int64_t>(e.library_size));
  m.add("experiment.rtol", e.rtol);
  m.add("experiment.atol", e.atol);
  m.add("herald.min_reflected_photons", static_cast<std::int64_t>(s.herald.min_reflected_photons));
  m.add("herald.window_ns", s.herald.window_ns);
  m.add("herald.confirmations", static_cast<std::int64_t>(s.herald.confirmations));
  m.add("herald.require_control", std::string(s.herald.require_control ? "true" : "false"));
  m.add("spectrum.lo_mhz", s.spectrum_lo);
  m.add("spectrum.hi_mhz", s.spectrum_hi);
  m.add("spectrum.points", s.spectrum_points);
  m.add("spectrum.g_samples", s.spectrum_g_samples);
  m.add("spectrum.fit_input", s.spectrum_fit_input);
  m.add("spectrum.geometry",
        std::string(s.spectrum_geometry == AtomGeometry::Chiral ? "chiral" : "standing_wave"));
  m.add("scatter.trajectories", s.scatter_trajectories);
  m.add("scatter.fwhm_ns", s.scatter_fwhm);
  m.add("scatter.distributed_g", std::string(s.scatter_distributed_g ? "true" : "false"));
  m.add("scatter.ideal", std::string(s.scatter_ideal ? "true" : "false"));
  m.add("scatter.second_photon_trajectories", s.scatter_second_photon);
  m.add("analyze.clicks", s.analyze_clicks);
  m.add("analyze.calibration", s.analyze_calibration);
  m.add("analyze.false_clicks", s.analyze_false_clicks);
  m.add("analyze.max_dn", s.analyze_max_dn);
  m.add("analyze.loss_trajectories", s.analyze_loss_trajectories);
  return s;
}

// Flat `key = value` text used for the stats files.
class FlatText {
 public:
  void add(const std::string& key, double v) { add(key, format_double(v)); }
  void add(const std::string& key, std::uint64_t v) { add(key, std::to_string(v)); }
  void add(const std::string& key, const std::string& v) { lines_.emplace_back(key, v); }
  void write(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& [k, v] : lines_) out << k << " = " << v << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
  }

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

ScatterOptions scatter_options(const Settings& s, unsigned jobs) {
  ScatterOptions o;
  o.trajectory.source = GaussianSource{0.0, s.scatter_fwhm};
  o.trajectory.rtol = s.experiment.rtol;
  o.trajectory.atol = s.experiment.atol;
  o.jobs = jobs;
  if (s.scatter_distributed_g && !s.scatter_ideal) o.g_distribution = s.transits.g_dist;
  return o;
}

SystemParams scatter_params(const Settings& s) {
  SystemParams p = s.params;
  if (s.scatter_ideal) {
    p.g_minus = 0.0;
    p.g_pi = 0.0;
    p.h = 0.0;
  }
  return p;
}

int cmd_spectrum(const Options& opt, const Settings& s) {
  const auto grid = linear_grid(s.spectrum_lo, s.spectrum_hi, static_cast<std::size_t>(s.spectrum_points));
  const auto empty = empty_cavity_spectrum(grid, s.params);
  const auto atom = averaged_atom_spectrum(grid, s.transits.g_dist, s.params,
                                           static_cast<std::size_t>(s.spectrum_g_samples), opt.seed,
                                           s.spectrum_geometry);
  write_spectrum_csv(fs::path(opt.out) / "empty_spectrum.csv", empty);
  write_spectrum_csv(fs::path(opt.out) / "atom_spectrum.csv", atom);
  std::cout << "T(0) empty cavity = " << format_double(empty_cavity_transmission(0.0, s.params.kappa_i,
                                                                                  s.params.kappa_ex, s.params.h))
            << '\n';
  if (!s.spectrum_fit_input.empty()) {
    const auto data = read_spectrum_csv(s.spectrum_fit_input);
    SpectrumFitOptions fo;
    fo.geometry = s.spectrum_geometry;
    const auto fit = fit_atom_spectrum(data, s.params, fo);
    write_fit_report(fs::path(opt.out) / "fit.txt", fit);
    std::cout << "fit g = " << format_double(fit.g) << " +- " << format_double(fit.g_stderr)
              << ", kappa_i = " << format_double(fit.kappa_i) << ", h = " << format_double(fit.h)
              << (fit.converged ? "" : " (not converged)") << '\n';
    if (!fit.converged) return 1;
  }
  return 0;
}

int cmd_scatter(const Options& opt, const Settings& s) {
  const auto params = scatter_params(s);
  const auto options = scatter_options(s, opt.jobs);
  const auto n = static_cast<std::uint64_t>(s.scatter_trajectories);
  FlatText stats;
  for (const auto level : {AtomLevel::GMinus, AtomLevel::GPlus}) {
    const auto table = simulate_pulse_scattering(params, level, n, opt.seed, options);
    const auto name = to_string(level);
    write_outcome_table(fs::path(opt.out) / ("outcomes_" + name + ".csv"), table);
    const double nr = table.normalized_reflection();
    stats.add(name + ".normalized_reflection", nr);
    stats.add(name + ".normalized_reflection_error", table.standard_error(nr));
    stats.add(name + ".toggle_given_reflection", table.toggle_given_reflection());
    stats.add(name + ".toggle_given_detected", table.toggle_given_detected());
    stats.add(name + ".post_toggle_loss_fraction", table.post_toggle_loss_fraction());
    std::cout << name << ": normalized reflection " << format_double(nr) << ", toggle|reflected "
              << format_double(table.toggle_given_reflection()) << ", toggle|detected "
              << format_double(table.toggle_given_detected()) << '\n';
  }
  if (s.scatter_second_photon > 0) {
    const auto sp = probe_second_photon(params, opt.seed, static_cast<std::uint64_t>(s.scatter_second_photon), options);
    stats.add("second_photon.reflected_given_first_reflected", sp.value);
    stats.add("second_photon.standard_error", sp.standard_error);
    stats.add("second_photon.first_reflected", sp.first_reflected);
  }
  stats.write(fs::path(opt.out) / "scatter.txt");
  return 0;
}

int cmd_generate(const Options& opt, const Settings& s) {
  const ExperimentRunner runner(s.experiment, opt.seed);
  const auto clicks_path = fs::path(opt.out) / "clicks.txt";
  const auto truth_path = truth_path_for(clicks_path);
  std::ofstream clicks(clicks_path), truth(truth_path);
  if (!clicks || !truth) throw std::runtime_error("cannot write into " + opt.out);
  clicks << "# clicks v1\n";
  const std::uint64_t block = 1000;
  std::uint64_t n_clicks = 0;
  for (std::uint64_t first = 0; first < s.experiment.n_cycles; first += block) {
    const auto out = runner.run(first, std::min(block, s.experiment.n_cycles - first), opt.jobs);
    for (const auto& c : out.clicks) clicks << c.cycle_id << '\t' << c.detector_id << '\t' << c.timestamp_ps << '\n';
    write_truth(truth, out.truth, first == 0);
    n_clicks += out.clicks.size();
  }
  if (s.experiment.n_cycles == 0) write_truth(truth, {}, true);
  if (!clicks || !truth) throw std::runtime_error("failed writing into " + opt.out);
  std::cout << "wrote " << n_clicks << " clicks over " << s.experiment.n_cycles << " cycles to " << clicks_path.string()
            << " (" << runner.trajectories_simulated() << " trajectories)\n";
  return 0;
}

int cmd_calibrate(const Options& opt, const Settings& s) {
  const auto clicks = run_calibration(s.calibration, s.detectors, opt.seed, opt.jobs);
  write_clicks(fs::path(opt.out) / "calibration_clicks.txt", clicks);
  const auto cal = afterpulse_calibrate(clicks, s.calibration, target_window_after_control(s.chain));
  write_calibration(fs::path(opt.out) / "afterpulse_calibration.txt", cal);
  const auto left = cal.port_probability(s.detectors.port, Direction::Leftward);
  const auto right = cal.port_probability(s.detectors.port, Direction::Rightward);
  std::cout << "afterpulse probability in the target window: left " << format_double(left) << ", right "
            << format_double(right) << '\n';
  return 0;
}

struct EventScan {
  std::vector<AtomEvent> events;
  std::uint64_t cycles = 0;
};

EventScan scan_events(const fs::path& path, const AnalysisSetup& setup, const HeraldCriterion& herald,
                      std::int64_t resolution_ps) {
  ClickStreamReader reader(path, resolution_ps);
  EventScan scan;
  std::vector<ClickRecord> block;
  while (reader.next_block(block, 1u << 20)) {
    auto events = detect_atoms(block, setup, herald);
    scan.events.insert(scan.events.end(), events.begin(), events.end());
    block.clear();
  }
  scan.cycles = reader.last_cycle() ? *reader.last_cycle() + 1 : 0;
  return scan;
}

void report_line(std::ostream& os, const std::string& what, const std::string& value, const std::string& reference,
                 const std::string& target) {
  os << std::left << std::setw(40) << what << std::setw(22) << value << std::setw(12) << reference << target << '\n';
}

std::string with_error(double v, double e) { return format_double(v) + " +- " + format_double(e); }

int cmd_analyze(const Options& opt, const Settings& s) {
  const auto setup = AnalysisSetup::from(s.chain, s.detectors);
  const fs::path clicks = s.analyze_clicks.empty() ? fs::path(opt.out) / "clicks.txt" : fs::path(s.analyze_clicks);
  const auto scan = scan_events(clicks, setup, s.herald, s.detectors.resolution_ps);
  const auto& events = scan.events;
  write_events_csv(fs::path(opt.out) / "events.csv", events);

  std::optional<AfterpulseCalibration> cal;
  if (!s.analyze_calibration.empty()) cal = read_calibration(s.analyze_calibration);
  const auto stats = heralded_switch_stats(events, setup, cal ? &*cal : nullptr);

  FlatText flat;
  flat.add("clicks", clicks.string());
  flat.add("cycles", scan.cycles);
  flat.add("events", static_cast<std::uint64_t>(events.size()));
  flat.add("afterpulse_corrected", std::string(cal ? "true" : "false"));
  for (int k = 0; k < 2; ++k) {
    const auto prefix = std::string(k == 0 ? "reflecting" : "transmitting");
    const auto& st = stats.state[static_cast<std::size_t>(k)];
    if (!st) {
      flat.add(prefix + ".events", std::uint64_t{0});
      continue;
    }
    flat.add(prefix + ".events", st->events);
    flat.add(prefix + ".raw_reflected", st->raw_reflected);
    flat.add(prefix + ".raw_transmitted", st->raw_transmitted);
    flat.add(prefix + ".reflected", st->reflected);
    flat.add(prefix + ".transmitted", st->transmitted);
    flat.add(prefix + ".normalized_reflection", st->normalized_reflection);
    flat.add(prefix + ".normalized_error", st->normalized_error);
    flat.add(prefix + ".absolute_reflection", st->absolute_reflection);
    flat.add(prefix + ".absolute_reflection_error", st->absolute_reflection_error);
    flat.add(prefix + ".absolute_transmission", st->absolute_transmission);
    flat.add(prefix + ".clamped", std::string(st->clamped ? "true" : "false"));
  }

  const auto second = second_photon_stats(events);
  flat.add("second_photon.value", second.value);
  flat.add("second_photon.standard_error", second.standard_error);
  flat.add("second_photon.reflected", second.numerator);
  flat.add("second_photon.pairs", second.denominator);

  const int max_dn = static_cast<int>(s.analyze_max_dn);
  const auto ab = antibunching(events, setup, max_dn);
  const auto shuffled = shuffled_antibunching(events, setup, max_dn, opt.seed);
  write_correlation_csv(fs::path(opt.out) / "correlation.csv", ab);
  write_correlation_csv(fs::path(opt.out) / "correlation_shuffled.csv", shuffled);
  flat.add("antibunching.events", ab.events);
  flat.add("antibunching.peak", ab.peak);
  flat.add("antibunching.off_peak_mean", ab.off_peak_mean);
  flat.add("antibunching.off_peak_sigma", ab.off_peak_sigma);
  flat.add("antibunching.suppression", ab.suppression);
  flat.add("antibunching.shuffled_peak", shuffled.peak);
  flat.add("antibunching.shuffled_off_peak_mean", shuffled.off_peak_mean);
  flat.add("antibunching.shuffled_off_peak_sigma", shuffled.off_peak_sigma);

  // Share of lost photons that are lost after the toggle, from the same
  // trajectory ensemble as the scatter outcome tables.
  const auto so = scatter_options(s, opt.jobs);
  const auto loss_table = simulate_pulse_scattering(
      scatter_params(s), AtomLevel::GMinus, static_cast<std::uint64_t>(s.analyze_loss_trajectories), opt.seed, so);
  const double loss_fraction = loss_table.post_toggle_loss_fraction();
  flat.add("post_toggle_loss_fraction", loss_fraction);
  std::optional<PhotonsPerSwitch> pps;
  if (stats.reflecting() && stats.reflecting()->normalized_reflection > 0 && stats.reflecting()->absolute_reflection > 0) {
    pps = photons_per_switch(stats.reflecting()->normalized_reflection, stats.reflecting()->absolute_reflection,
                             loss_fraction);
    flat.add("photons_per_switch.normalized", pps->normalized);
    flat.add("photons_per_switch.absolute", pps->absolute);
    flat.add("photons_per_switch.corrected", pps->corrected);
  }

  std::optional<double> false_ratio;
  if (!s.analyze_false_clicks.empty()) {
    const auto none = scan_events(s.analyze_false_clicks, setup, s.herald, s.detectors.resolution_ps);
    const double seqs = static_cast<double>(setup.chain.sequences());
    const double rate_none = none.cycles ? static_cast<double>(none.events.size()) / (none.cycles * seqs) : 0.0;
    const double rate_atoms = scan.cycles ? static_cast<double>(events.size()) / (scan.cycles * seqs) : 0.0;
    flat.add("false_detection.events", static_cast<std::uint64_t>(none.events.size()));
    flat.add("false_detection.per_sequence", rate_none);
    if (rate_atoms > 0) {
      false_ratio = rate_none / rate_atoms;
      flat.add("false_detection.ratio", *false_ratio);
    }
  }
  flat.write(fs::path(opt.out) / "stats.txt");

  if (opt.report) {
    auto& os = std::cout;
    os << "heralded atom events: " << events.size() << " in " << scan.cycles << " cycles\n\n";
    report_line(os, "quantity", "simulated", "reference", "target");
    auto state = [&](int k, const std::string& name, const std::string& reference, const std::string& target) {
      const auto& st = stats.state[static_cast<std::size_t>(k)];
      report_line(os, name, st ? with_error(st->normalized_reflection, st->normalized_error) : "n/a", reference, target);
    };
    state(0, "reflecting state, normalized R", "0.648", "[0.60, 0.72]");
    state(1, "transmitting state, normalized R", "0.101", "[0.06, 0.14]");
    if (stats.reflecting())
      report_line(os, "reflecting state, absolute R",
                  with_error(stats.reflecting()->absolute_reflection, stats.reflecting()->absolute_reflection_error),
                  "0.317", "");
    report_line(os, "second photon reflected", with_error(second.value, second.standard_error), "0.044",
                "[0.02, 0.08]");
    report_line(os, "antibunching suppression", format_double(ab.suppression), "~20", ">= 10");
    report_line(os, "shuffled peak / off-peak",
                format_double(shuffled.peak) + " / " + format_double(shuffled.off_peak_mean), "", "within 2 sigma");
    if (pps) {
      report_line(os, "photons per switch, normalized", format_double(pps->normalized), "1.54", "");
      report_line(os, "photons per switch, absolute", format_double(pps->absolute), "3.2", "");
      report_line(os, "photons per switch, loss-corrected", format_double(pps->corrected), "~2.5", "2.5 +- 0.3");
    }
    report_line(os, "false detections / heralds", false_ratio ? format_double(*false_ratio) : "n/a", "0.015", "");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-atom single-photon switch simulator"};
  app.require_subcommand(1, 1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "key = value parameter file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "base seed");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--report", opt.report, "print the headline comparison table (analyze)");
  };
  for (const char* name : {"spectrum", "scatter", "generate", "analyze", "calibrate"}) {
    static const std::map<std::string, std::string> help{
        {"spectrum", "empty-cavity and g-averaged atom spectra, optional fit"},
        {"scatter", "single-photon outcome tables for both switch states"},
        {"generate", "simulate cycles and write clicks.txt with a .truth sidecar"},
        {"analyze", "herald atoms and compute the switch statistics"},
        {"calibrate", "afterpulse calibration stream and fitted probabilities"}};
    add_common(app.add_subcommand(name, help.at(name)));
  }
  CLI11_PARSE(app, argc, argv);
  opt.command = app.get_subcommands().front()->get_name();

  try {
    const auto settings = resolve(opt);
    fs::create_directories(opt.out);
    settings.manifest.write(fs::path(opt.out) / ("manifest_" + opt.command + ".txt"));
    if (opt.command == "spectrum") return cmd_spectrum(opt, settings);
    if (opt.command == "scatter") return cmd_scatter(opt, settings);
    if (opt.command == "generate") return cmd_generate(opt, settings);
    if (opt.command == "analyze") return cmd_analyze(opt, settings);
    return cmd_calibrate(opt, settings);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
