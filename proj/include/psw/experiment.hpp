#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "psw/config.hpp"
#include "psw/dynamics.hpp"
#include "psw/model.hpp"

namespace psw {

enum class PulseKind : int { Detection = 0, Target = 1 };
// Position of a pulse inside its sequence. Prepare is the detection pulse
// that readies the atom for the control; Reset follows the target and is
// excluded from heralding; Confirm1/Confirm2 are the post-target confirmations.
enum class PulseRole : int { Prepare = 0, Control, Target, Reset, Confirm1, Confirm2 };
// A: control sets the reflecting state for the target. B: transmitting state.
enum class SequenceKind : int { A = 0, B = 1 };

std::string to_string(PulseKind k);
std::string to_string(PulseRole r);
std::string to_string(SequenceKind k);
SequenceKind parse_sequence_kind(const std::string& text);

struct PulseSpec {
  PulseKind kind = PulseKind::Detection;
  Direction direction = Direction::Rightward;
  double fwhm = 15.0;          // ns
  double mean_photons = 2.5;
  double start = 0.0;          // ns; the pulse occupies [start, start + 2 fwhm]
  PulseRole role = PulseRole::Prepare;
  int sequence = 0;
  SequenceKind sequence_kind = SequenceKind::A;

  double center() const { return start + fwhm; }
  double end() const { return start + 2.0 * fwhm; }
};

struct ChainConfig {
  int sequences = 240;
  double lead_ns = 100.0;  // idle time before the first pulse of a cycle
  double tail_ns = 1000.0;  // idle time after the last pulse of a cycle
  double detection_fwhm = 15.0;
  double detection_photons = 2.5;
  double target_fwhm = 50.0;
  double target_photons = 0.24;
  double pulse_gap_ns = 10.0;  // between consecutive pulses of a sequence
  // Between the prepare pulse and the control. Photons scattered by the atom
  // trail the pulse by tens of ns and would otherwise land in the control
  // gate on its reflected port.
  double control_gap_ns = 50.0;
  double post_control_wait_ns = 125.0;
  double sequence_gap_ns = 20.0;
  // Detection gates extend each pulse slot by this margin on both sides.
  double gate_margin_ns = 5.0;
};

struct PulseChain {
  std::vector<PulseSpec> pulses;  // sorted by start
  double duration_ns = 0.0;       // cycle length including lead and tail
  double gate_margin_ns = 5.0;
  int pulses_per_sequence = 6;

  // Index of the pulse whose gate contains t, if any.
  std::optional<std::size_t> pulse_at(double t_ns) const;
  double gate_begin(std::size_t i) const { return pulses[i].start - gate_margin_ns; }
  double gate_end(std::size_t i) const { return pulses[i].end() + gate_margin_ns; }
  std::size_t index_of(int sequence, PulseRole role) const {
    return static_cast<std::size_t>(sequence * pulses_per_sequence + static_cast<int>(role));
  }
  int sequences() const { return static_cast<int>(pulses.size()) / pulses_per_sequence; }
};

// Sequences alternate A, B, A, ...; within a sequence the detection pulses
// alternate in direction. Throws ConfigError if pulses or gates overlap.
PulseChain build_pulse_chain(const ChainConfig& config);

struct TransitModel {
  double arrival_rate = 1.0e6;        // transits per second
  double mean_duration_ns = 380.0;    // exponential duration distribution
  GDistribution g_dist = GDistribution::experiment();
  double inert_fraction = 1.0 / 3.0;  // transits starting in G_ZERO
  // When > 0, each transit draws g from this many equal-probability quantile
  // levels of g_dist instead of the continuous distribution. Required by the
  // trajectory library.
  int g_levels = 16;
};

// Midpoint quantiles of g_dist (truncated at g >= 0), one per level.
std::vector<double> g_quantile_levels(const GDistribution& dist, int levels);

struct Transit {
  double start = 0.0;     // ns
  double duration = 0.0;  // ns
  double g = 0.0;         // MHz
  int g_level = -1;       // quantile level of g, -1 when drawn continuously
  AtomLevel initial_atom = AtomLevel::GMinus;

  double end() const { return start + duration; }
  bool covers(double t) const { return t >= start && t < end(); }
};

// Poisson arrivals over [0, window). Deterministic given the seed.
std::vector<Transit> sample_transits(const TransitModel& model, double window_ns, std::uint64_t seed);

struct AfterpulseModel {
  // Probability that a click is followed by an afterpulse in the target
  // window of the chain (the calibrated quantity), per output port.
  // Indexed by Direction: {rightward port, leftward port}.
  std::array<double, 2> target_window_prob{8.1e-4, 5.3e-4};
  double dead_time_ns = 25.0;   // minimum afterpulse delay
  double fast_fraction = 0.5;   // share of afterpulses in the fast component
  double fast_tau_ns = 10.0;
  double slow_tau_ns = 400.0;

  // Probability that an afterpulse delay lands in [lo, hi).
  double delay_fraction(double lo_ns, double hi_ns) const;
};

struct DetectorParams {
  double path_transmission = 0.52;
  std::int64_t resolution_ps = 100;
  // Output port (propagation direction of the detected light) per detector.
  std::vector<Direction> port{Direction::Leftward, Direction::Leftward, Direction::Leftward,
                              Direction::Rightward, Direction::Rightward};
  AfterpulseModel afterpulse{};
  bool afterpulsing = true;
  double dark_rate = 100.0;  // counts per second per detector

  std::vector<int> detectors_on(Direction port_dir) const;
  void validate() const;
};

struct ClickRecord {
  std::uint64_t cycle_id = 0;
  int detector_id = 0;
  std::int64_t timestamp_ps = 0;

  friend bool operator==(const ClickRecord&, const ClickRecord&) = default;
  friend bool operator<(const ClickRecord& a, const ClickRecord& b) {
    if (a.cycle_id != b.cycle_id) return a.cycle_id < b.cycle_id;
    if (a.timestamp_ps != b.timestamp_ps) return a.timestamp_ps < b.timestamp_ps;
    return a.detector_id < b.detector_id;
  }
};

// Ground truth of one pulse. Recorded for every pulse that met an atom and
// for every target pulse; transit_index is -1 for the empty cavity.
struct PulseTruth {
  std::uint64_t cycle_id = 0;
  int pulse_index = 0;
  int transit_index = -1;
  AtomLevel atom_before = AtomLevel::GMinus;
  AtomLevel atom_after = AtomLevel::GMinus;
  int photons = 0;
  int reflected = 0;
  int transmitted = 0;
  int lost = 0;
  // Photon outcomes in time order: R/T reached a detector, r/t were lost on
  // the path to the detectors, L was lost in the resonator.
  std::string outcomes;
  friend bool operator==(const PulseTruth&, const PulseTruth&) = default;
};

struct TransitTruth {
  std::uint64_t cycle_id = 0;
  Transit transit;
};

struct GroundTruth {
  std::vector<TransitTruth> transits;
  std::vector<PulseTruth> pulses;
};

// Infinite: every sequence holds an atom (G_MINUS or G_PLUS, fresh g) for its
// whole duration, so no herald is diluted by the atom leaving.
enum class TransitMode { Sampled, None, Infinite };
std::string to_string(TransitMode m);
TransitMode parse_transit_mode(const std::string& text);

struct ExperimentConfig {
  SystemParams params = SystemParams::experiment();
  ChainConfig chain{};
  TransitModel transits{};
  TransitMode transit_mode = TransitMode::Sampled;
  DetectorParams detectors{};
  std::uint64_t n_cycles = 1000;
  double rtol = 1e-6;
  double atol = 1e-9;
  // Trajectories per (g level, atom level, photon number, pulse width) cell.
  // Pulses meeting an atom draw one of them at random; each is simulated on
  // first use and reused afterwards. 0 simulates a fresh trajectory for
  // every pulse.
  int library_size = 512;
};

struct ExperimentOutput {
  std::vector<ClickRecord> clicks;  // cycle order, sorted within each cycle
  GroundTruth truth;
};

// Runs cycles of one experiment in blocks; cycle i depends only on (config,
// seed, i), so blocks can be streamed and the result is independent of jobs.
class ExperimentRunner {
 public:
  ExperimentRunner(const ExperimentConfig& config, std::uint64_t seed);
  ~ExperimentRunner();
  ExperimentRunner(const ExperimentRunner&) = delete;
  ExperimentRunner& operator=(const ExperimentRunner&) = delete;

  ExperimentOutput run(std::uint64_t first_cycle, std::uint64_t n_cycles, unsigned jobs = 1) const;
  const PulseChain& chain() const;
  // Distinct trajectories simulated so far.
  std::uint64_t trajectories_simulated() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

ExperimentOutput run_experiment(const ExperimentConfig& config, std::uint64_t seed, unsigned jobs = 1);

// Calibration stream: per cycle one detection pulse sent straight onto each
// detector, no cavity and no target.
struct CalibrationConfig {
  std::uint64_t n_pulses = 1000000;
  double pulse_fwhm = 15.0;
  double mean_clicks = 2.5 * 0.52;
  double pulse_start_ns = 100.0;
  double cycle_ns = 5000.0;
};

std::vector<ClickRecord> run_calibration(const CalibrationConfig& config, const DetectorParams& detectors,
                                         std::uint64_t seed, unsigned jobs = 1);

// Target gate position relative to the start of the control pulse, taken
// from the chain layout; used by both afterpulse injection and calibration.
struct DelayWindow {
  double lo = 0.0;
  double hi = 0.0;
};
DelayWindow target_window_after_control(const ChainConfig& chain);

// Click file: `# clicks v1` header, then `cycle_id<TAB>detector_id<TAB>timestamp_ps`.
void write_clicks(std::ostream& out, const std::vector<ClickRecord>& clicks);
void write_clicks(const std::filesystem::path& path, const std::vector<ClickRecord>& clicks);
std::vector<ClickRecord> read_clicks(std::istream& in, const std::string& source = "<stream>",
                                     std::int64_t resolution_ps = 100);
std::vector<ClickRecord> read_clicks(const std::filesystem::path& path, std::int64_t resolution_ps = 100);

// Reads a click file one cycle at a time, validating as read_clicks does and
// additionally that cycles arrive in increasing order.
class ClickStreamReader {
 public:
  explicit ClickStreamReader(const std::filesystem::path& path, std::int64_t resolution_ps = 100);
  ~ClickStreamReader();
  ClickStreamReader(const ClickStreamReader&) = delete;
  ClickStreamReader& operator=(const ClickStreamReader&) = delete;

  // Replaces `out` with the clicks of the next cycle; false at end of file.
  bool next_cycle(std::vector<ClickRecord>& out);
  // Appends whole cycles until at least `min_records` were added or the file
  // ends; false if nothing was added.
  bool next_block(std::vector<ClickRecord>& out, std::size_t min_records);
  // Largest cycle id seen so far.
  std::optional<std::uint64_t> last_cycle() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

void write_truth(const std::filesystem::path& path, const GroundTruth& truth);
// Streaming form: the header is written when `header` is set.
void write_truth(std::ostream& out, const GroundTruth& truth, bool header);
GroundTruth read_truth(const std::filesystem::path& path);
// `clicks.txt` -> `clicks.truth`
std::filesystem::path truth_path_for(const std::filesystem::path& clicks_path);

// Config readers. Keys are listed in the README.
ChainConfig chain_config_from(KeyValueConfig& cfg);
TransitModel transit_model_from(KeyValueConfig& cfg);
// Requires detector.N.port for N = 0..4 (no default mapping).
DetectorParams detector_params_from(KeyValueConfig& cfg);
CalibrationConfig calibration_config_from(KeyValueConfig& cfg, const ChainConfig& chain);
void add_to_manifest(Manifest& m, const ChainConfig& c);
void add_to_manifest(Manifest& m, const TransitModel& t);
void add_to_manifest(Manifest& m, const DetectorParams& d);

}  // namespace psw
