#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psw/experiment.hpp"

namespace psw {

// Atom herald: a reflected click in the control pulse and in each required
// confirmation pulse after the target, with at least `min_reflected_photons`
// counted reflected clicks, those included, inside a rolling window shorter
// than `window_ns`. Counted clicks are reflected-port clicks inside
// detection-pulse gates, except the pulse directly after the target.
struct HeraldCriterion {
  int min_reflected_photons = 3;
  double window_ns = 400.0;
  int confirmations = 2;  // 1 or 2 confirmation pulses
  bool require_control = true;

  void validate() const;
};

// Everything the analysis needs to know about the measurement setup.
struct AnalysisSetup {
  PulseChain chain;
  std::vector<Direction> port;  // output port per detector id
  double target_photons = 0.24;
  double path_transmission = 0.52;

  static AnalysisSetup from(const ChainConfig& chain, const DetectorParams& detectors);
};

struct AtomEvent {
  std::uint64_t cycle_id = 0;
  int sequence = 0;
  SequenceKind sequence_kind = SequenceKind::A;
  std::int64_t herald_time_ps = 0;
  Direction control_dir = Direction::Leftward;
  // Control-gate clicks per detector.
  std::array<int, 5> control_clicks{};
  // Port of the earliest target-gate click, if any.
  std::optional<Direction> first_target_port;
  // Control-gate clicks in time order as (port is reflected) flags.
  std::vector<bool> control_sequence;
};

// Input must be sorted per cycle (file invariant). Events come out in
// (cycle, sequence) order.
std::vector<AtomEvent> detect_atoms(std::span<const ClickRecord> clicks, const AnalysisSetup& setup,
                                    const HeraldCriterion& criterion = {});

// Per-detector probability that a click is followed by a false click inside
// the target gate, and the delay histogram it was derived from.
struct AfterpulseCalibration {
  std::array<double, 5> window_prob{};
  std::array<double, 5> window_prob_error{};
  std::array<std::uint64_t, 5> pulse_clicks{};
  double bin_ns = 5.0;
  std::array<std::vector<std::uint64_t>, 5> histogram;  // post-pulse delay from the pulse start

  // Pooled probability over the detectors of one output port.
  double port_probability(const std::vector<Direction>& port, Direction which) const;
};

AfterpulseCalibration afterpulse_calibrate(std::span<const ClickRecord> clicks, const CalibrationConfig& config,
                                           const DelayWindow& window, double histogram_span_ns = 2000.0);
void write_calibration(const std::filesystem::path& path, const AfterpulseCalibration& cal);
AfterpulseCalibration read_calibration(const std::filesystem::path& path);

struct CorrectedCount {
  double value = 0.0;
  bool clamped = false;  // the expected false count exceeded the raw count
};

// raw - sum_d prob[d] * control_clicks[d], clamped at zero.
CorrectedCount subtract_afterpulses(double raw, std::span<const double> prob, std::span<const double> control_clicks);

struct StateStats {
  std::uint64_t events = 0;
  std::uint64_t raw_reflected = 0;
  std::uint64_t raw_transmitted = 0;
  double reflected = 0.0;  // afterpulse-corrected first-photon counts
  double transmitted = 0.0;
  double normalized_reflection = 0.0;
  double normalized_transmission = 0.0;
  double normalized_error = 0.0;
  double absolute_reflection = 0.0;
  double absolute_transmission = 0.0;
  double absolute_reflection_error = 0.0;
  double absolute_transmission_error = 0.0;
  bool clamped = false;
};

// Indexed by sequence kind: A holds the reflecting state, B the transmitting
// state. A state with no events, or no target clicks, is absent.
struct HeraldedStats {
  std::array<std::optional<StateStats>, 2> state;
  const std::optional<StateStats>& reflecting() const { return state[0]; }
  const std::optional<StateStats>& transmitting() const { return state[1]; }
};

HeraldedStats heralded_switch_stats(std::span<const AtomEvent> events, const AnalysisSetup& setup,
                                    const AfterpulseCalibration* calibration = nullptr);

struct RatioEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 0;
};

// Among events whose first control click was reflected and that have a
// second control click: fraction of second clicks that were reflected.
RatioEstimate second_photon_stats(std::span<const AtomEvent> events);

struct AntibunchingResult {
  std::vector<int> dn;
  std::vector<double> coincidences;
  std::uint64_t events = 0;
  double peak = 0.0;           // C(0) per event
  double off_peak_mean = 0.0;  // mean of C(dn != 0) per event pair
  double off_peak_sigma = 0.0;
  double suppression = 0.0;    // off_peak_mean / peak, infinity when C(0) = 0
};

// Correlates control-gate clicks on the three detectors of the reflected port
// across atom events: C(dn) = sum_i D1(i)D2(i-dn) + D2(i)D3(i-dn) + D1(i)D3(i-dn).
// Uses events whose control reflects into a port with at least three
// detectors. Throws ConfigError if no port has three detectors.
AntibunchingResult antibunching(std::span<const AtomEvent> events, const AnalysisSetup& setup, int max_dn = 10);
// Same correlation with each detector series permuted independently, which
// removes any same-event correlation.
AntibunchingResult shuffled_antibunching(std::span<const AtomEvent> events, const AnalysisSetup& setup, int max_dn,
                                         std::uint64_t seed);

struct PhotonsPerSwitch {
  double normalized = 0.0;
  double absolute = 0.0;
  double corrected = 0.0;
};

// corrected = absolute - f * (absolute - normalized): the photons lost after
// the toggle already happened are not charged to the switching event.
PhotonsPerSwitch photons_per_switch(double normalized_reflection, double absolute_reflection,
                                    double loss_timing_fraction);

struct FalseDetection {
  std::uint64_t events = 0;
  std::uint64_t sequences = 0;
  double ratio = 0.0;
};
FalseDetection false_detection(std::span<const ClickRecord> clicks, std::uint64_t n_cycles, const AnalysisSetup& setup,
                               const HeraldCriterion& criterion = {});

void write_events_csv(const std::filesystem::path& path, std::span<const AtomEvent> events);
void write_correlation_csv(const std::filesystem::path& path, const AntibunchingResult& result);

}  // namespace psw
