#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "psw/dynamics.hpp"

namespace psw {

enum class Outcome : int { Reflection = 0, Transmission = 1, Loss = 2 };
// Dark: the atom ended in m_F = 0, which neither reflects nor transmits
// selectively. Folded into Toggle for the six-cell view.
enum class ToggleClass : int { Toggle = 0, NoToggle = 1, Dark = 2 };

std::string to_string(Outcome o);
std::string to_string(ToggleClass t);
Outcome parse_outcome(const std::string& text);
ToggleClass parse_toggle_class(const std::string& text);

Outcome classify_outcome(JumpChannel channel);
ToggleClass classify_toggle(AtomLevel initial, AtomLevel final_level);

struct OutcomeTable {
  std::array<std::array<std::uint64_t, 3>, 3> counts{};  // [Outcome][ToggleClass]
  std::uint64_t n_trajectories = 0;

  void add(Outcome o, ToggleClass t, std::uint64_t n = 1);
  OutcomeTable& operator+=(const OutcomeTable& other);

  std::uint64_t count(Outcome o, ToggleClass t) const {
    return counts[static_cast<int>(o)][static_cast<int>(t)];
  }
  double probability(Outcome o, ToggleClass t) const;
  // Six-cell probability with Dark counted as a toggle.
  double folded_probability(Outcome o, bool toggle) const;
  double probability(Outcome o) const;

  // R / (R + T): reflection among photons that left through the fiber.
  double normalized_reflection() const;
  // P(toggle | reflected), Dark folded into toggle.
  double toggle_given_reflection() const;
  // P(toggle | photon left through the fiber). For an atom starting in the
  // transmitting state this is the unwanted-toggle probability.
  double toggle_given_detected() const;
  // Fraction of lost photons whose loss coincided with or followed a toggle.
  double post_toggle_loss_fraction() const;
  // Binomial standard error of a probability estimate from this table.
  double standard_error(double p) const;

  friend bool operator==(const OutcomeTable&, const OutcomeTable&) = default;
};

OutcomeTable tally(const TrajectoryRecord& record);

// CSV rows `outcome,toggle,count,probability`, nine rows including Dark.
void write_outcome_table(const std::filesystem::path& path, const OutcomeTable& table);
OutcomeTable read_outcome_table(const std::filesystem::path& path);

struct ScatterOptions {
  HilbertSpace space{};
  Direction drive = Direction::Rightward;
  TrajectoryOptions trajectory{};
  unsigned jobs = 1;
  // When set, each trajectory draws its own g (parasitics rescaled with it).
  std::optional<GDistribution> g_distribution;
};

// Single-photon ensemble: n_traj trajectories, trajectory i seeded by
// child_seed(seed, stream, i). Independent of the number of jobs.
OutcomeTable simulate_pulse_scattering(const SystemParams& params, AtomLevel initial_atom, std::uint64_t n_traj,
                                       std::uint64_t seed, const ScatterOptions& options = {});

struct SecondPhotonEstimate {
  double value = 0.0;   // P(second jump = Reflect | first jump = Reflect)
  double standard_error = 0.0;
  std::uint64_t first_reflected = 0;
  std::uint64_t second_reflected = 0;
  std::uint64_t n_trajectories = 0;
};

// Two-photon source pulse on an atom in G_MINUS.
SecondPhotonEstimate probe_second_photon(const SystemParams& params, std::uint64_t seed, std::uint64_t n_traj,
                                         const ScatterOptions& options = {});

// Exact single-photon outcome probabilities from the first-jump integrals,
// expressed as an OutcomeTable-like set of probabilities.
struct OutcomeProbabilities {
  std::array<std::array<double, 3>, 3> p{};  // [Outcome][ToggleClass]
  double residual = 0.0;

  double probability(Outcome o) const;
  double normalized_reflection() const;
  double toggle_given_reflection() const;
  double toggle_given_detected() const;
};

OutcomeProbabilities exact_single_photon_outcomes(const SystemParams& params, AtomLevel initial_atom,
                                                  const HilbertSpace& space = {},
                                                  Direction drive = Direction::Rightward,
                                                  const TrajectoryOptions& options = {});

}  // namespace psw
