#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <variant>
#include <vector>

#include "psw/hilbert.hpp"
#include "psw/model.hpp"

namespace psw {

// Sums operator terms into a dense matrix, scaling the source-dependent
// terms by the given angular source rate kappa_s (rad/ns).
Eigen::MatrixXcd assemble(const std::vector<OperatorTerm>& terms, Index dimension, double kappa_s);

// Effective Hamiltonian in rad/ns at the constant source rate params.kappa_s.
Eigen::MatrixXcd build_effective_hamiltonian(const SystemParams& params, const HilbertSpace& space,
                                             Direction drive = Direction::Rightward);
Eigen::MatrixXcd build_jump_operator(const SystemParams& params, const HilbertSpace& space, JumpChannel channel,
                                     Direction drive = Direction::Rightward);

struct QuantumState {
  Eigen::VectorXcd amplitudes;
  double time = 0.0;  // ns

  double norm_squared() const { return amplitudes.squaredNorm(); }
};

// |atom> (x) |0_a, 0_b, n_s>.
QuantumState fock_input_state(const HilbertSpace& space, AtomLevel atom, int n_photons);

// Source mode emptying at the constant rate params.kappa_s from start_ns on
// (exponentially decaying input pulse).
struct ExponentialSource {
  double start_ns = 0.0;
};

// Source mode whose emission rate is shaped so the emitted photon flux is a
// Gaussian of the given FWHM centered at center_ns.
struct GaussianSource {
  double center_ns = 0.0;
  double fwhm_ns = 50.0;
};

using SourceShape = std::variant<ExponentialSource, GaussianSource>;

// Angular source amplitude-decay rate kappa_s(t) in rad/ns.
double source_rate(const SourceShape& shape, double kappa_s_mhz, double t_ns);
// Time at which integration starts.
double source_start_time(const SourceShape& shape);
// Largest integrator step that cannot skip over the pulse.
double source_max_step(const SourceShape& shape, double kappa_s_mhz);

struct TrajectoryOptions {
  SourceShape source = ExponentialSource{};
  double rtol = 1e-8;
  double atol = 1e-12;
  double jump_time_tol_ns = 1e-3;
  // Number of random times at which the channel-completeness identity is
  // checked (0 disables).
  int completeness_checks = 0;
  double max_duration_ns = 1e6;
};

struct JumpEvent {
  double time_ns = 0.0;
  JumpChannel channel = JumpChannel::Transmit;
  friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

struct TrajectoryRecord {
  std::vector<JumpEvent> jumps;
  AtomLevel initial_atom = AtomLevel::GMinus;
  AtomLevel final_atom = AtomLevel::GMinus;
  std::uint64_t seed = 0;
  // Largest relative mismatch between sum_k ||C_k psi||^2 and -d||psi||^2/dt
  // seen at the completeness checks.
  double completeness_error = 0.0;
};

// Thrown when the integrator reports a norm increase or a runaway trajectory.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// First-jump statistics from direct integration of the no-jump evolution:
// probability[k][l] is the probability that the first jump goes through
// channel k and leaves the atom in level l.
struct FirstJumpDistribution {
  std::array<std::array<double, kAtomLevels>, kJumpChannels> probability{};
  double residual_norm = 0.0;  // no-jump population left at the end

  double channel(JumpChannel k) const;
  double total() const;
};

// The scattering problem compiled into excitation-number manifolds. The
// effective Hamiltonian conserves N = n_a + n_b + n_s + [excited] and every
// jump lowers N by one, so each manifold is integrated on its own.
class ScatteringModel {
 public:
  ScatteringModel(const SystemParams& params, const HilbertSpace& space = {},
                  Direction drive = Direction::Rightward);

  const SystemParams& params() const { return params_; }
  const HilbertSpace& space() const { return space_; }
  Direction drive() const { return drive_; }

  // Monte Carlo wavefunction trajectory for a Fock-n source pulse. Runs until
  // every excitation has left through a jump. Deterministic given the seed.
  TrajectoryRecord run(AtomLevel initial_atom, int n_photons, std::uint64_t seed,
                       const TrajectoryOptions& options = {}) const;

  FirstJumpDistribution first_jump(AtomLevel initial_atom, int n_photons,
                                   const TrajectoryOptions& options = {}) const;

 private:
  using SparseOp = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
  struct Manifold {
    std::vector<Index> basis;  // global basis indices
    SparseOp drift_fixed;      // -i H_fixed
    SparseOp drift_cascade;    // -i H_cascade, scaled by sqrt(kappa_s)
    Eigen::VectorXcd drift_source;  // diagonal of -i H_source, scaled by kappa_s
    std::array<SparseOp, kJumpChannels> jump_fixed;   // into manifold N-1
    std::array<SparseOp, kJumpChannels> jump_source;  // scaled by sqrt(kappa_s)
  };

  void check_request(AtomLevel initial_atom, int n_photons) const;
  Eigen::VectorXcd initial_vector(AtomLevel initial_atom, int n_photons) const;
  void derivative(const Manifold& m, double kappa_s, const Complex* psi, Complex* dpsi) const;
  Eigen::VectorXcd apply_jump(const Manifold& m, int channel, double kappa_s,
                              const Eigen::Ref<const Eigen::VectorXcd>& psi) const;
  AtomLevel atom_of(int manifold, Index local) const;

  SystemParams params_;
  HilbertSpace space_;
  Direction drive_;
  std::vector<Manifold> manifolds_;
};

TrajectoryRecord run_trajectory(const SystemParams& params, const HilbertSpace& space, AtomLevel initial_atom,
                                int n_source_photons, std::uint64_t seed, const TrajectoryOptions& options = {},
                                Direction drive = Direction::Rightward);

// Debug dump: one `t_ns channel` line per jump.
void write_trajectory(std::ostream& out, const TrajectoryRecord& record);

}  // namespace psw
