#pragma once

#include <Eigen/Core>
#include <array>
#include <complex>
#include <string>
#include <vector>

#include "psw/model.hpp"

namespace psw {

using Complex = std::complex<double>;
using Index = Eigen::Index;

struct BasisState {
  AtomLevel atom = AtomLevel::GMinus;
  int n_a = 0;  // photons in the forward (sigma+) cavity mode
  int n_b = 0;  // photons in the backward (sigma-) cavity mode
  int n_s = 0;  // photons left in the source mode

  // Excitation number conserved by the effective Hamiltonian.
  int excitations() const { return n_a + n_b + n_s + (atom == AtomLevel::Excited ? 1 : 0); }
  friend bool operator==(const BasisState&, const BasisState&) = default;
};

// atom (x) forward mode (x) backward mode (x) source mode, with Fock cutoffs.
// The basis index is lexicographic in (atom, n_a, n_b, n_s), atom slowest.
struct HilbertSpace {
  int fock_cut_a = 2;
  int fock_cut_b = 2;
  int fock_cut_s = 2;

  static constexpr Index kMaxDimension = 20000;

  Index dimension() const {
    return Index(kAtomLevels) * (fock_cut_a + 1) * (fock_cut_b + 1) * (fock_cut_s + 1);
  }
  Index index(const BasisState& s) const {
    return ((Index(static_cast<int>(s.atom)) * (fock_cut_a + 1) + s.n_a) * (fock_cut_b + 1) + s.n_b) *
               (fock_cut_s + 1) +
           s.n_s;
  }
  BasisState state(Index i) const {
    BasisState s;
    s.n_s = static_cast<int>(i % (fock_cut_s + 1));
    i /= (fock_cut_s + 1);
    s.n_b = static_cast<int>(i % (fock_cut_b + 1));
    i /= (fock_cut_b + 1);
    s.n_a = static_cast<int>(i % (fock_cut_a + 1));
    i /= (fock_cut_a + 1);
    s.atom = static_cast<AtomLevel>(i);
    return s;
  }
  bool contains(const BasisState& s) const {
    return s.n_a >= 0 && s.n_a <= fock_cut_a && s.n_b >= 0 && s.n_b <= fock_cut_b && s.n_s >= 0 &&
           s.n_s <= fock_cut_s;
  }
  // Throws InvalidParameter for negative cutoffs or an oversized space.
  void validate() const;
};

// Output and loss channels of the scattering problem. Transmit and Reflect
// are the two fiber outputs relative to the drive direction.
enum class JumpChannel : int {
  Transmit = 0,
  Reflect,
  CavLossA,
  CavLossB,
  AtomEmitMinus,
  AtomEmitZero,
  AtomEmitPlus,
};
inline constexpr int kJumpChannels = 7;
std::string to_string(JumpChannel c);
JumpChannel parse_jump_channel(const std::string& text);
bool is_loss(JumpChannel c);

// Coefficient class of an operator matrix element: the effective Hamiltonian
// is H = fixed + sqrt(kappa_s) * cascade + kappa_s * source, and the transmit
// jump operator is C = fixed + sqrt(kappa_s) * source_amplitude.
enum class TermScale : int { Fixed = 0, SqrtKappaS = 1, KappaS = 2 };

struct OperatorTerm {
  Index row = 0;
  Index col = 0;
  Complex value;
  TermScale scale = TermScale::Fixed;
};

// Matrix elements of the effective (non-Hermitian) Hamiltonian in rad/ns,
// with the source mode feeding the cavity mode that propagates along `drive`.
std::vector<OperatorTerm> hamiltonian_terms(const SystemParams& params, const HilbertSpace& space,
                                            Direction drive);

// Matrix elements of each jump operator in sqrt(rad/ns).
std::array<std::vector<OperatorTerm>, kJumpChannels> jump_terms(const SystemParams& params,
                                                                const HilbertSpace& space, Direction drive);

}  // namespace psw
