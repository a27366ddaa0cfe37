#include "psw/hilbert.hpp"

#include <cmath>

namespace psw {

void HilbertSpace::validate() const {
  if (fock_cut_a < 0 || fock_cut_b < 0 || fock_cut_s < 0)
    throw InvalidParameter("Fock cutoffs must be >= 0");
  const double dim = double(kAtomLevels) * (fock_cut_a + 1) * (fock_cut_b + 1) * (fock_cut_s + 1);
  if (dim > double(kMaxDimension))
    throw InvalidParameter("Hilbert space dimension " + std::to_string(static_cast<long long>(dim)) +
                           " exceeds the limit of " + std::to_string(kMaxDimension));
}

std::string to_string(JumpChannel c) {
  switch (c) {
    case JumpChannel::Transmit: return "transmit";
    case JumpChannel::Reflect: return "reflect";
    case JumpChannel::CavLossA: return "cav_loss_a";
    case JumpChannel::CavLossB: return "cav_loss_b";
    case JumpChannel::AtomEmitMinus: return "atom_emit_minus";
    case JumpChannel::AtomEmitZero: return "atom_emit_zero";
    case JumpChannel::AtomEmitPlus: return "atom_emit_plus";
  }
  return "?";
}

JumpChannel parse_jump_channel(const std::string& text) {
  for (int k = 0; k < kJumpChannels; ++k)
    if (to_string(static_cast<JumpChannel>(k)) == text) return static_cast<JumpChannel>(k);
  throw InvalidParameter("unknown jump channel '" + text + "'");
}

bool is_loss(JumpChannel c) { return c != JumpChannel::Transmit && c != JumpChannel::Reflect; }

namespace {

enum class Mode { A, B, S };

int& occupation(BasisState& s, Mode m) {
  switch (m) {
    case Mode::A: return s.n_a;
    case Mode::B: return s.n_b;
    default: return s.n_s;
  }
}

// Appends coeff * op to `out`, where op = creation(to) annihilation(from) on
// photon modes (a^dag a_s style hopping).
void add_hopping(std::vector<OperatorTerm>& out, const HilbertSpace& space, Mode to, Mode from, Complex coeff,
                 TermScale scale) {
  for (Index col = 0; col < space.dimension(); ++col) {
    BasisState s = space.state(col);
    const int n_from = occupation(s, from);
    if (n_from == 0) continue;
    BasisState t = s;
    occupation(t, from) -= 1;
    occupation(t, to) += 1;
    if (!space.contains(t)) continue;
    const double amp = std::sqrt(double(n_from) * double(occupation(t, to)));
    out.push_back({space.index(t), col, coeff * amp, scale});
  }
}

// coupling * (c^dag |ground><e| + c |e><ground|) for photon mode c.
void add_atom_coupling(std::vector<OperatorTerm>& out, const HilbertSpace& space, Mode mode, AtomLevel ground,
                       double coupling) {
  if (coupling == 0.0) return;
  for (Index col = 0; col < space.dimension(); ++col) {
    BasisState s = space.state(col);
    if (s.atom == AtomLevel::Excited) {
      BasisState t = s;
      t.atom = ground;
      occupation(t, mode) += 1;
      if (!space.contains(t)) continue;
      out.push_back({space.index(t), col, Complex(coupling * std::sqrt(double(occupation(t, mode)))), TermScale::Fixed});
    } else if (s.atom == ground && occupation(s, mode) > 0) {
      BasisState t = s;
      t.atom = AtomLevel::Excited;
      const int n = occupation(t, mode);
      occupation(t, mode) -= 1;
      out.push_back({space.index(t), col, Complex(coupling * std::sqrt(double(n))), TermScale::Fixed});
    }
  }
}

void add_annihilation(std::vector<OperatorTerm>& out, const HilbertSpace& space, Mode mode, double coeff,
                      TermScale scale) {
  if (coeff == 0.0) return;
  for (Index col = 0; col < space.dimension(); ++col) {
    BasisState s = space.state(col);
    const int n = occupation(s, mode);
    if (n == 0) continue;
    BasisState t = s;
    occupation(t, mode) -= 1;
    out.push_back({space.index(t), col, Complex(coeff * std::sqrt(double(n))), scale});
  }
}

void add_lowering(std::vector<OperatorTerm>& out, const HilbertSpace& space, AtomLevel ground, double coeff) {
  if (coeff == 0.0) return;
  for (Index col = 0; col < space.dimension(); ++col) {
    BasisState s = space.state(col);
    if (s.atom != AtomLevel::Excited) continue;
    BasisState t = s;
    t.atom = ground;
    out.push_back({space.index(t), col, Complex(coeff), TermScale::Fixed});
  }
}

}  // namespace

std::vector<OperatorTerm> hamiltonian_terms(const SystemParams& params, const HilbertSpace& space,
                                            Direction drive) {
  params.validate();
  space.validate();
  const Complex i(0.0, 1.0);
  const double g = angular_rate(params.g);
  const double g_minus = angular_rate(params.g_minus);
  const double g_pi = angular_rate(params.g_pi);
  const double kappa = angular_rate(params.kappa());
  const double kappa_ex = angular_rate(params.kappa_ex);
  const double gamma = angular_rate(params.gamma);
  const Mode driven = drive == Direction::Rightward ? Mode::A : Mode::B;

  std::vector<OperatorTerm> terms;
  // Damping: -i gamma sigma_ee - i kappa (a^dag a + b^dag b), and -i kappa_s a_s^dag a_s.
  for (Index k = 0; k < space.dimension(); ++k) {
    const BasisState s = space.state(k);
    const double loss = (s.atom == AtomLevel::Excited ? gamma : 0.0) + kappa * (s.n_a + s.n_b);
    if (loss != 0.0) terms.push_back({k, k, -i * loss, TermScale::Fixed});
    if (s.n_s > 0) terms.push_back({k, k, -i * double(s.n_s), TermScale::KappaS});
  }
  // Cascaded source: -2i sqrt(kappa_s kappa_ex) c^dag a_s.
  add_hopping(terms, space, driven, Mode::S, -2.0 * i * std::sqrt(kappa_ex), TermScale::SqrtKappaS);
  // Backscattering between the counter-propagating modes: h (a^dag b + b^dag a).
  const double h = angular_rate(params.h);
  if (h != 0.0) {
    add_hopping(terms, space, Mode::A, Mode::B, Complex(h), TermScale::Fixed);
    add_hopping(terms, space, Mode::B, Mode::A, Complex(h), TermScale::Fixed);
  }

  // The forward (sigma+) mode drives G_MINUS <-> E; the backward (sigma-)
  // mode drives G_PLUS <-> E. Imperfect polarization overlap adds the
  // opposite circular transition and the pi transition to each mode.
  add_atom_coupling(terms, space, Mode::A, AtomLevel::GMinus, g);
  add_atom_coupling(terms, space, Mode::A, AtomLevel::GPlus, g_minus);
  add_atom_coupling(terms, space, Mode::A, AtomLevel::GZero, g_pi);
  add_atom_coupling(terms, space, Mode::B, AtomLevel::GPlus, g);
  add_atom_coupling(terms, space, Mode::B, AtomLevel::GMinus, g_minus);
  add_atom_coupling(terms, space, Mode::B, AtomLevel::GZero, g_pi);
  return terms;
}

std::array<std::vector<OperatorTerm>, kJumpChannels> jump_terms(const SystemParams& params,
                                                                const HilbertSpace& space, Direction drive) {
  params.validate();
  space.validate();
  const double kappa_ex = angular_rate(params.kappa_ex);
  const double kappa_i = angular_rate(params.kappa_i);
  const double gamma = angular_rate(params.gamma);
  const Mode forward = drive == Direction::Rightward ? Mode::A : Mode::B;
  const Mode backward = drive == Direction::Rightward ? Mode::B : Mode::A;

  std::array<std::vector<OperatorTerm>, kJumpChannels> ops;
  auto& transmit = ops[static_cast<int>(JumpChannel::Transmit)];
  add_annihilation(transmit, space, Mode::S, std::sqrt(2.0), TermScale::SqrtKappaS);
  add_annihilation(transmit, space, forward, std::sqrt(2.0 * kappa_ex), TermScale::Fixed);
  add_annihilation(ops[static_cast<int>(JumpChannel::Reflect)], space, backward, std::sqrt(2.0 * kappa_ex),
                   TermScale::Fixed);
  add_annihilation(ops[static_cast<int>(JumpChannel::CavLossA)], space, Mode::A, std::sqrt(2.0 * kappa_i),
                   TermScale::Fixed);
  add_annihilation(ops[static_cast<int>(JumpChannel::CavLossB)], space, Mode::B, std::sqrt(2.0 * kappa_i),
                   TermScale::Fixed);
  // F'=0 decays to each F=1 sublevel with branching ratio 1/3.
  const double emit = std::sqrt(2.0 * gamma / 3.0);
  add_lowering(ops[static_cast<int>(JumpChannel::AtomEmitMinus)], space, AtomLevel::GMinus, emit);
  add_lowering(ops[static_cast<int>(JumpChannel::AtomEmitZero)], space, AtomLevel::GZero, emit);
  add_lowering(ops[static_cast<int>(JumpChannel::AtomEmitPlus)], space, AtomLevel::GPlus, emit);
  return ops;
}

}  // namespace psw
