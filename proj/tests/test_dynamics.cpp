#include <doctest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>

#include "psw/dynamics.hpp"
#include "psw/scattering.hpp"

using namespace psw;

namespace {

SystemParams with_source(double kappa_s) {
  auto p = SystemParams::experiment();
  p.kappa_s = kappa_s;
  return p;
}

Eigen::MatrixXcd jump_sum(const SystemParams& p, const HilbertSpace& s, Direction d) {
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(s.dimension(), s.dimension());
  for (int k = 0; k < kJumpChannels; ++k) {
    const auto c = build_jump_operator(p, s, static_cast<JumpChannel>(k), d);
    sum += c.adjoint() * c;
  }
  return sum;
}

Eigen::VectorXd excitation_numbers(const HilbertSpace& s) {
  Eigen::VectorXd n(s.dimension());
  for (Index i = 0; i < s.dimension(); ++i) n(i) = s.state(i).excitations();
  return n;
}

}  // namespace

TEST_CASE("hilbert space indexing round trips") {
  const HilbertSpace s{2, 3, 1};
  for (Index i = 0; i < s.dimension(); ++i) CHECK(s.index(s.state(i)) == i);
  CHECK_THROWS_AS((HilbertSpace{-1, 2, 2}).validate(), InvalidParameter);
}

TEST_CASE("anti-Hermitian part of the effective Hamiltonian equals the jump rates") {
  // d|psi|^2/dt = -<psi| sum C^dag C |psi> follows from H - H^dag = -i sum C^dag C.
  for (auto d : {Direction::Rightward, Direction::Leftward}) {
    const auto p = with_source(0.7);
    const HilbertSpace s{2, 2, 2};
    const auto h = build_effective_hamiltonian(p, s, d);
    const Eigen::MatrixXcd lhs = h - h.adjoint();
    const Eigen::MatrixXcd rhs = Complex(0, -1) * jump_sum(p, s, d);
    CHECK((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
  }
}

TEST_CASE("no-jump evolution never increases the norm") {
  const auto p = with_source(0.5);
  const HilbertSpace s{2, 2, 2};
  const auto h = build_effective_hamiltonian(p, s);
  for (auto atom : {AtomLevel::GMinus, AtomLevel::GPlus, AtomLevel::GZero}) {
    const Eigen::VectorXcd psi0 = fock_input_state(s, atom, 2).amplitudes;
    double last = psi0.squaredNorm();
    for (double t = 1.0; t <= 200.0; t += 1.0) {
      const Eigen::MatrixXcd u = (Complex(0, -1) * h * t).exp();
      const double n = (u * psi0).squaredNorm();
      CHECK(n <= last + 1e-12);
      last = n;
    }
    CHECK(last < 0.5);
  }
}

TEST_CASE("effective Hamiltonian conserves excitation number and jumps remove one") {
  const auto p = with_source(0.5);
  const HilbertSpace s{2, 2, 2};
  const auto n = excitation_numbers(s);
  const auto h = build_effective_hamiltonian(p, s);
  for (Index r = 0; r < h.rows(); ++r)
    for (Index c = 0; c < h.cols(); ++c)
      if (std::abs(h(r, c)) > 0) CHECK(n(r) == n(c));
  for (int k = 0; k < kJumpChannels; ++k) {
    const auto op = build_jump_operator(p, s, static_cast<JumpChannel>(k));
    for (Index r = 0; r < op.rows(); ++r)
      for (Index c = 0; c < op.cols(); ++c)
        if (std::abs(op(r, c)) > 0) CHECK(n(r) == n(c) - 1);
  }
}

TEST_CASE("each trajectory emits one jump per source photon and ends in a ground level") {
  const ScatteringModel m(SystemParams::experiment(), HilbertSpace{3, 3, 3});
  TrajectoryOptions o;
  o.source = GaussianSource{0.0, 15.0};
  o.completeness_checks = 4;
  for (int n = 1; n <= 3; ++n)
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto rec = m.run(AtomLevel::GMinus, n, seed, o);
      CHECK(rec.jumps.size() == static_cast<std::size_t>(n));
      CHECK(is_ground(rec.final_atom));
      CHECK(rec.completeness_error < 1e-6);
      for (std::size_t j = 1; j < rec.jumps.size(); ++j) CHECK(rec.jumps[j].time_ns >= rec.jumps[j - 1].time_ns);
    }
}

TEST_CASE("trajectories are deterministic per seed") {
  const ScatteringModel m(SystemParams::experiment());
  TrajectoryOptions o;
  o.source = GaussianSource{0.0, 15.0};
  const auto a = m.run(AtomLevel::GMinus, 2, 99, o);
  const auto b = m.run(AtomLevel::GMinus, 2, 99, o);
  CHECK(a.jumps == b.jumps);
  CHECK(a.final_atom == b.final_atom);
  bool differs = false;
  for (std::uint64_t seed = 100; seed < 120 && !differs; ++seed) differs = !(m.run(AtomLevel::GMinus, 2, seed, o).jumps == a.jumps);
  CHECK(differs);
}

TEST_CASE("single-photon outcome probabilities are normalized") {
  TrajectoryOptions o;
  o.source = GaussianSource{0.0, 50.0};
  for (auto atom : {AtomLevel::GMinus, AtomLevel::GPlus, AtomLevel::GZero}) {
    const auto d = ScatteringModel(SystemParams::experiment()).first_jump(atom, 1, o);
    CHECK(std::abs(d.total() + d.residual_norm - 1.0) < 1e-12);
    CHECK(d.residual_norm < 1e-9);
  }
}

TEST_CASE("left-right mirror symmetry of outcome probabilities") {
  TrajectoryOptions o;
  o.source = GaussianSource{0.0, 50.0};
  const auto p = SystemParams::experiment();
  for (auto atom : {AtomLevel::GMinus, AtomLevel::GPlus, AtomLevel::GZero}) {
    const auto right = exact_single_photon_outcomes(p, atom, {}, Direction::Rightward, o);
    const auto left = exact_single_photon_outcomes(p, mirrored(atom), {}, Direction::Leftward, o);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) CHECK(left.p[a][b] == doctest::Approx(right.p[a][b]).epsilon(1e-9));
  }
}

TEST_CASE("results are insensitive to doubling every Fock cutoff") {
  TrajectoryOptions o;
  o.source = GaussianSource{0.0, 15.0};
  const auto p = SystemParams::experiment();
  const ScatteringModel small(p, HilbertSpace{2, 2, 2});
  const ScatteringModel big(p, HilbertSpace{4, 4, 4});
  for (int n = 1; n <= 2; ++n) {
    const auto a = small.first_jump(AtomLevel::GMinus, n, o);
    const auto b = big.first_jump(AtomLevel::GMinus, n, o);
    for (int k = 0; k < kJumpChannels; ++k)
      for (int l = 0; l < kAtomLevels; ++l) CHECK(std::abs(a.probability[k][l] - b.probability[k][l]) < 1e-3);
  }
}

TEST_CASE("requests outside the truncated space are rejected") {
  const ScatteringModel m(SystemParams::experiment(), HilbertSpace{2, 2, 2});
  CHECK_THROWS_AS(m.run(AtomLevel::GMinus, 3, 1), InvalidParameter);
  CHECK_THROWS_AS(m.run(AtomLevel::GMinus, 0, 1), InvalidParameter);
  CHECK_THROWS_AS(m.run(AtomLevel::Excited, 1, 1), InvalidParameter);
}
