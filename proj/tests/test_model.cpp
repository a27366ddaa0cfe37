#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "psw/config.hpp"
#include "psw/model.hpp"

using namespace psw;

TEST_CASE("cooperativity of the operating point") {
  const auto p = SystemParams::experiment();
  // g^2 / (kappa gamma) by hand.
  const double g = 27.0 / std::sqrt(3.0);
  CHECK(cooperativity(p) == doctest::Approx(g * g / ((7.6 + 30.0) * p.gamma)).epsilon(1e-14));
  CHECK(cooperativity(p) == doctest::Approx(2.2).epsilon(1e-2));
  CHECK_THROWS_AS(cooperativity(1.0, 0.0, 0.0, 1.0), InvalidParameter);
}

TEST_CASE("parasitic couplings scale with g") {
  const auto c = parasitic_couplings(35.0);
  CHECK(c.g_minus == doctest::Approx(7.0));
  CHECK(c.g_pi == doctest::Approx(5.0));
  const auto p = SystemParams::experiment();
  CHECK(p.g_minus == doctest::Approx(p.g / 5.0));
  CHECK(p.g_pi == doctest::Approx(p.g / 7.0));
}

TEST_CASE("critical coupling condition") {
  CHECK(critical_coupling_kex(7.6, 1.0) == doctest::Approx(std::sqrt(7.6 * 7.6 + 1.0)));
  CHECK(critical_coupling_kex(3.0, 4.0) == doctest::Approx(5.0));
}

TEST_CASE("parameter validation") {
  auto p = SystemParams::experiment();
  CHECK_NOTHROW(p.validate());
  p.kappa_i = -1.0;
  CHECK_THROWS_AS(p.validate(), InvalidParameter);
  p = SystemParams::experiment();
  p.g_minus = 2.0 * p.g;
  CHECK_THROWS_AS(p.validate(), InvalidParameter);
  p = SystemParams::experiment();
  p.gamma = std::nan("");
  CHECK_THROWS_AS(p.validate(), InvalidParameter);
}

TEST_CASE("mirror and direction helpers") {
  CHECK(mirrored(AtomLevel::GMinus) == AtomLevel::GPlus);
  CHECK(mirrored(AtomLevel::GPlus) == AtomLevel::GMinus);
  CHECK(mirrored(AtomLevel::GZero) == AtomLevel::GZero);
  CHECK(mirrored(AtomLevel::Excited) == AtomLevel::Excited);
  CHECK(opposite(Direction::Leftward) == Direction::Rightward);
  for (auto l : {AtomLevel::GMinus, AtomLevel::GZero, AtomLevel::GPlus, AtomLevel::Excited})
    CHECK(parse_atom_level(to_string(l)) == l);
  for (auto d : {Direction::Leftward, Direction::Rightward}) CHECK(parse_direction(to_string(d)) == d);
  CHECK_THROWS(parse_direction("up"));
}

TEST_CASE("switch states toggle") {
  CHECK(switch_state(AtomLevel::GZero) == SwitchState::Inert);
  CHECK(toggled(switch_state(AtomLevel::GMinus)) == switch_state(AtomLevel::GPlus));
  CHECK(toggled(toggled(SwitchState::ReflectLeftward)) == SwitchState::ReflectLeftward);
}

TEST_CASE("g distribution never samples negative couplings") {
  GDistribution d{1.0, 5.0};
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) CHECK(d.sample(rng) >= 0.0);
  GDistribution fixed{4.0, 0.0};
  CHECK(fixed.sample(rng) == 4.0);
}

TEST_CASE("key value config reports unknown keys") {
  auto cfg = KeyValueConfig::parse_string("g = 10\n# comment\nkappa_i = 3 # trailing\nbogus = 1\n");
  const auto p = system_params_from_config(cfg);
  CHECK(p.g == 10.0);
  CHECK(p.kappa_i == 3.0);
  CHECK(p.g_minus == doctest::Approx(2.0));
  CHECK_THROWS_AS(cfg.require_all_consumed(), ConfigError);
  try {
    cfg.require_all_consumed();
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
}

TEST_CASE("config values must parse") {
  auto cfg = KeyValueConfig::parse_string("g = ten\n");
  CHECK_THROWS_AS(system_params_from_config(cfg), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse_string("novalue\n"), ConfigError);
}

TEST_CASE("command-line overrides replace file values") {
  auto cfg = KeyValueConfig::parse_string("h = 1\n");
  cfg.set("h", "2.5");
  CHECK(system_params_from_config(cfg).h == 2.5);
}
