#include <algorithm>
#include <set>
#include <stdexcept>
#include <vector>

#include "dbe/lattice.hpp"
#include "doctest.h"

using dbe::ParticleConfig;
using dbe::StateSpaceSpec;

namespace {

std::set<std::vector<double>> collect(const StateSpaceSpec& spec) {
  std::set<std::vector<double>> out;
  dbe::enumerate(spec, [&](const ParticleConfig& c) { out.insert(c.positions); });
  return out;
}

}  // namespace

TEST_CASE("theta=1 single interval is the inclusive binomial count") {
  StateSpaceSpec spec(1.0, {{0.0, 4.0}}, {2});
  CHECK(spec.count_configurations() == doctest::Approx(10.0));  // C(5,2)
  auto all = collect(spec);
  CHECK(all.size() == 10);
  for (const auto& pos : all) CHECK(dbe::validate(spec, pos));
  CHECK(dbe::validate(spec, {0.0, 4.0}));
  CHECK_FALSE(dbe::validate(spec, {0.0, 0.5}));
  CHECK_FALSE(dbe::validate(spec, {4.0, 0.0}));
  CHECK_FALSE(dbe::validate(spec, {-1.0, 2.0}));
  CHECK_THROWS_AS(dbe::validate(spec, {1.0}), std::invalid_argument);
}

TEST_CASE("theta=2 configurations keep gaps of at least theta") {
  StateSpaceSpec spec(2.0, {{0.0, 4.0}}, {2});
  auto all = collect(spec);
  std::set<std::vector<double>> expect = {{0.0, 2.0}, {0.0, 3.0}, {0.0, 4.0},
                                          {1.0, 3.0}, {1.0, 4.0}, {2.0, 4.0}};
  CHECK(all == expect);
  CHECK(spec.count_configurations() == doctest::Approx(6.0));
  CHECK(spec.position(0, 1, 2) == doctest::Approx(4.0));
}

TEST_CASE("fractional theta lives on the shifted lattice") {
  StateSpaceSpec spec(0.5, {{0.0, 2.5}}, {3});
  CHECK(spec.slack(0) == 1);
  auto mc = dbe::min_config(spec);
  REQUIRE(mc.positions.size() == 3);
  CHECK(mc.positions[0] == doctest::Approx(0.5));
  CHECK(mc.positions[1] == doctest::Approx(1.0));
  CHECK(mc.positions[2] == doctest::Approx(1.5));
  CHECK(spec.count_configurations() == doctest::Approx(4.0));  // C(4,3)
  auto all = collect(spec);
  CHECK(all.size() == 4);
  for (const auto& pos : all) {
    CHECK(dbe::validate(spec, pos));
    CHECK(pos.back() <= 2.5);
  }
}

TEST_CASE("interval relations are enforced at construction") {
  CHECK_THROWS_AS(StateSpaceSpec(2.0, {{0.0, 4.0}, {5.0, 9.0}}, {2, 2}),
                  std::invalid_argument);  // separation below theta
  CHECK_THROWS_AS(StateSpaceSpec(1.0, {{0.0, 4.3}}, {2}),
                  std::invalid_argument);  // non-integer anchor
  CHECK_THROWS_AS(StateSpaceSpec(1.0, {{0.0, 1.0}}, {4}),
                  std::invalid_argument);  // interval too short
  CHECK_THROWS_AS(StateSpaceSpec(-1.0, {{0.0, 4.0}}, {2}), std::invalid_argument);
}

TEST_CASE("two intervals enumerate as a product") {
  StateSpaceSpec spec(1.0, {{0.0, 2.0}, {4.0, 6.0}}, {2, 2});
  CHECK(spec.count_configurations() == doctest::Approx(9.0));  // C(3,2)^2
  auto all = collect(spec);
  CHECK(all.size() == 9);
  CHECK(spec.offset(1) == 2);
  CHECK(spec.group_of_particle(3) == 1);
  CHECK(spec.rank_of_particle(3) == 1);
}

TEST_CASE("make_config checks slack monotonicity and range") {
  StateSpaceSpec spec(1.0, {{0.0, 4.0}}, {2});
  auto c = dbe::make_config(spec, {1, 3});
  CHECK(c.positions[0] == doctest::Approx(1.0));
  CHECK(c.positions[1] == doctest::Approx(4.0));
  CHECK_THROWS_AS(dbe::make_config(spec, {2, 1}), std::invalid_argument);
  CHECK_THROWS_AS(dbe::make_config(spec, {0, 9}), std::invalid_argument);
}

TEST_CASE("enumeration cap throws instead of running away") {
  StateSpaceSpec spec(1.0, {{0.0, 50.0}}, {10});
  CHECK_THROWS_AS(dbe::enumerate(spec, [](const ParticleConfig&) {}, 100.0),
                  std::length_error);
}
