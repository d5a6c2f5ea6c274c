#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <vector>

#include "dbe/exact.hpp"
#include "dbe/mcmc.hpp"
#include "dbe/models.hpp"
#include "doctest.h"

using namespace dbe;

namespace {

ModelPreset binomial_preset(long long M, double theta) {
  ModelPreset p;
  p.family = Family::krawtchouk;
  p.theta = theta;
  p.M_override = M;
  return p;
}

}  // namespace

TEST_CASE("move ratio matches mass difference (detailed balance)") {
  for (double theta : {0.5, 1.0, 2.0}) {
    auto bm = build(binomial_preset(-1, theta), 3);
    auto ens = build_exact(bm);
    for (const auto& c : ens.configs) {
      for (int i = 0; i < 3; ++i) {
        for (int dir : {1, -1}) {
          if (!move_valid(bm.spec, c, i, dir)) continue;
          auto c2 = c;
          c2.lambda[i] += dir;
          c2.positions[i] += dir;
          const double lr = move_log_ratio(bm, c, i, dir);
          const double diff = config_log_mass(bm, c2) - config_log_mass(bm, c);
          CHECK(std::abs(lr - diff) < 1e-12);
          // reverse move inverts the ratio exactly
          const double lr_back = move_log_ratio(bm, c2, i, -dir);
          CHECK(std::abs(lr + lr_back) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("single-site moves connect the whole state space") {
  std::vector<BuiltModel> cases;
  cases.push_back(build(binomial_preset(-1, 0.5), 3));
  {
    ModelPreset p;
    p.family = Family::multicut_krawtchouk;
    p.theta = 1.0;
    p.cut_a = {0.0, 2.0};
    p.cut_b = {1.0, 3.0};
    p.cut_fill = {0.5, 0.5};
    cases.push_back(build(p, 4));
  }
  for (const auto& bm : cases) {
    std::map<std::vector<std::int64_t>, int> index;
    std::vector<ParticleConfig> configs;
    enumerate(bm.spec, [&](const ParticleConfig& c) {
      index[c.lambda] = static_cast<int>(configs.size());
      configs.push_back(c);
    });
    REQUIRE(configs.size() > 1);

    std::vector<char> seen(configs.size(), 0);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!frontier.empty()) {
      const auto& c = configs[static_cast<std::size_t>(frontier.front())];
      frontier.pop();
      for (int i = 0; i < bm.spec.num_particles(); ++i) {
        for (int dir : {1, -1}) {
          if (!move_valid(bm.spec, c, i, dir)) continue;
          auto key = c.lambda;
          key[static_cast<std::size_t>(i)] += dir;
          const int to = index.at(key);
          if (!seen[static_cast<std::size_t>(to)]) {
            seen[static_cast<std::size_t>(to)] = 1;
            ++reached;
            frontier.push(to);
          }
        }
      }
    }
    CHECK(reached == configs.size());
  }
}

TEST_CASE("sampled frequencies match exact distribution") {
  auto bm = build(binomial_preset(2, 1.0), 2);
  auto ens = build_exact(bm);
  REQUIRE(ens.configs.size() == 3);

  std::map<std::vector<double>, std::size_t> index;
  for (std::size_t k = 0; k < ens.configs.size(); ++k)
    index[ens.configs[k].positions] = k;

  auto st = init_chain(bm, 20260815, 0);
  std::vector<std::int64_t> hits(3, 0);
  const std::int64_t steps = 1000000;
  for (std::int64_t s = 0; s < steps; ++s) {
    propose_and_accept(st, bm);
    ++hits[index.at(st.config.positions)];
  }
  // exact probabilities are {1/4, 1/2, 1/4}; 0.01 is several sigma at this length
  for (std::size_t k = 0; k < 3; ++k) {
    const double freq = static_cast<double>(hits[k]) / static_cast<double>(steps);
    CHECK(std::abs(freq - ens.prob[k]) < 0.01);
  }
}

TEST_CASE("long-run mean matches exact expectation at fractional theta") {
  auto bm = build(binomial_preset(-1, 0.5), 3);
  auto ens = build_exact(bm);
  const std::function<double(const ParticleConfig&)> total =
      [](const ParticleConfig& c) {
        double s = 0;
        for (double x : c.positions) s += x;
        return s;
      };
  const double exact_mean = expectation(ens, total);

  auto st = init_chain(bm, 7, 1);
  double acc = 0;
  std::int64_t n = 0;
  run_chain(bm, st, 500, 20000, 1, [&](const ChainState& s) {
    for (double x : s.config.positions) acc += x;
    ++n;
  });
  CHECK(n == 20000);
  CHECK(std::abs(acc / static_cast<double>(n) - exact_mean) < 0.05);
}

TEST_CASE("chains are reproducible by seed and stream") {
  auto bm = build(binomial_preset(-1, 0.5), 4);
  auto collect = [&](std::uint64_t seed, std::uint64_t stream) {
    auto st = init_chain(bm, seed, stream);
    std::vector<double> out;
    run_chain(bm, st, 50, 200, 2,
              [&](const ChainState& s) {
                out.insert(out.end(), s.config.positions.begin(),
                           s.config.positions.end());
              });
    return out;
  };
  auto a = collect(42, 7);
  auto b = collect(42, 7);
  auto c = collect(42, 8);
  auto d = collect(43, 7);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a != d);
}

TEST_CASE("sampler preserves fillings and lattice validity") {
  ModelPreset p;
  p.family = Family::multicut_krawtchouk;
  p.theta = 0.5;
  p.cut_a = {0.0, 3.0};
  p.cut_b = {2.0, 5.0};
  p.cut_fill = {0.5, 0.5};
  auto bm = build(p, 6);
  auto st = init_chain(bm, 99, 0);
  for (int s = 0; s < 20000; ++s) {
    propose_and_accept(st, bm);
    if (s % 500 == 0) {
      REQUIRE(validate(bm.spec, st.config.positions));
      for (int i = 0; i < bm.spec.num_particles(); ++i) {
        const int j = bm.spec.group_of_particle(i);
        const double x = st.config.positions[static_cast<std::size_t>(i)];
        const auto& iv = bm.spec.intervals()[static_cast<std::size_t>(j)];
        CHECK(x >= iv.a - 1e-9);
        CHECK(x <= iv.b + 1e-9);
      }
    }
  }
}

TEST_CASE("single particle acceptance ratio is the weight ratio") {
  auto bm = build(binomial_preset(4, 1.0), 1);
  auto c = min_config(bm.spec);
  for (int x = 0; x < 4; ++x) {
    const double lr = move_log_ratio(bm, c, 0, 1);
    const double xi = c.positions[0];
    CHECK(lr == doctest::Approx(bm.model.log_ratio(xi + 1)).epsilon(1e-13));
    const double phi_ratio = std::real(bm.model.phi_plus_N(xi + 1.0)) /
                             std::real(bm.model.phi_minus_N(xi + 1.0));
    CHECK(std::exp(lr) == doctest::Approx(phi_ratio).epsilon(1e-12));
    c.lambda[0] += 1;
    c.positions[0] += 1;
  }
}

TEST_CASE("moves that would violate the minimal gap are invalid") {
  auto bm = build(binomial_preset(-1, 2.0), 2);
  auto c = min_config(bm.spec);  // adjacent pair at spacing theta
  CHECK(!move_valid(bm.spec, c, 0, 1));
  CHECK(!move_valid(bm.spec, c, 0, -1));
  CHECK(move_valid(bm.spec, c, 1, 1));
  CHECK(!move_valid(bm.spec, c, 1, -1));

  // walls: top of the box
  auto top = make_config(bm.spec, {bm.spec.slack(0), bm.spec.slack(0)});
  CHECK(!move_valid(bm.spec, top, 1, 1));
  CHECK(move_valid(bm.spec, top, 0, -1));
}

TEST_CASE("incremental log mass stays in sync") {
  auto bm = build(binomial_preset(-1, 0.5), 4);
  auto st = init_chain(bm, 5, 3);
  for (int s = 0; s < 90000; ++s) propose_and_accept(st, bm);
  CHECK(std::abs(st.log_mass - config_log_mass(bm, st.config)) < 1e-8);
  for (int s = 0; s < 20000; ++s) propose_and_accept(st, bm);
  CHECK(std::abs(st.log_mass - config_log_mass(bm, st.config)) < 1e-8);
}

TEST_CASE("burn-in default") {
  CHECK(default_burn_in(10) == 5000);
  CHECK(default_burn_in(1000) == 2000000);
}
