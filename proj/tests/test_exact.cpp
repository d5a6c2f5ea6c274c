#include <cmath>
#include <complex>
#include <vector>

#include "dbe/exact.hpp"
#include "dbe/rational.hpp"
#include "doctest.h"

using dbe::cplx;
using dbe::Family;
using dbe::ModelPreset;

namespace {

dbe::BuiltModel binomial_model(int N, long long M, double theta = 1.0) {
  ModelPreset p;
  p.family = Family::krawtchouk;
  p.theta = theta;
  p.M_override = M;
  return dbe::build(p, N);
}

}  // namespace

TEST_CASE("partition function of the binomial ensemble") {
  auto bm1 = binomial_model(1, 2);
  auto e1 = dbe::build_exact(bm1);
  CHECK(std::exp(e1.log_Z) == doctest::Approx(4.0).epsilon(1e-12));  // 1 + 2 + 1
  CHECK(e1.configs.size() == 3);

  auto bm2 = binomial_model(2, 2);
  auto e2 = dbe::build_exact(bm2);
  CHECK(std::exp(e2.log_Z) == doctest::Approx(8.0).epsilon(1e-12));  // 2 + 4 + 2
  // probabilities 1/4, 1/2, 1/4 in enumeration order (0,1), (0,2), (1,2)
  CHECK(e2.prob[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(e2.prob[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(e2.prob[2] == doctest::Approx(0.25).epsilon(1e-12));

  double total = 0.0;
  for (double p : e2.prob) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("expectation on the exact table") {
  auto ens = dbe::build_exact(binomial_model(1, 2));
  CHECK(dbe::expectation(ens, std::function<double(const dbe::ParticleConfig&)>(
                                  [](const dbe::ParticleConfig&) { return 1.0; })) ==
        doctest::Approx(1.0));
  CHECK(dbe::expectation(ens, std::function<double(const dbe::ParticleConfig&)>(
                                  [](const dbe::ParticleConfig& c) { return c.positions[0]; })) ==
        doctest::Approx(1.0));  // (0*1 + 1*2 + 2*1)/4
}

TEST_CASE("pairwise factor reduces to squared gaps at theta=1") {
  for (int g = 1; g <= 50; ++g) {
    double viaGamma = std::lgamma(g + 1.0) + std::lgamma(g + 1.0) - std::lgamma(g) -
                      std::lgamma(static_cast<double>(g));
    CHECK(dbe::pair_log(g, 1.0) == doctest::Approx(viaGamma).epsilon(1e-11));
    CHECK(dbe::pair_log(g, 1.0) == doctest::Approx(2.0 * std::log(g)).epsilon(1e-12));
  }
}

TEST_CASE("loop observable is identically one for a single binomial particle") {
  auto bm = binomial_model(1, 2);
  auto ens = dbe::build_exact(bm);
  for (cplx xi : {cplx(5.0, 0.0), cplx(0.5, 2.0), cplx(-3.0, 1.0), cplx(7.3, -4.1)}) {
    CHECK(std::abs(dbe::nekrasov_R(ens, bm.model, xi) - 1.0) < 1e-12);
  }
}

TEST_CASE("loop observable is polynomial and pole-free across presets and theta") {
  std::vector<double> thetas = {0.5, 1.0, 2.0};
  for (double theta : thetas) {
    ModelPreset p;
    p.family = Family::krawtchouk;
    p.theta = theta;
    p.m = 2.0;
    int N = 3;
    auto bm = dbe::build(p, N);
    auto ens = dbe::build_exact(bm);
    auto R = [&](cplx xi) { return dbe::nekrasov_R(ens, bm.model, xi); };

    // polynomial of degree <= 1 on a circle enclosing the lattice
    cplx center(0.5 * bm.spec.intervals()[0].b, 0.0);
    double rad = bm.spec.intervals()[0].b + 2.0;
    CHECK(dbe::poly_fit_residual(R, center, rad, bm.model.phi_degree) < 1e-10);

    // no pole at any lattice slot or its shift
    double scale = 0.0;
    for (double m : dbe::pole_candidates(bm.spec))
      scale = std::max(scale, std::abs(R(cplx(m + 0.31, 0.17))));
    for (double m : dbe::pole_candidates(bm.spec)) {
      cplx res = dbe::contour_residue(R, cplx(m, 0.0), 0.1);
      CHECK(std::abs(res) < 1e-10 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("loop observable residues vanish for two-interval and hexagon weights") {
  for (double theta : {0.5, 1.0, 2.0}) {
    ModelPreset p;
    p.family = Family::multicut_krawtchouk;
    p.theta = theta;
    p.cut_a = {0.0, 2.0};
    p.cut_b = {1.0, 3.0};
    p.cut_fill = {0.5, 0.5};
    auto bm = dbe::build(p, 4);
    auto ens = dbe::build_exact(bm);
    auto R = [&](cplx xi) { return dbe::nekrasov_R(ens, bm.model, xi); };
    double scale = std::abs(R(cplx(1.4, 0.9)));
    for (double m : dbe::pole_candidates(bm.spec)) {
      CHECK(std::abs(dbe::contour_residue(R, cplx(m, 0.0), 0.1)) <
            1e-10 * std::max(1.0, scale));
    }
    cplx center(0.5 * (bm.spec.intervals()[1].b + bm.spec.intervals()[0].a), 0.0);
    CHECK(dbe::poly_fit_residual(R, center, std::abs(center) + 4.0, bm.model.phi_degree) <
          1e-9 * std::max(1.0, scale));
  }

  ModelPreset h;
  h.family = Family::hahn_hexagon;
  h.theta = 0.5;
  h.A_hat = 1.0;
  h.B_hat = 1.0;
  h.C_hat = 1.0;
  h.t_hat = 1.5;
  auto bh = dbe::build(h, 3);
  auto eh = dbe::build_exact(bh);
  auto Rh = [&](cplx xi) { return dbe::nekrasov_R(eh, bh.model, xi); };
  double scale = std::abs(Rh(cplx(2.4, 1.0)));
  for (double m : dbe::pole_candidates(bh.spec)) {
    CHECK(std::abs(dbe::contour_residue(Rh, cplx(m, 0.0), 0.1)) < 1e-10 * std::max(1.0, scale));
  }
}

TEST_CASE("gauge covariance: common factor on phi moves through the observable") {
  auto bm = binomial_model(2, 4);
  auto ens = dbe::build_exact(bm);
  dbe::WeightModel scaled = bm.model;
  auto pp = bm.model.phi_plus_N, pm = bm.model.phi_minus_N;
  scaled.phi_plus_N = [pp](cplx xi) { return 2.7 * pp(xi); };
  scaled.phi_minus_N = [pm](cplx xi) { return 2.7 * pm(xi); };
  cplx xi(1.3, 0.8);
  CHECK(std::abs(dbe::nekrasov_R(ens, scaled, xi) - 2.7 * dbe::nekrasov_R(ens, bm.model, xi)) <
        1e-12);
}

TEST_CASE("q-deformed masses and observable: residues vanish, q->1 recovers the sharp case") {
  // moderate q, several theta: poles cancel on the lattice
  for (double theta : {0.5, 1.0, 2.0}) {
    ModelPreset p;
    p.family = Family::krawtchouk;
    p.theta = theta;
    p.m = 2.0;
    auto bm = dbe::build(p, 2);
    double q = 0.5;
    auto ens = dbe::build_exact_q(bm, q);
    auto Rq = [&](cplx xi) { return dbe::nekrasov_R_q(ens, bm.model, xi, q); };
    double scale = std::abs(Rq(cplx(0.4, 1.2)));
    for (double m : dbe::pole_candidates(bm.spec)) {
      CHECK(std::abs(dbe::contour_residue(Rq, cplx(m, 0.0), 0.1)) <
            1e-10 * std::max(1.0, scale));
    }
  }

  // q -> 1 continuity against the sharp observable on a fixed small ensemble
  auto bm = binomial_model(1, 2);
  auto sharp = dbe::build_exact(bm);
  double q = 1.0 - 1e-4;
  auto soft = dbe::build_exact_q(bm, q);
  for (cplx xi : {cplx(4.0, 0.5), cplx(-2.0, 1.0), cplx(0.5, 3.0)}) {
    cplx a = dbe::nekrasov_R_q(soft, bm.model, xi, q);
    cplx b = dbe::nekrasov_R(sharp, bm.model, xi);
    CHECK(std::abs(a - b) < 1e-6);
  }
}

TEST_CASE("joint cumulants via set partitions") {
  auto bm = binomial_model(2, 3);
  auto ens = dbe::build_exact(bm);
  using F = std::function<cplx(const dbe::ParticleConfig&)>;
  F sum = [](const dbe::ParticleConfig& c) { return cplx(c.positions[0] + c.positions[1]); };
  F sq = [](const dbe::ParticleConfig& c) {
    return cplx(c.positions[0] * c.positions[0] + c.positions[1] * c.positions[1]);
  };

  cplx mean = dbe::joint_cumulant(ens, {sum});
  cplx direct = dbe::expectation(ens, sum);
  CHECK(std::abs(mean - direct) < 1e-12);

  cplx cov = dbe::joint_cumulant(ens, {sum, sq});
  F prod = [](const dbe::ParticleConfig& c) {
    double s = c.positions[0] + c.positions[1];
    double t = c.positions[0] * c.positions[0] + c.positions[1] * c.positions[1];
    return cplx(s * t);
  };
  cplx covdirect = dbe::expectation(ens, prod) -
                   dbe::expectation(ens, sum) * dbe::expectation(ens, sq);
  CHECK(std::abs(cov - covdirect) < 1e-12);
}

TEST_CASE("mixed cumulants of independent blocks vanish") {
  // hand-built product measure on a 3 x 3 table
  dbe::StateSpaceSpec spec(1.0, {{0.0, 2.0}, {10.0, 12.0}}, {1, 1});
  dbe::ExactEnsemble ens{spec, {}, {}, {}, 0.0};
  double u[3] = {1.0, 2.0, 1.0}, v[3] = {1.0, 3.0, 1.0};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      dbe::ParticleConfig c;
      c.positions = {static_cast<double>(i), 10.0 + j};
      c.lambda = {i, j};
      ens.configs.push_back(c);
      ens.log_mass.push_back(std::log(u[i] * v[j]));
    }
  ens.log_Z = dbe::logsumexp(ens.log_mass);
  for (double lm : ens.log_mass) ens.prob.push_back(std::exp(lm - ens.log_Z));

  using F = std::function<cplx(const dbe::ParticleConfig&)>;
  F left = [](const dbe::ParticleConfig& c) { return cplx(c.positions[0]); };
  F right = [](const dbe::ParticleConfig& c) { return cplx(c.positions[1]); };
  F left2 = [](const dbe::ParticleConfig& c) { return cplx(c.positions[0] * c.positions[0]); };

  CHECK(std::abs(dbe::joint_cumulant(ens, {left, right})) < 1e-12);
  CHECK(std::abs(dbe::joint_cumulant(ens, {left, right, left2})) < 1e-12);
  // sanity: the dependent pair is nonzero
  cplx var = dbe::joint_cumulant(ens, {left, left});
  CHECK(var.real() == doctest::Approx(0.5).epsilon(1e-12));
}

#ifdef DBE_HAVE_GMP
TEST_CASE("exact-rational mode: partition functions and residues are exact") {
  auto bm = binomial_model(2, 2);
  auto ens = dbe::rational::build(bm);
  CHECK(ens.Z == mpq_class(8));
  CHECK(ens.Z == dbe::rational::krawtchouk_Z(2, 2));
  CHECK(dbe::rational::krawtchouk_Z(1, 2) == mpq_class(4));

  for (int N : {1, 2, 3}) {
    for (long long M : {3LL, 5LL}) {
      if (M < N) continue;
      auto b = binomial_model(N, M);
      auto e = dbe::rational::build(b);
      CHECK(e.Z == dbe::rational::krawtchouk_Z(N, M));
      for (long long m = -1; m <= M + 1; ++m) {
        CHECK(dbe::rational::nekrasov_residue(e, b.model, m) == 0);
      }
    }
  }
}

TEST_CASE("exact-rational mode covers the two-interval weight") {
  ModelPreset p;
  p.family = Family::multicut_krawtchouk;
  p.theta = 1.0;
  p.cut_a = {0.0, 2.0};
  p.cut_b = {1.0, 3.0};
  p.cut_fill = {0.5, 0.5};
  auto bm = dbe::build(p, 4);
  auto ens = dbe::rational::build(bm);
  CHECK(ens.Z > 0);
  // rational weights agree with the floating log weights
  for (const auto& cfg : ens.configs) {
    for (long long x : cfg) {
      double lw = bm.model.log_weight(static_cast<double>(x));
      double rw = std::log(dbe::rational::weight(bm.model, x).get_d());
      CHECK(lw == doctest::Approx(rw).epsilon(1e-9));
    }
  }
  long long lo = std::llround(bm.spec.intervals()[0].a) - 1;
  long long hi = std::llround(bm.spec.intervals()[1].b) + 2;
  for (long long m = lo; m <= hi; ++m) {
    CHECK(dbe::rational::nekrasov_residue(ens, bm.model, m) == 0);
  }
}
#endif
