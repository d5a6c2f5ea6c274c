#include "dbe/covariance.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "dbe/equilibrium.hpp"
#include "dbe/exact.hpp"
#include "dbe/models.hpp"
#include "dbe/numerics.hpp"
#include "doctest.h"

using dbe::cplx;

namespace {

// closed-form spectral data of the binomial-type family at theta = 1:
// R = m - 2, Q = 2 sqrt((z - m/2)^2 - (m-1)), e^G = ((m-2) - Q)/(2(m - z))
dbe::SpectralData synthetic_binomial_sd(double m) {
  dbe::SpectralData sd;
  const double a = m / 2.0 - std::sqrt(m - 1.0);
  const double b = m / 2.0 + std::sqrt(m - 1.0);
  sd.alpha = {a};
  sd.beta = {b};
  sd.sign = 1.0;
  auto Q = [a, b](cplx z) { return 2.0 * dbe::branch_sqrt(z, a, b); };
  sd.G = [m, Q](cplx z) { return std::log(((m - 2.0) - Q(z)) / (2.0 * (m - z))); };
  sd.Gp = [m, Q](cplx z) {
    const cplx q = Q(z);
    const cplx qp = 4.0 * (z - m / 2.0) / q;
    return -qp / ((m - 2.0) - q) + 1.0 / (m - z);
  };
  sd.R = [m](cplx) { return cplx(m - 2.0); };
  sd.Q = Q;
  sd.H = [](cplx) { return cplx(2.0); };
  sd.min_abs_H = 2.0;
  return sd;
}

dbe::BuiltModel binomial_model(double m, int N) {
  dbe::ModelPreset p;
  p.family = dbe::Family::krawtchouk;
  p.m = m;
  p.theta = 1.0;
  return dbe::build(p, N);
}

// inverse Joukowski map for the band [a, b]: u = c + g (zeta + 1/zeta)
cplx joukowski_inv(cplx u, double a, double b) {
  const double c = 0.5 * (a + b), g = 0.25 * (b - a);
  return ((u - c) + dbe::branch_sqrt(u, a, b)) / (2.0 * g);
}

}  // namespace

TEST_CASE("one-cut kernel: frozen value, symmetry, decay, diagonal") {
  const double expected = -0.5 * (1.0 - 5.0 / (2.0 * std::sqrt(6.0)));
  const cplx K34 = dbe::kernel_one_cut(3.0, 4.0, 0.0, 2.0);
  CHECK(std::abs(K34 - expected) < 1e-14);
  CHECK(K34.real() > 0.0);

  const cplx u(2.7, 1.3), v(-0.4, -0.6);
  CHECK(std::abs(dbe::kernel_one_cut(u, v, 0.0, 2.0) - dbe::kernel_one_cut(v, u, 0.0, 2.0)) <
        1e-15);

  const cplx far1 = dbe::kernel_one_cut(40.0, 5.0, 0.0, 2.0);
  const cplx far2 = dbe::kernel_one_cut(80.0, 5.0, 0.0, 2.0);
  CHECK(std::abs(far1 / far2) == doctest::Approx(4.0).epsilon(0.15));

  // analytic u = v limit and continuity across the series switchover;
  // near the diagonal both branches track width^2/(16 q(midpoint)^2)
  auto diag_at = [](cplx m) {
    const cplx q = m * (m - 2.0);
    return 4.0 / (16.0 * q * q);
  };
  const cplx diag = dbe::kernel_one_cut(3.0, 3.0, 0.0, 2.0);
  CHECK(std::abs(diag - diag_at(3.0)) < 1e-15);
  const cplx below = dbe::kernel_one_cut(3.0, 3.0 + 1.9e-4, 0.0, 2.0);
  const cplx above = dbe::kernel_one_cut(3.0, 3.0 + 2.1e-4, 0.0, 2.0);
  CHECK(std::abs(below - diag_at(3.0 + 0.95e-4)) < 1e-7 * std::abs(diag));
  CHECK(std::abs(above - diag_at(3.0 + 1.05e-4)) < 1e-6 * std::abs(diag));

  CHECK_THROWS_AS(dbe::kernel_one_cut(1.0, 4.0, 0.0, 2.0), std::domain_error);
  CHECK_THROWS_AS(dbe::kernel_one_cut(4.0, 2.0, 0.0, 2.0), std::domain_error);
  CHECK_THROWS_AS(dbe::kernel_one_cut(3.0, 4.0, 2.0, 0.0), std::invalid_argument);
}

TEST_CASE("one-cut kernel matches the Joukowski-coordinate form") {
  // C(u,v) du dv = d zeta d eta / (zeta eta - 1)^2 outside the band
  const double a = 0.3, b = 2.7;
  const double g = 0.25 * (b - a);
  auto reference = [&](cplx u, cplx v) {
    const cplx ze = joukowski_inv(u, a, b), et = joukowski_inv(v, a, b);
    const cplx dz = 1.0 / (g * (1.0 - 1.0 / (ze * ze)));
    const cplx de = 1.0 / (g * (1.0 - 1.0 / (et * et)));
    return dz * de / ((ze * et - 1.0) * (ze * et - 1.0));
  };
  for (auto [u, v] : {std::pair<cplx, cplx>{4.0, -1.0},
                      {cplx(1.5, 2.0), cplx(3.5, -0.2)},
                      {cplx(-2.0, 0.3), cplx(0.1, -1.0)}}) {
    const cplx K = dbe::kernel_one_cut(u, v, a, b);
    CHECK(std::abs(K - reference(u, v)) < 1e-12 * std::max(1.0, std::abs(K)));
  }
}

TEST_CASE("loop integral: residues, analytic functions, divergence") {
  dbe::Contour c{cplx(0.5, 0.0), 1.0};
  auto pole = [](cplx z) { return 1.0 / (z - cplx(0.5, 0.0)); };
  CHECK(std::abs(dbe::loop_integral(c, pole) - 1.0) < 1e-12);

  auto entire = [](cplx z) { return z * z + 3.0; };
  CHECK(std::abs(dbe::loop_integral(c, entire)) < 1e-12);

  const cplx on_contour = c.center + c.radius * std::exp(cplx(0.0, 0.123));
  auto singular = [on_contour](cplx z) { return 1.0 / (z - on_contour); };
  CHECK_THROWS_AS(dbe::loop_integral(c, singular), std::runtime_error);
}

TEST_CASE("contour construction: geometry and failure modes") {
  CHECK_THROWS_AS(dbe::make_contours({2.0}, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(dbe::make_contours({0.0}, {1.0}, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(dbe::make_contours({0.0, 1.001}, {1.0, 2.0}), std::runtime_error);

  auto cs = dbe::make_contours({-2.0, 0.5}, {-1.0, 2.0});
  REQUIRE(cs.loops.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    // winding: own band inside, other band outside
    const double lo = i == 0 ? -2.0 : 0.5, hi = i == 0 ? -1.0 : 2.0;
    CHECK(std::abs(cplx(lo, 0.0) - cs.loops[i].center) < cs.loops[i].radius);
    CHECK(std::abs(cplx(hi, 0.0) - cs.loops[i].center) < cs.loops[i].radius);
    const double olo = i == 0 ? 0.5 : -2.0, ohi = i == 0 ? 2.0 : -1.0;
    CHECK(std::abs(cplx(olo, 0.0) - cs.loops[i].center) > cs.loops[i].radius);
    CHECK(std::abs(cplx(ohi, 0.0) - cs.loops[i].center) > cs.loops[i].radius);
  }
}

TEST_CASE("omega map: zero total residue, antisymmetry, conditioning") {
  const std::vector<double> alpha{-2.0, 1.0}, beta{-1.0, 3.0};
  auto cs = dbe::make_contours(alpha, beta);
  auto entries = dbe::omega_map({cplx(1.0)}, alpha, beta, cs);
  REQUIRE(entries.size() == 2);
  CHECK(std::abs(entries[0] + entries[1]) < 1e-10);
  CHECK(std::abs(entries[0]) > 1e-3);

  auto wide = dbe::make_contours(alpha, beta, 0.9);
  auto entries2 = dbe::omega_map({cplx(1.0)}, alpha, beta, wide);
  CHECK(std::abs(entries[0] - entries2[0]) < 1e-9);

  const double cond = dbe::omega_condition(alpha, beta, cs);
  CHECK(cond >= 1.0);
  CHECK(cond < 1e6);

  CHECK_THROWS_AS(dbe::omega_map({cplx(1.0), cplx(2.0)}, alpha, beta, cs),
                  std::invalid_argument);
  CHECK_THROWS_AS(dbe::omega_map({cplx(1.0)}, {0.0}, {1.0},
                                 dbe::make_contours({0.0}, {1.0})),
                  std::invalid_argument);
}

TEST_CASE("upsilon: identity at one band, annihilation, idempotence") {
  const std::vector<double> alpha{-2.0, 0.5}, beta{-1.0, 2.0};
  dbe::CovarianceKernel kern;
  kern.alpha = alpha;
  kern.beta = beta;
  kern.contours = dbe::make_contours(alpha, beta);
  kern.mode = dbe::CovarianceKernel::Mode::multi_cut_upsilon;

  auto ps = [&](cplx z) { return dbe::prod_branch_sqrt(alpha, beta, z); };

  SUBCASE("1/prod_sqrt is annihilated at two bands") {
    auto out = dbe::upsilon_apply([ps](cplx z) { return 1.0 / ps(z); }, kern);
    CHECK(std::abs(out(cplx(5.0, 0.0))) < 1e-8);
    CHECK(std::abs(out(cplx(-1.0, 3.0))) < 1e-8);
  }

  SUBCASE("analytic inputs pass through unchanged") {
    auto f = [](cplx z) { return z * z + 1.0; };
    auto out = dbe::upsilon_apply(f, kern);
    const cplx p(4.0, 1.0);
    CHECK(std::abs(out(p) - f(p)) < 1e-7);
  }

  SUBCASE("output loop integrals vanish and the map is idempotent") {
    auto f = [ps](cplx z) { return 3.0 / ps(z) + 0.2 * (z * z - 1.0); };
    auto once = dbe::upsilon_apply(f, kern);
    for (const auto& loop : kern.contours.loops)
      CHECK(std::abs(dbe::loop_integral(loop, once)) < 1e-8);
    auto twice = dbe::upsilon_apply(once, kern);
    CHECK(std::abs(once(cplx(4.0, 0.5)) - twice(cplx(4.0, 0.5))) < 1e-8);
  }

  SUBCASE("nonzero total loop integral is rejected") {
    auto f = [ps](cplx z) { return 1.0 / ps(z) + 1.0 / (z + 1.5); };
    CHECK_THROWS_AS(dbe::upsilon_apply(f, kern), std::invalid_argument);
  }

  SUBCASE("one band: upsilon is the identity") {
    dbe::CovarianceKernel k1;
    k1.alpha = {0.0};
    k1.beta = {2.0};
    k1.contours = dbe::make_contours(k1.alpha, k1.beta);
    auto f = [](cplx z) { return 1.0 / (z - 7.0); };
    auto out = dbe::upsilon_apply(f, k1);
    const cplx p(3.0, 0.2);
    CHECK(std::abs(out(p) - f(p)) < 1e-14);
  }
}

TEST_CASE("multi-cut kernel at one band reduces to the closed form") {
  auto sd = synthetic_binomial_sd(3.0);
  auto kern = dbe::make_kernel(sd, 1.0);
  CHECK(kern.mode == dbe::CovarianceKernel::Mode::one_cut_closed_form);
  const double a = sd.alpha[0], b = sd.beta[0];
  for (auto [z, w] : {std::pair<cplx, cplx>{5.0, -2.0},
                      {cplx(4.0, 0.7), cplx(-0.8, -0.3)},
                      {cplx(-1.5, 2.0), cplx(5.5, 1.0)},
                      {cplx(4.2, 0.0), cplx(4.2 + 1e-5, 0.0)}}) {
    const cplx mc = dbe::kernel_multi_cut(z, w, kern);
    const cplx oc = dbe::kernel_one_cut(z, w, a, b);
    CHECK(std::abs(mc - oc) < 1e-12 * std::max(1.0, std::abs(oc)));
  }
  CHECK_THROWS_AS(dbe::kernel_multi_cut(cplx(1.5, 0.0), cplx(5.0, 0.0), kern),
                  std::invalid_argument);
}

TEST_CASE("multi-cut kernel on two bands") {
  const std::vector<double> alpha{-2.0, 0.5}, beta{-1.0, 2.0};
  dbe::CovarianceKernel kern;
  kern.alpha = alpha;
  kern.beta = beta;
  kern.contours = dbe::make_contours(alpha, beta);
  kern.mode = dbe::CovarianceKernel::Mode::multi_cut_upsilon;

  SUBCASE("symmetry in the two arguments") {
    for (auto [z, w] : {std::pair<cplx, cplx>{3.5, -3.6},
                        {cplx(3.0, 1.0), cplx(-3.0, 0.5)},
                        {cplx(0.0, 2.2), cplx(4.0, -0.7)}}) {
      const cplx zw = dbe::kernel_multi_cut(z, w, kern);
      const cplx wz = dbe::kernel_multi_cut(w, z, kern);
      CHECK(std::abs(zw - wz) < 1e-8 * std::max(1.0, std::abs(zw)));
    }
  }

  SUBCASE("contour deformation leaves values unchanged") {
    dbe::CovarianceKernel wide = kern;
    wide.contours = dbe::make_contours(alpha, beta, 0.85);
    const cplx z(3.5, 0.0), w(-3.6, 0.4);
    CHECK(std::abs(dbe::kernel_multi_cut(z, w, kern) - dbe::kernel_multi_cut(z, w, wide)) <
          1e-8);
  }

  SUBCASE("loop integrals of the kernel in its second argument vanish") {
    const cplx z0(4.0, 0.8);
    auto probe = dbe::make_contours(alpha, beta, 0.85);
    for (const auto& loop : probe.loops) {
      cplx acc = 0.0;
      const int n = 512;
      for (int j = 0; j < n; ++j) {
        const cplx e = loop.radius * std::exp(cplx(0.0, 2.0 * dbe::kPi * j / n));
        acc += dbe::kernel_multi_cut(z0, loop.center + e, kern) * e;
      }
      CHECK(std::abs(acc / static_cast<double>(n)) < 1e-7);
    }
  }

  SUBCASE("kernel depends on the endpoints only") {
    dbe::CovarianceKernel other = kern;
    other.H = [](cplx z) { return z * z + 5.0; };
    const cplx z(3.5, 0.0), w(0.0, 2.0);
    CHECK(dbe::kernel_multi_cut(z, w, kern) == dbe::kernel_multi_cut(z, w, other));
  }

  SUBCASE("large-argument decay") {
    const cplx w0(-3.5, 0.0);
    const cplx n1 = dbe::kernel_multi_cut(cplx(20.0, 0.0), w0, kern);
    const cplx n2 = dbe::kernel_multi_cut(cplx(40.0, 0.0), w0, kern);
    CHECK(std::abs(n1 / n2) == doctest::Approx(4.0).epsilon(0.2));
  }

  SUBCASE("evaluation inside a loop is rejected") {
    CHECK_THROWS_AS(dbe::kernel_multi_cut(cplx(-1.5, 0.0), cplx(4.0, 0.0), kern),
                    std::invalid_argument);
  }
}

TEST_CASE("linear statistics on one band: Chebyshev coefficient identities") {
  // band [0,2]: x = 1 + cos(phi), so x has first Chebyshev coefficient 1 and
  // x^2 = 3/2 + 2 cos(phi) + cos(2 phi)/2; the limiting covariance is
  // (1/theta) sum_k k f_k g_k / 4
  auto sd = synthetic_binomial_sd(2.0);
  auto kern = dbe::make_kernel(sd, 1.0);
  auto id = [](cplx z) { return z; };
  auto sq = [](cplx z) { return z * z; };

  const double var_x = dbe::linear_stat_covariance(id, id, kern);
  CHECK(var_x == doctest::Approx(0.25).epsilon(1e-8));

  const double cov_x_x2 = dbe::linear_stat_covariance(id, sq, kern);
  CHECK(cov_x_x2 == doctest::Approx(0.5).epsilon(1e-7));

  const double var_x2 = dbe::linear_stat_covariance(sq, sq, kern);
  CHECK(var_x2 == doctest::Approx(1.125).epsilon(1e-7));

  auto one = [](cplx) { return cplx(1.0); };
  CHECK(std::abs(dbe::linear_stat_covariance(one, one, kern)) < 1e-10);
  CHECK(std::abs(dbe::linear_stat_covariance(one, id, kern)) < 1e-10);

  auto sum = [](cplx z) { return z + z * z; };
  const double lhs = dbe::linear_stat_covariance(sum, id, kern);
  CHECK(lhs == doctest::Approx(var_x + cov_x_x2).epsilon(1e-9));

  auto kern2 = dbe::make_kernel(sd, 2.0);
  const double var_half = dbe::linear_stat_covariance(id, id, kern2);
  CHECK(var_half == doctest::Approx(0.125).epsilon(1e-8));
}

TEST_CASE("covariance normalization pinned by exact enumeration") {
  // Var(sum l_i / N) for the binomial family at m = 2, theta = 1 is
  // N (M - N + 1) / (4 N^2); the kernel reproduces its N -> infinity limit
  auto var_scaled_sum = [](int N) {
    auto bm = binomial_model(2.0, N);
    auto ens = dbe::build_exact(bm);
    const double Nd = N;
    const std::function<double(const dbe::ParticleConfig&)> f =
        [Nd](const dbe::ParticleConfig& c) {
          double s = 0.0;
          for (double x : c.positions) s += x;
          return s / Nd;
        };
    const std::function<double(const dbe::ParticleConfig&)> f2 =
        [&f](const dbe::ParticleConfig& c) {
          const double v = f(c);
          return v * v;
        };
    return dbe::expectation(ens, f2) - std::pow(dbe::expectation(ens, f), 2);
  };

  const double v4 = var_scaled_sum(4);
  const double v8 = var_scaled_sum(8);
  CHECK(v4 == doctest::Approx(5.0 / 16.0).epsilon(1e-10));
  CHECK(v8 == doctest::Approx(9.0 / 32.0).epsilon(1e-10));

  // Richardson in 1/N lands on the kernel prediction
  const double extrapolated = 2.0 * v8 - v4;
  auto kern = dbe::make_kernel(synthetic_binomial_sd(2.0), 1.0);
  auto id = [](cplx z) { return z; };
  const double kernel_value = dbe::linear_stat_covariance(id, id, kern);
  CHECK(extrapolated == doctest::Approx(kernel_value).epsilon(1e-8));
}

TEST_CASE("mean correction: closed form at m = 2") {
  auto sd = synthetic_binomial_sd(2.0);
  auto kern = dbe::make_kernel(sd, 1.0);
  auto bm = binomial_model(2.0, 50);

  // residue evaluation of the correction integral:
  // ((u-1)/(u(u-2)) - 1/sqrt(u(u-2))) / 2
  auto closed = [](cplx u) {
    return 0.5 * ((u - 1.0) / (u * (u - 2.0)) - 1.0 / dbe::branch_sqrt(u, 0.0, 2.0));
  };

  const cplx at3 = dbe::mean_correction(kern, sd, bm.model, 3.0);
  CHECK(std::abs(at3 - closed(3.0)) < 1e-9);
  CHECK(at3.real() == doctest::Approx(1.0 / 3.0 - 0.5 / std::sqrt(3.0)).epsilon(1e-8));

  const cplx uc(1.5, 2.0);
  CHECK(std::abs(dbe::mean_correction(kern, sd, bm.model, uc) - closed(uc)) < 1e-9);

  // the 1/N first-moment shift vanishes for this family, so the correction
  // decays one power faster than generic: F(u) = 1/(4 u^3) + O(u^-4)
  const cplx far = dbe::mean_correction(kern, sd, bm.model, 60.0);
  const cplx farther = dbe::mean_correction(kern, sd, bm.model, 120.0);
  CHECK(std::abs(far - closed(60.0)) < 1e-6 * std::abs(closed(60.0)));
  CHECK(std::abs(far / farther) == doctest::Approx(8.0).epsilon(0.1));

  dbe::WeightModel bare;
  bare.theta = 1.0;
  CHECK_THROWS_AS(dbe::mean_correction(kern, sd, bare, 3.0), std::runtime_error);
}

TEST_CASE("mean correction: independent quadrature route at m = 3") {
  auto sd = synthetic_binomial_sd(3.0);
  auto kern = dbe::make_kernel(sd, 1.0);
  auto bm = binomial_model(3.0, 60);
  const cplx u(4.5, 0.0);

  // same integral written with the explicit band radical of the binomial
  // family instead of the generic H-and-prod-sqrt split
  const double a = sd.alpha[0], b = sd.beta[0];
  auto q_half = [a, b](cplx z) { return dbe::branch_sqrt(z, a, b); };
  dbe::Contour loop{cplx(1.5, 0.0), 1.8};
  auto toy = [&](cplx z) {
    const cplx eg = std::exp(sd.G(z));
    return (eg + q_half(z) * sd.Gp(z)) / (u - z);
  };
  const cplx reference = dbe::loop_integral(loop, toy) / (2.0 * q_half(u));

  const cplx mc = dbe::mean_correction(kern, sd, bm.model, u);
  CHECK(std::abs(mc - reference) < 1e-8);
}

TEST_CASE("mean correction: exact enumeration trend at m = 2") {
  const cplx u(3.0, 0.0);
  auto sd = synthetic_binomial_sd(2.0);
  auto kern = dbe::make_kernel(sd, 1.0);
  const cplx limit = dbe::mean_correction(kern, sd, binomial_model(2.0, 50).model, u);

  auto delta = [&](int N) {
    auto bm = binomial_model(2.0, N);
    auto ens = dbe::build_exact(bm);
    const double Nd = N;
    const std::function<cplx(const dbe::ParticleConfig&)> gn =
        [Nd, u](const dbe::ParticleConfig& c) {
          cplx s = 0.0;
          for (double x : c.positions) s += 1.0 / (u - x / Nd);
          return s / Nd;
        };
    const cplx mean_gn = dbe::expectation(ens, gn);
    const cplx gmu = 0.5 * std::log(u / (u - 2.0));
    return static_cast<double>(N) * (mean_gn - gmu);
  };

  const cplx d4 = delta(4), d6 = delta(6), d8 = delta(8);
  const double e4 = std::abs(d4 - limit), e6 = std::abs(d6 - limit), e8 = std::abs(d8 - limit);
  CHECK(e6 < e4);
  CHECK(e8 < e6);
  const cplx extrapolated = 2.0 * d8 - d4;
  CHECK(std::abs(extrapolated - limit) < 0.01);
}
