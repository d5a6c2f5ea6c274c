#include "dbe/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dbe/numerics.hpp"

namespace dbe {

namespace {

constexpr int kMaxLoopNodes = 1 << 14;
constexpr int kMaxPairNodes = 1 << 12;

double band_clearance(const std::vector<double>& alpha, const std::vector<double>& beta,
                      std::size_t i) {
  const double c = 0.5 * (alpha[i] + beta[i]);
  double d = 1e300;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (j == i) continue;
    d = std::min(d, std::min(std::fabs(c - alpha[j]), std::fabs(c - beta[j])));
  }
  return d;
}

// total extent of the band system, used as the length scale
double band_span(const std::vector<double>& alpha, const std::vector<double>& beta) {
  return *std::max_element(beta.begin(), beta.end()) -
         *std::min_element(alpha.begin(), alpha.end());
}

void check_outside(const ContourSet& cs, cplx z, const char* what) {
  for (const auto& loop : cs.loops)
    if (std::abs(z - loop.center) <= loop.radius)
      throw std::invalid_argument(std::string(what) + ": evaluation point inside a contour");
}

// grow every loop, keeping clear of the other bands; used to separate the
// u and v families in double integrals
ContourSet inflate(const ContourSet& cs, const std::vector<double>& alpha,
                   const std::vector<double>& beta, double factor) {
  ContourSet out = cs;
  for (std::size_t i = 0; i < out.loops.size(); ++i) {
    const double limit = 0.97 * band_clearance(alpha, beta, i);
    out.loops[i].radius = std::min(out.loops[i].radius * factor, std::max(limit, out.loops[i].radius));
  }
  return out;
}

std::vector<cplx> solve_complex(std::vector<cplx> A, std::vector<cplx> b) {
  return solve_linear(std::move(A), std::move(b));
}

// period matrix of z^j / prod_branch_sqrt over the first k-1 loops
std::vector<cplx> period_matrix(const std::vector<double>& alpha,
                                const std::vector<double>& beta,
                                const ContourSet& contours) {
  const std::size_t k = alpha.size();
  std::vector<cplx> W((k - 1) * (k - 1));
  for (std::size_t i = 0; i + 1 < k; ++i) {
    for (std::size_t j = 0; j + 1 < k; ++j) {
      auto f = [&alpha, &beta, j](cplx z) {
        cplx m = 1.0;
        for (std::size_t p = 0; p < j; ++p) m *= z;
        return m / prod_branch_sqrt(alpha, beta, z);
      };
      W[i * (k - 1) + j] = loop_integral(contours.loops[i], f);
    }
  }
  return W;
}

}  // namespace

ContourSet make_contours(const std::vector<double>& alpha, const std::vector<double>& beta,
                         double pad) {
  if (alpha.size() != beta.size() || alpha.empty())
    throw std::invalid_argument("make_contours: endpoint lists must match and be nonempty");
  if (pad <= 0.0) throw std::invalid_argument("make_contours: pad must be positive");
  ContourSet cs;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] < beta[i]))
      throw std::invalid_argument("make_contours: alpha_i < beta_i required");
    Contour c;
    c.center = cplx(0.5 * (alpha[i] + beta[i]), 0.0);
    const double w = 0.5 * (beta[i] - alpha[i]);
    double r = (1.0 + pad) * w;
    const double limit = 0.95 * band_clearance(alpha, beta, i);
    r = std::min(r, limit);
    if (r <= w)
      throw std::runtime_error("make_contours: bands too close for circular loops");
    c.radius = r;
    cs.loops.push_back(c);
  }
  return cs;
}

cplx loop_integral(const Contour& c, const std::function<cplx(cplx)>& f, double rtol) {
  cplx prev = 0.0;
  double fscale = 0.0;
  for (int n = 32; n <= kMaxLoopNodes; n *= 2) {
    cplx acc = 0.0;
    for (int j = 0; j < n; ++j) {
      const cplx w = c.radius * std::exp(cplx(0.0, 2.0 * kPi * j / n));
      const cplx fv = f(c.center + w);
      fscale = std::max(fscale, std::abs(fv) * c.radius);
      acc += fv * w;
    }
    acc /= static_cast<double>(n);
    if (n > 32 && std::abs(acc - prev) <= rtol * std::abs(acc) + 1e-13 * fscale) return acc;
    prev = acc;
  }
  throw std::runtime_error("loop_integral: quadrature did not converge");
}

cplx prod_branch_sqrt(const std::vector<double>& alpha, const std::vector<double>& beta,
                      cplx z) {
  cplx acc = 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) acc *= branch_sqrt(z, alpha[i], beta[i]);
  return acc;
}

CovarianceKernel make_kernel(const SpectralData& sd, double theta, double pad) {
  CovarianceKernel kern;
  kern.alpha = sd.alpha;
  kern.beta = sd.beta;
  kern.H = sd.H;
  kern.contours = make_contours(sd.alpha, sd.beta, pad);
  kern.mode = sd.alpha.size() == 1 ? CovarianceKernel::Mode::one_cut_closed_form
                                   : CovarianceKernel::Mode::multi_cut_upsilon;
  kern.theta = theta;
  return kern;
}

std::vector<cplx> omega_map(const std::vector<cplx>& coeffs,
                            const std::vector<double>& alpha,
                            const std::vector<double>& beta, const ContourSet& contours) {
  const std::size_t k = alpha.size();
  if (k < 2) throw std::invalid_argument("omega_map: needs at least two bands");
  if (coeffs.size() > k - 1)
    throw std::invalid_argument("omega_map: polynomial degree exceeds k-2");
  if (contours.loops.size() != k)
    throw std::invalid_argument("omega_map: one loop per band required");
  std::vector<cplx> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    auto f = [&](cplx z) { return polyval(coeffs, z) / prod_branch_sqrt(alpha, beta, z); };
    out[i] = loop_integral(contours.loops[i], f);
  }
  return out;
}

double omega_condition(const std::vector<double>& alpha, const std::vector<double>& beta,
                       const ContourSet& contours) {
  const std::size_t k = alpha.size();
  if (k < 2) throw std::invalid_argument("omega_condition: needs at least two bands");
  const std::size_t n = k - 1;
  auto W = period_matrix(alpha, beta, contours);

  auto norm1 = [n](const std::vector<cplx>& M) {
    double best = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += std::abs(M[i * n + j]);
      best = std::max(best, s);
    }
    return best;
  };
  std::vector<cplx> inv(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<cplx> e(n, 0.0);
    e[j] = 1.0;
    auto col = solve_complex(W, e);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + j] = col[i];
  }
  return norm1(W) * norm1(inv);
}

std::function<cplx(cplx)> upsilon_apply(const std::function<cplx(cplx)>& f,
                                        const CovarianceKernel& kernel) {
  const std::size_t k = kernel.alpha.size();
  std::vector<cplx> I(k);
  double scale = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    I[i] = loop_integral(kernel.contours.loops[i], f);
    scale = std::max(scale, std::abs(I[i]));
  }
  cplx total = 0.0;
  for (const auto& v : I) total += v;
  if (std::abs(total) > 1e-6 * std::max(scale, 1e-12) + 1e-10)
    throw std::invalid_argument("upsilon_apply: loop integrals of f must sum to zero");
  if (k == 1) return f;

  auto W = period_matrix(kernel.alpha, kernel.beta, kernel.contours);
  std::vector<cplx> rhs(k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) rhs[i] = -I[i];
  auto coeffs = solve_complex(std::move(W), std::move(rhs));

  auto alpha = kernel.alpha;
  auto beta = kernel.beta;
  return [f, coeffs, alpha, beta](cplx z) {
    return f(z) + polyval(coeffs, z) / prod_branch_sqrt(alpha, beta, z);
  };
}

cplx kernel_one_cut(cplx u, cplx v, double a_minus, double a_plus) {
  if (!(a_minus < a_plus)) throw std::invalid_argument("kernel_one_cut: a_- < a_+ required");
  const double width = a_plus - a_minus;
  for (cplx p : {u, v})
    if (p.imag() == 0.0 && p.real() >= a_minus && p.real() <= a_plus)
      throw std::domain_error("kernel_one_cut: evaluation point on the cut");

  const cplx d = u - v;
  if (std::abs(d) < 1e-4 * width) {
    const cplx t = 0.5 * (u + v);
    const cplx q = (t - a_minus) * (t - a_plus);
    return width * width / (16.0 * q * q);
  }
  const cplx su = branch_sqrt(u, a_minus, a_plus);
  const cplx sv = branch_sqrt(v, a_minus, a_plus);
  const cplx p = u * v - 0.5 * (a_minus + a_plus) * (u + v) + a_minus * a_plus;
  return -(1.0 - p / (su * sv)) / (2.0 * d * d);
}

namespace {

// Printed covariance bracket: as a function of w it is the input of the
// loop-vanishing correction.  Evaluated through its analytic w -> z limit
// below the switchover distance.
cplx raw_bracket(const std::vector<double>& alpha, const std::vector<double>& beta,
                 double span, cplx z, cplx w) {
  if (std::abs(z - w) < 1e-4 * span) {
    const cplx m = 0.5 * (z + w);
    cplx S = 0.0, Sp = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      const cplx da = m - alpha[i], db = m - beta[i];
      S += 1.0 / da + 1.0 / db;
      Sp -= 1.0 / (da * da) + 1.0 / (db * db);
    }
    return 0.25 * Sp + 0.125 * S * S;
  }
  cplx S = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    S += 1.0 / (z - alpha[i]) + 1.0 / (z - beta[i]);
  const cplx ratio = prod_branch_sqrt(alpha, beta, z) / prod_branch_sqrt(alpha, beta, w);
  const cplx dzw = z - w;
  return 1.0 / (dzw * dzw) - ratio * (1.0 / (dzw * dzw) - S / (2.0 * dzw));
}

}  // namespace

cplx kernel_multi_cut(cplx z, cplx w, const CovarianceKernel& kernel) {
  check_outside(kernel.contours, z, "kernel_multi_cut");
  check_outside(kernel.contours, w, "kernel_multi_cut");
  const double span = band_span(kernel.alpha, kernel.beta);
  const std::size_t k = kernel.alpha.size();
  auto f = [&](cplx wp) { return raw_bracket(kernel.alpha, kernel.beta, span, z, wp); };
  if (k == 1) return -0.5 * f(w);
  auto fixed = upsilon_apply(f, kernel);
  return -0.5 * fixed(w);
}

double linear_stat_covariance(const std::function<cplx(cplx)>& f,
                              const std::function<cplx(cplx)>& g,
                              const CovarianceKernel& kernel) {
  const std::size_t k = kernel.alpha.size();
  const double span = band_span(kernel.alpha, kernel.beta);
  const ContourSet& inner = kernel.contours;
  const ContourSet outer = inflate(inner, kernel.alpha, kernel.beta, 1.12);

  cplx prev = 0.0;
  for (int n = 64; n <= kMaxPairNodes; n *= 2) {
    // quadrature nodes: u on the outer family, v on the inner one
    std::vector<cplx> un, uw, vn, vw;
    for (const auto& loop : outer.loops)
      for (int j = 0; j < n; ++j) {
        const cplx e = loop.radius * std::exp(cplx(0.0, 2.0 * kPi * j / n));
        un.push_back(loop.center + e);
        uw.push_back(e / static_cast<double>(n));
      }
    for (const auto& loop : inner.loops)
      for (int j = 0; j < n; ++j) {
        const cplx e = loop.radius * std::exp(cplx(0.0, 2.0 * kPi * j / n));
        vn.push_back(loop.center + e);
        vw.push_back(e / static_cast<double>(n));
      }

    cplx acc = 0.0;
    if (k == 1) {
      const double a = kernel.alpha[0], b = kernel.beta[0];
      for (std::size_t s = 0; s < un.size(); ++s) {
        const cplx fu = f(un[s]) * uw[s];
        cplx row = 0.0;
        for (std::size_t t = 0; t < vn.size(); ++t)
          row += g(vn[t]) * vw[t] * kernel_one_cut(un[s], vn[t], a, b);
        acc += fu * row;
      }
    } else {
      auto W = period_matrix(kernel.alpha, kernel.beta, inner);
      // moments of g against the correction basis z^j / prod_branch_sqrt
      std::vector<cplx> gm(k - 1, 0.0);
      for (std::size_t t = 0; t < vn.size(); ++t) {
        const cplx base = g(vn[t]) * vw[t] / prod_branch_sqrt(kernel.alpha, kernel.beta, vn[t]);
        cplx mono = 1.0;
        for (std::size_t j = 0; j + 1 < k; ++j) {
          gm[j] += base * mono;
          mono *= vn[t];
        }
      }
      for (std::size_t s = 0; s < un.size(); ++s) {
        const cplx fu = f(un[s]) * uw[s];
        // direct part and the per-loop integrals of the bracket in v
        cplx row = 0.0;
        std::vector<cplx> I(k, 0.0);
        std::size_t t = 0;
        for (std::size_t loop = 0; loop < k; ++loop)
          for (int j = 0; j < n; ++j, ++t) {
            const cplx br = raw_bracket(kernel.alpha, kernel.beta, span, un[s], vn[t]);
            row += g(vn[t]) * vw[t] * br;
            I[loop] += br * vw[t];
          }
        std::vector<cplx> rhs(k - 1);
        for (std::size_t i = 0; i + 1 < k; ++i) rhs[i] = -I[i];
        auto coeffs = solve_complex(W, std::move(rhs));
        for (std::size_t j = 0; j + 1 < k; ++j) row += coeffs[j] * gm[j];
        acc += fu * row;
      }
      acc *= -0.5;
    }

    if (n > 64 && std::abs(acc - prev) <= 1e-9 * std::abs(acc) + 1e-13)
      return acc.real() / kernel.theta;
    prev = acc;
  }
  throw std::runtime_error("linear_stat_covariance: quadrature did not converge");
}

cplx mean_correction(const CovarianceKernel& kernel, const SpectralData& sd,
                     const WeightModel& model, cplx u) {
  if (!model.varphi_plus || !model.varphi_minus)
    throw std::runtime_error("mean_correction: model lacks 1/N weight-ratio corrections");
  const std::size_t k = kernel.alpha.size();
  const double theta = model.theta;
  const ContourSet& inner = kernel.contours;
  const ContourSet outer = inflate(inner, kernel.alpha, kernel.beta, 1.18);
  check_outside(outer, u, "mean_correction");

  auto F = [&](cplx up) {
    cplx total = 0.0;
    for (const auto& loop : inner.loops) {
      auto integrand = [&](cplx z) {
        const cplx G = sd.G(z);
        const cplx Gp = sd.Gp(z);
        const cplx em = std::exp(-theta * G), ep = std::exp(theta * G);
        const cplx num = model.varphi_minus(z) * em + model.varphi_plus(z) * ep +
                         model.phi_minus(z) * em * (0.5 * theta * theta) * Gp +
                         model.phi_plus(z) * ep * (0.5 * theta * theta - theta) * Gp;
        return num / ((up - z) * sd.H(z));
      };
      total += loop_integral(loop, integrand);
    }
    return total / (theta * prod_branch_sqrt(kernel.alpha, kernel.beta, up));
  };

  if (k == 1) return F(u);

  std::vector<cplx> I(k);
  double scale = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    I[i] = loop_integral(outer.loops[i], F);
    scale = std::max(scale, std::abs(I[i]));
  }
  cplx total = 0.0;
  for (const auto& v : I) total += v;
  if (std::abs(total) > 1e-6 * std::max(scale, 1e-12) + 1e-10)
    throw std::runtime_error("mean_correction: loop integrals failed to cancel");
  auto W = period_matrix(kernel.alpha, kernel.beta, outer);
  std::vector<cplx> rhs(k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) rhs[i] = -I[i];
  auto coeffs = solve_complex(std::move(W), std::move(rhs));
  return F(u) + polyval(coeffs, u) / prod_branch_sqrt(kernel.alpha, kernel.beta, u);
}

}  // namespace dbe
