#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "dbe/equilibrium.hpp"
#include "dbe/models.hpp"

namespace dbe {

// Positively oriented circular quadrature contour.
struct Contour {
  cplx center;
  double radius = 0.0;
};

// One loop per band; loop i encloses [alpha_i, beta_i] and keeps every other
// band strictly outside.
struct ContourSet {
  std::vector<Contour> loops;
};

// Loop radius is (1 + pad) * band half-width, shrunk if needed to stay clear
// of neighboring bands.  Throws if the bands are too close for circles.
ContourSet make_contours(const std::vector<double>& alpha,
                         const std::vector<double>& beta, double pad = 0.5);

// (1/2pi i) oint f dz, trapezoidal nodes doubled from 32 until the change
// drops below rtol; throws if 2^14 nodes do not suffice.
cplx loop_integral(const Contour& c, const std::function<cplx(cplx)>& f,
                   double rtol = 1e-9);

// sqrt(prod_i (z-alpha_i)(z-beta_i)) with branch ~ z^k at infinity
cplx prod_branch_sqrt(const std::vector<double>& alpha,
                      const std::vector<double>& beta, cplx z);

struct CovarianceKernel {
  enum class Mode { one_cut_closed_form, multi_cut_upsilon };

  std::vector<double> alpha, beta;   // band endpoints
  std::function<cplx(cplx)> H;       // nonvanishing factor of Q on the bands
  ContourSet contours;
  Mode mode = Mode::one_cut_closed_form;
  double theta = 1.0;
};

CovarianceKernel make_kernel(const SpectralData& sd, double theta,
                             double pad = 0.5);

// i-th entry: (1/2pi i) oint_{loop i} P(z) dz / prod_branch_sqrt(z).
// P is given by coeffs (lowest degree first, length <= k-1); the entries sum
// to zero since the integrand has no residue at infinity.
std::vector<cplx> omega_map(const std::vector<cplx>& coeffs,
                            const std::vector<double>& alpha,
                            const std::vector<double>& beta,
                            const ContourSet& contours);

// 1-norm condition number of the (k-1)x(k-1) period matrix inverted inside
// upsilon_apply
double omega_condition(const std::vector<double>& alpha,
                       const std::vector<double>& beta,
                       const ContourSet& contours);

// f(z) + P(z)/prod_branch_sqrt(z) with deg P <= k-2 chosen so that every
// loop integral of the result vanishes.  Requires the loop integrals of f
// to sum to zero; the identity for k = 1.
std::function<cplx(cplx)> upsilon_apply(const std::function<cplx(cplx)>& f,
                                        const CovarianceKernel& kernel);

// Limit covariance of the centered Stieltjes fields N G_N(u), N G_N(v) for a
// one-band measure, up to the overall 1/theta:
//   -1/(2(u-v)^2) * (1 - (uv - (a_-+a_+)(u+v)/2 + a_-a_+)/(s(u)s(v))),
// s(x) = sqrt((x-a_-)(x-a_+)).  The u = v value is the analytic limit
// (a_+-a_-)^2 / (16 ((u-a_-)(u-a_+))^2), used below the switchover distance
// 1e-4 * (a_+-a_-).
cplx kernel_one_cut(cplx u, cplx v, double a_minus, double a_plus);

// Multi-band covariance kernel via the loop-vanishing correction in w.  The
// printed bracket integrates to a sign-flipped, doubled covariance; the
// returned value carries the compensating -1/2 so that k = 1 reduces exactly
// to kernel_one_cut and linear statistics come out with positive variance.
cplx kernel_multi_cut(cplx z, cplx w, const CovarianceKernel& kernel);

// Covariance of the centered linear statistics sum_i f(l_i/N) and
// sum_i g(l_i/N):  theta^{-1} (1/2pi i)^2 oint oint f(u) g(v) C(u,v) du dv.
// The 1/theta prefactor is applied here, exactly once.
double linear_stat_covariance(const std::function<cplx(cplx)>& f,
                              const std::function<cplx(cplx)>& g,
                              const CovarianceKernel& kernel);

// Second-order correction to the mean Stieltjes transform:
// N (E[G_N(u)] - G_mu(u)) converges to this along subsequences with
// stable 1/N weight corrections.  Needs varphi_plus/varphi_minus from the
// model; throws if they are absent.
cplx mean_correction(const CovarianceKernel& kernel, const SpectralData& sd,
                     const WeightModel& model, cplx u);

}  // namespace dbe
