#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dbe {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// log(sum(exp(v))) guarded against empty input and -inf entries
inline double logsumexp(const std::vector<double>& v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v)
    if (x > m) m = x;
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// antiderivative pair for the logarithmic kernel:
//   psi'(u)  = ln|u|,        psi(u)  = u (ln|u| - 1)
//   Phi''(u) = ln|u|,        Phi(u)  = u^2/2 (ln|u| - 3/2)
inline double log_psi(double u) {
  if (u == 0.0) return 0.0;
  return u * (std::log(std::fabs(u)) - 1.0);
}

inline double log_Phi(double u) {
  if (u == 0.0) return 0.0;
  return 0.5 * u * u * (std::log(std::fabs(u)) - 1.5);
}

// \int_0^a dx \int_0^b dy ln|x - y + d|, exact
inline double cell_cell_log(double d, double a, double b) {
  return log_Phi(d + a) - log_Phi(d + a - b) - log_Phi(d) + log_Phi(d - b);
}

// \int_p^q ln|x - y| dy, exact
inline double point_cell_log(double x, double p, double q) {
  return log_psi(q - x) - log_psi(p - x);
}

// Gaussian elimination with partial pivoting; A is n x n row-major.
// Throws on (numerically) singular systems.
template <typename T>
std::vector<T> solve_linear(std::vector<T> A, std::vector<T> b) {
  const std::size_t n = b.size();
  if (A.size() != n * n) throw std::invalid_argument("solve_linear: shape");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(A[col * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      double m = std::abs(A[r * n + col]);
      if (m > best) {
        best = m;
        piv = r;
      }
    }
    if (best == 0.0) throw std::runtime_error("solve_linear: singular matrix");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(A[piv * n + c], A[col * n + c]);
      std::swap(b[piv], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      T f = A[r * n + col] / A[col * n + col];
      if (f == T{}) continue;
      for (std::size_t c = col; c < n; ++c) A[r * n + c] -= f * A[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<T> x(n);
  for (std::size_t ri = n; ri-- > 0;) {
    T acc = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) acc -= A[ri * n + c] * x[c];
    x[ri] = acc / A[ri * n + ri];
  }
  return x;
}

// least-squares polynomial fit sum_k c_k z^k of degree deg through (z_i, f_i)
inline std::vector<cplx> polyfit(const std::vector<cplx>& z,
                                 const std::vector<cplx>& f, int deg) {
  const std::size_t n = z.size();
  const std::size_t m = static_cast<std::size_t>(deg) + 1;
  if (f.size() != n || n < m) throw std::invalid_argument("polyfit: sizes");
  // normal equations on the (well-conditioned for our circle nodes) Vandermonde
  std::vector<cplx> AtA(m * m), Atb(m);
  std::vector<cplx> pw(m);
  for (std::size_t i = 0; i < n; ++i) {
    pw[0] = 1.0;
    for (std::size_t k = 1; k < m; ++k) pw[k] = pw[k - 1] * z[i];
    for (std::size_t r = 0; r < m; ++r) {
      Atb[r] += std::conj(pw[r]) * f[i];
      for (std::size_t c = 0; c < m; ++c) AtA[r * m + c] += std::conj(pw[r]) * pw[c];
    }
  }
  return solve_linear(AtA, Atb);
}

inline cplx polyval(const std::vector<cplx>& coeff, cplx z) {
  cplx acc = 0.0;
  for (std::size_t k = coeff.size(); k-- > 0;) acc = acc * z + coeff[k];
  return acc;
}

// composite Simpson on [a,b] with n panels (n>=1)
template <typename F>
double simpson(F&& f, double a, double b, int n) {
  double h = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double x0 = a + i * h;
    s += f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h);
  }
  return s * h / 6.0;
}

// binomial coefficient as double (exact for the small counts we enumerate)
inline double binom(long long n, long long k) {
  if (k < 0 || k > n) return 0.0;
  if (k > n - k) k = n - k;
  double r = 1.0;
  for (long long i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// sqrt((z-alpha)(z-beta)) with branch cut on [alpha,beta] and ~ z at infinity
inline cplx branch_sqrt(cplx z, double alpha, double beta) {
  return std::exp(0.5 * (std::log(z - alpha) + std::log(z - beta)));
}

// residue of f at center via trapezoidal contour quadrature (exponentially
// accurate for meromorphic f when the circle encloses only this pole)
template <typename F>
cplx contour_residue(F&& f, cplx center, double radius, int n = 64) {
  cplx acc = 0.0;
  for (int j = 0; j < n; ++j) {
    cplx w = radius * std::exp(cplx(0.0, 2.0 * kPi * j / n));
    acc += f(center + w) * w;
  }
  return acc / static_cast<double>(n);
}

// max deviation of f from its own degree-deg polynomial fit, sampled on a
// circle of the given radius about center; near zero iff f is polynomial
template <typename F>
double poly_fit_residual(F&& f, cplx center, double radius, int deg) {
  int n = 4 * (deg + 2);
  std::vector<cplx> zs, fs;
  for (int j = 0; j < n; ++j) {
    cplx z = center + radius * std::exp(cplx(0.0, 2.0 * kPi * j / n));
    zs.push_back(z);
    fs.push_back(f(z));
  }
  auto coeff = polyfit(zs, fs, deg);
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    cplx z = center + radius * std::exp(cplx(0.0, 2.0 * kPi * (j + 0.5) / n));
    worst = std::max(worst, std::abs(f(z) - polyval(coeff, z)));
  }
  return worst;
}

// log Gamma(z) for complex z, Lanczos g=7 with reflection for Re z < 1/2.
// The imaginary part is only defined mod 2*pi*i on the reflected half plane;
// all callers use the real part (|Gamma|) or differences in the right half.
inline cplx lgamma_complex(cplx z) {
  static const double kl[9] = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  if (z.real() < 0.5) {
    return std::log(kPi) - std::log(std::sin(kPi * z)) - lgamma_complex(1.0 - z);
  }
  z -= 1.0;
  cplx a = kl[0];
  cplx t = z + 7.5;
  for (int i = 1; i < 9; ++i) a += kl[i] / (z + static_cast<double>(i));
  return 0.5 * std::log(2.0 * kPi) + (z + 0.5) * std::log(t) - t + std::log(a);
}

}  // namespace dbe
