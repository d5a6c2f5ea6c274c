#include "dbe/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dbe {
namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("models: " + msg);
}

long long iround(double x) { return std::llround(x); }

double frac_part(double theta) { return theta - std::floor(theta); }

double xlogx(double t) { return t > 0.0 ? t * std::log(t) : 0.0; }

double poly_eval(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) acc = acc * x + c[k];
  return acc;
}

cplx poly_eval(const std::vector<double>& c, cplx x) {
  cplx acc = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) acc = acc * x + c[k];
  return acc;
}

std::vector<double> poly_derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t k = 1; k < c.size(); ++k) d.push_back(static_cast<double>(k) * c[k]);
  if (d.empty()) d.push_back(0.0);
  return d;
}

// splits N particles over intervals proportionally to frac (largest remainder)
std::vector<int> apportion(const std::vector<double>& frac, int N) {
  double total = std::accumulate(frac.begin(), frac.end(), 0.0);
  require(total > 0.0, "filling fractions must have positive sum");
  std::vector<int> n(frac.size());
  std::vector<std::pair<double, std::size_t>> rem(frac.size());
  int assigned = 0;
  for (std::size_t i = 0; i < frac.size(); ++i) {
    double quota = frac[i] / total * N;
    n[i] = static_cast<int>(std::floor(quota));
    assigned += n[i];
    rem[i] = {quota - n[i], i};
  }
  std::sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (int j = 0; j < N - assigned; ++j) n[rem[static_cast<std::size_t>(j)].second] += 1;
  for (std::size_t i = 0; i < n.size(); ++i)
    require(n[i] >= 1, "interval " + std::to_string(i) + " received no particles");
  return n;
}

// five-point central difference, adequate for smooth lgamma-built potentials
std::function<double(double)> diff5(std::function<double(double)> f) {
  return [f](double x) {
    double h = 1e-4 * std::max(1.0, std::fabs(x));
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
  };
}

BuiltModel build_krawtchouk(const ModelPreset& p, int N) {
  const double theta = p.theta;
  long long J;
  if (p.M_override >= 0) {
    double j_real = static_cast<double>(p.M_override) - theta * (N - 1);
    J = iround(j_real);
    require(std::fabs(j_real - J) <= 1e-9, "M_override incompatible with theta lattice");
  } else {
    J = iround(p.m * N - theta * (N - 1));
  }
  require(J >= 1, "krawtchouk: m too small for this theta and N");
  const double Mq = theta * (N - 1) + static_cast<double>(J);
  const double mhat = Mq / N;
  const double fr = frac_part(theta);

  StateSpaceSpec spec(theta, {{-fr, Mq}}, {N});

  WeightModel w;
  w.name = "krawtchouk";
  w.family = Family::krawtchouk;
  w.theta = theta;
  w.N = N;
  w.log_weight = [Mq](double x) {
    return std::lgamma(Mq + 1.0) - std::lgamma(x + 1.0) - std::lgamma(Mq + 1.0 - x);
  };
  w.log_ratio = [Mq](double x) { return std::log(Mq + 1.0 - x) - std::log(x); };
  double Nd = N;
  w.phi_minus_N = [Nd](cplx xi) { return xi / Nd; };
  w.phi_plus_N = [Mq, Nd](cplx xi) { return (Mq + 1.0 - xi) / Nd; };
  w.phi_minus = [](cplx z) { return z; };
  w.phi_plus = [mhat](cplx z) { return mhat - z; };
  w.varphi_minus = [](cplx) { return cplx(0.0); };
  w.varphi_plus = [](cplx) { return cplx(1.0); };
  w.V = [mhat](double x) { return xlogx(x) + xlogx(mhat - x); };
  w.Vprime = [mhat](double x) {
    double lo = 1e-12, hi = mhat - 1e-12;
    x = std::min(std::max(x, lo), hi);
    return std::log(x) - std::log(mhat - x);
  };
  w.polynomial_phi = true;
  w.phi_degree = 1;
  w.support_a = {0.0};
  w.support_b = {mhat};
  w.fill_frac = {1.0};
  w.truncation_D = 0.0;
  if (theta == 1.0) w.int_params = {iround(Mq)};
  return {std::move(spec), std::move(w)};
}

BuiltModel build_multicut(const ModelPreset& p, int N) {
  const double theta = p.theta;
  const std::size_t k = p.cut_a.size();
  require(k >= 1 && p.cut_b.size() == k && p.cut_fill.size() == k,
          "multicut: need matching interval and filling lists");
  std::vector<double> gauge = p.cut_gauge;
  if (gauge.empty()) gauge.assign(k, 0.0);
  require(gauge.size() == k, "multicut: gauge list size mismatch");

  std::vector<int> n = apportion(p.cut_fill, N);
  const double fr = frac_part(theta);
  const long long fl = static_cast<long long>(std::floor(theta));

  std::vector<double> L(k), B(k);
  std::vector<Interval> ivs;
  for (std::size_t i = 0; i < k; ++i) {
    require(p.cut_b[i] > p.cut_a[i], "multicut: interval " + std::to_string(i) + " is empty");
    long long Li = iround(N * p.cut_a[i]);
    long long Ki = iround(N * (p.cut_b[i] - p.cut_a[i]) - theta * n[i]);
    require(Ki >= 0, "multicut: interval " + std::to_string(i) + " too short for its filling");
    L[i] = static_cast<double>(Li);
    B[i] = L[i] + static_cast<double>(Ki + fl) + theta * (n[i] - 1);
    ivs.push_back({L[i] - fr, L[i] - fr + theta * n[i] + static_cast<double>(Ki)});
  }
  StateSpaceSpec spec(theta, ivs, n);

  const double sign = (k % 2 == 1) ? 1.0 : -1.0;
  const double Nd = N;
  std::vector<double> gaugeN(k);
  for (std::size_t i = 0; i < k; ++i) gaugeN[i] = Nd * gauge[i];

  WeightModel w;
  w.name = "multicut_krawtchouk";
  w.family = Family::multicut_krawtchouk;
  w.theta = theta;
  w.N = N;
  // Per interval the weight is gamma-built so that consecutive-slot ratios
  // reproduce prod_j (B_j+1-x)/(x-L_j); factors from intervals already passed
  // (or not yet reached) use the reflected gamma to stay finite and positive.
  w.log_weight = [L, B, gaugeN, k](double x) {
    std::size_t own = k;
    for (std::size_t i = 0; i < k; ++i)
      if (x >= L[i] - 0.25 && x <= B[i] + 0.25) own = i;
    if (own == k) return -std::numeric_limits<double>::infinity();
    double s = gaugeN[own];
    for (std::size_t j = 0; j < k; ++j) {
      if (j == own) {
        s += -std::lgamma(x - L[j] + 1.0) - std::lgamma(B[j] + 1.0 - x);
      } else if (j < own) {
        s += -std::lgamma(x - L[j] + 1.0) + std::lgamma(x - B[j]);
      } else {
        s += std::lgamma(L[j] - x) - std::lgamma(B[j] + 1.0 - x);
      }
    }
    return s;
  };
  w.log_ratio = [L, B, k](double x) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      s += std::log(std::fabs(B[j] + 1.0 - x)) - std::log(std::fabs(x - L[j]));
    return s;
  };
  w.phi_minus_N = [L, k, Nd](cplx xi) {
    cplx prod = 1.0;
    for (std::size_t j = 0; j < k; ++j) prod *= (xi - L[j]) / Nd;
    return prod;
  };
  w.phi_plus_N = [B, k, Nd, sign](cplx xi) {
    cplx prod = sign;
    for (std::size_t j = 0; j < k; ++j) prod *= (B[j] + 1.0 - xi) / Nd;
    return prod;
  };
  std::vector<double> Lh(k), Bh(k);
  for (std::size_t i = 0; i < k; ++i) {
    Lh[i] = L[i] / Nd;
    Bh[i] = (B[i] + 1.0) / Nd;
  }
  w.phi_minus = [Lh, k](cplx z) {
    cplx prod = 1.0;
    for (std::size_t j = 0; j < k; ++j) prod *= z - Lh[j];
    return prod;
  };
  w.phi_plus = [Bh, k, sign](cplx z) {
    cplx prod = sign;
    for (std::size_t j = 0; j < k; ++j) prod *= Bh[j] - z;
    return prod;
  };
  w.varphi_minus = [](cplx) { return cplx(0.0); };
  w.varphi_plus = [](cplx) { return cplx(0.0); };
  auto lw = w.log_weight;
  w.V = [lw, Nd](double x) { return -lw(Nd * x) / Nd; };
  w.Vprime = diff5(w.V);
  w.polynomial_phi = true;
  w.phi_degree = static_cast<int>(k);
  for (std::size_t i = 0; i < k; ++i) {
    w.support_a.push_back(L[i] / Nd);
    w.support_b.push_back(B[i] / Nd);
    w.fill_frac.push_back(static_cast<double>(n[i]) / Nd);
  }
  w.truncation_D = 0.0;
  if (theta == 1.0) {
    w.int_params.push_back(static_cast<long long>(k));
    for (std::size_t i = 0; i < k; ++i) w.int_params.push_back(iround(L[i]));
    for (std::size_t i = 0; i < k; ++i) w.int_params.push_back(iround(B[i]));
  }
  return {std::move(spec), std::move(w)};
}

struct HahnCore {
  long long Bi = 0, Ci = 0, ti = 0;
  double scale = 0.0;
};

HahnCore hahn_ints(const ModelPreset& p, int N) {
  require(p.B_hat > 0 && p.C_hat > 0 && p.t_hat > 0, "hexagon sides must be positive");
  double s = p.B_hat + p.C_hat - p.t_hat;
  require(s > 0, "hexagon sides require B + C > t");
  HahnCore h;
  h.scale = N / s;
  h.Bi = iround(p.B_hat * h.scale);
  h.Ci = iround(p.C_hat * h.scale);
  h.ti = iround(p.t_hat * h.scale);
  require(h.ti - h.Bi >= 1 && h.ti - h.Ci >= 1, "hexagon requires t > max(B, C)");
  require(h.Bi >= 1 && h.Ci >= 1, "hexagon sides too small at this N");
  return h;
}

BuiltModel build_hahn(const ModelPreset& p, int N) {
  const double theta = p.theta;
  HahnCore h = hahn_ints(p, N);
  const double Bd = static_cast<double>(h.Bi), Cd = static_cast<double>(h.Ci),
               td = static_cast<double>(h.ti);
  long long J = iround(p.A_hat * h.scale + Bd + Cd - td - 1.0 - theta * (N - 1));
  require(J >= 0, "hahn: hexagon too small for this N and theta");
  const double btop = 1.0 + theta * (N - 1) + static_cast<double>(J);
  const double A = btop + td - Bd - Cd;
  require(A > 0, "hahn: derived A parameter not positive");
  const double fr = frac_part(theta);

  StateSpaceSpec spec(theta, {{1.0 - fr, btop}}, {N});

  WeightModel w;
  w.name = "hahn_hexagon";
  w.family = Family::hahn_hexagon;
  w.theta = theta;
  w.N = N;
  w.log_weight = [A, Bd, Cd, td](double x) {
    return std::lgamma(A + Cd + 1.0 - x) - std::lgamma(A + Bd + Cd + 1.0 - td - x) +
           std::lgamma(x + td - Cd) - std::lgamma(x);
  };
  w.log_ratio = [A, Bd, Cd, td](double x) {
    return std::log(x + td - Cd - 1.0) + std::log(A + Bd + Cd + 1.0 - td - x) -
           std::log(x - 1.0) - std::log(A + Cd + 1.0 - x);
  };
  const double Nd = N;
  w.phi_plus_N = [A, Bd, Cd, td, Nd](cplx xi) {
    return (xi + td - Cd - 1.0) * (A + Bd + Cd + 1.0 - td - xi) / (Nd * Nd);
  };
  w.phi_minus_N = [A, Cd, Nd](cplx xi) {
    return (xi - 1.0) * (A + Cd + 1.0 - xi) / (Nd * Nd);
  };
  const double c1 = (td - Cd - 1.0) / Nd, c2 = (btop + 1.0) / Nd;
  const double c3 = 1.0 / Nd, c4 = (A + Cd + 1.0) / Nd;
  w.phi_plus = [c1, c2](cplx z) { return (z + c1) * (c2 - z); };
  w.phi_minus = [c3, c4](cplx z) { return (z - c3) * (c4 - z); };
  w.varphi_plus = [](cplx) { return cplx(0.0); };
  w.varphi_minus = [](cplx) { return cplx(0.0); };
  auto lw = w.log_weight;
  const double xlo = 1.0, xhi = btop;
  w.V = [lw, Nd, xlo, xhi](double x) {
    double xi = std::min(std::max(x * Nd, xlo), xhi);
    return -lw(xi) / Nd;
  };
  w.Vprime = diff5(w.V);
  w.polynomial_phi = true;
  w.phi_degree = 2;
  w.support_a = {1.0 / Nd};
  w.support_b = {btop / Nd};
  w.fill_frac = {1.0};
  w.truncation_D = 0.0;
  if (theta == 1.0) w.int_params = {h.Bi, h.Ci, h.ti, iround(btop), iround(A)};
  return {std::move(spec), std::move(w)};
}

BuiltModel build_hole(const ModelPreset& p, int N) {
  const double theta = p.theta;
  HahnCore h = hahn_ints(p, N);
  const double Bd = static_cast<double>(h.Bi), Cd = static_cast<double>(h.Ci),
               td = static_cast<double>(h.ti);
  require(p.D_hat > 0 && p.H_hat > 0, "hexagon_hole: need H and D");
  int n1 = static_cast<int>(std::min<long long>(N - 1, std::max<long long>(1, iround(p.n1_frac * N))));
  int n2 = N - n1;

  long long J1 = iround(p.H_hat * h.scale - 2.0 - theta * (n1 - 1));
  require(J1 >= 0, "hexagon_hole: hole too close to the left edge for n1");
  const double Hq = 2.0 + theta * (n1 - 1) + static_cast<double>(J1);
  long long D = iround(p.D_hat * h.scale);
  require(D >= 1, "hexagon_hole: hole width rounds to zero");
  const double fr = frac_part(theta);
  require(static_cast<double>(D) + 1.0 - fr >= theta - 1e-9,
          "hexagon_hole: hole narrower than the interaction range");
  long long J2 =
      iround((p.A_hat + p.B_hat + p.C_hat - p.t_hat) * h.scale - (Hq + D) - theta * (n2 - 1));
  require(J2 >= 0, "hexagon_hole: hexagon too small beyond the hole");
  const double B2 = Hq + static_cast<double>(D) + theta * (n2 - 1) + static_cast<double>(J2);
  const double A = B2 + td - Bd - Cd;
  require(A > 0, "hexagon_hole: derived A parameter not positive");

  StateSpaceSpec spec(theta, {{1.0 - fr, Hq - 1.0}, {Hq + D - fr, B2}}, {n1, n2});

  const double Dd = static_cast<double>(D);
  auto hole_part = [Hq, Dd](double x) {
    if (x < Hq) return 2.0 * (std::lgamma(Hq - x + Dd) - std::lgamma(Hq - x));
    return 2.0 * (std::lgamma(x - Hq + 1.0) - std::lgamma(x - Hq - Dd + 1.0));
  };

  WeightModel w;
  w.name = "hexagon_hole";
  w.family = Family::hexagon_hole;
  w.theta = theta;
  w.N = N;
  w.log_weight = [A, Bd, Cd, td, hole_part](double x) {
    return std::lgamma(A + Cd + 1.0 - x) - std::lgamma(A + Bd + Cd + 1.0 - td - x) +
           std::lgamma(x + td - Cd) - std::lgamma(x) + hole_part(x);
  };
  w.log_ratio = [A, Bd, Cd, td, Hq, Dd](double x) {
    return std::log(x + td - Cd - 1.0) + std::log(A + Bd + Cd + 1.0 - td - x) -
           std::log(x - 1.0) - std::log(A + Cd + 1.0 - x) +
           2.0 * (std::log(std::fabs(Hq - x)) - std::log(std::fabs(Hq + Dd - x)));
  };
  const double Nd = N;
  w.phi_plus_N = [A, Bd, Cd, td, Hq, Nd](cplx xi) {
    cplx q = Hq - xi;
    return (xi + td - Cd - 1.0) * (A + Bd + Cd + 1.0 - td - xi) * q * q / (Nd * Nd * Nd * Nd);
  };
  w.phi_minus_N = [A, Cd, Hq, Dd, Nd](cplx xi) {
    cplx q = Hq + Dd - xi;
    return (xi - 1.0) * (A + Cd + 1.0 - xi) * q * q / (Nd * Nd * Nd * Nd);
  };
  const double c1 = (td - Cd - 1.0) / Nd, c2 = (B2 + 1.0) / Nd, cH = Hq / Nd;
  const double c3 = 1.0 / Nd, c4 = (A + Cd + 1.0) / Nd, cHD = (Hq + Dd) / Nd;
  w.phi_plus = [c1, c2, cH](cplx z) {
    cplx q = cH - z;
    return (z + c1) * (c2 - z) * q * q;
  };
  w.phi_minus = [c3, c4, cHD](cplx z) {
    cplx q = cHD - z;
    return (z - c3) * (c4 - z) * q * q;
  };
  w.varphi_plus = [](cplx) { return cplx(0.0); };
  w.varphi_minus = [](cplx) { return cplx(0.0); };
  auto lw = w.log_weight;
  w.V = [lw, Nd](double x) { return -lw(Nd * x) / Nd; };
  w.Vprime = diff5(w.V);
  w.polynomial_phi = true;
  w.phi_degree = 4;
  w.support_a = {1.0 / Nd, (Hq + Dd) / Nd};
  w.support_b = {(Hq - 1.0) / Nd, B2 / Nd};
  w.fill_frac = {n1 / Nd, n2 / Nd};
  w.truncation_D = 0.0;
  if (theta == 1.0)
    w.int_params = {h.Bi, h.Ci, h.ti, iround(B2), iround(A), iround(Hq), D};
  return {std::move(spec), std::move(w)};
}

double convex_core_radius(const ModelPreset& p) {
  auto d = poly_derivative(p.V_coeffs);
  auto Vp = [&d](double x) { return poly_eval(d, x); };
  // band radius estimate: solve kappa V'(x) x = 4 theta on both sides
  auto solve_side = [&](double sgn) {
    double hi = 1e-6;
    for (int it = 0; it < 400 && p.kappa * Vp(sgn * hi) * sgn * hi < 4.0 * p.theta; ++it) hi *= 1.3;
    double lo = 1e-9;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      if (p.kappa * Vp(sgn * mid) * sgn * mid < 4.0 * p.theta)
        lo = mid;
      else
        hi = mid;
    }
    return hi;
  };
  return std::max(solve_side(1.0), solve_side(-1.0));
}

double convex_truncation(const ModelPreset& p) {
  const auto& c = p.V_coeffs;
  auto V = [&c](double x) { return poly_eval(c, x); };
  // growth radius: kappa V dominates the 2 theta log attraction with margin
  double x0 = 1.0;
  for (int it = 0; it < 400; ++it) {
    double bar = 2.0 * p.theta * (1.0 + p.eps_tail) * std::log(x0 + 1.0) + 4.0 * p.theta;
    if (p.kappa * V(x0) > bar && p.kappa * V(-x0) > bar) break;
    x0 *= 1.2;
  }
  return p.safety * std::max({x0, 2.0 * convex_core_radius(p), 1.0, p.theta});
}

BuiltModel build_convex(const ModelPreset& p, int N) {
  const double theta = p.theta;
  const auto& c = p.V_coeffs;
  require(c.size() >= 3, "convex potential must have degree >= 2");
  require(c.size() % 2 == 1, "convex potential must have even degree");
  require(c.back() > 0, "convex potential must have positive leading coefficient");
  auto d = poly_derivative(c);
  auto dd = poly_derivative(d);
  for (int i = 0; i <= 2000; ++i) {
    double x = -50.0 + 0.05 * i;
    require(poly_eval(dd, x) > 0, "potential is not convex");
  }

  const double D = convex_truncation(p);
  const double Nd = N;
  long long a_int = -iround(D * Nd);
  long long K = iround(2.0 * D * Nd - theta * Nd);
  require(K >= 0, "convex: truncation window shorter than the packed configuration");
  const double a = static_cast<double>(a_int);
  const double b = a + theta * Nd + static_cast<double>(K);
  StateSpaceSpec spec(theta, {{a, b}}, {N});

  const double kap = p.kappa;
  WeightModel w;
  w.name = "convex_potential";
  w.family = Family::convex_potential;
  w.theta = theta;
  w.N = N;
  w.log_weight = [c, kap, Nd](double x) { return -kap * Nd * poly_eval(c, x / Nd); };
  w.log_ratio = [c, kap, Nd](double x) {
    return -kap * Nd * (poly_eval(c, x / Nd) - poly_eval(c, (x - 1.0) / Nd));
  };
  w.phi_minus_N = [](cplx) { return cplx(1.0); };
  w.phi_plus_N = [c, kap, Nd](cplx xi) {
    return std::exp(-kap * Nd * (poly_eval(c, xi / Nd) - poly_eval(c, (xi - 1.0) / Nd)));
  };
  w.phi_minus = [](cplx) { return cplx(1.0); };
  w.phi_plus = [d, kap](cplx z) { return std::exp(-kap * poly_eval(d, z)); };
  w.varphi_minus = [](cplx) { return cplx(0.0); };
  w.varphi_plus = [d, dd, kap](cplx z) {
    return 0.5 * kap * poly_eval(dd, z) * std::exp(-kap * poly_eval(d, z));
  };
  w.V = [c, kap](double x) { return kap * poly_eval(c, x); };
  w.Vprime = [d, kap](double x) { return kap * poly_eval(d, x); };
  w.polynomial_phi = false;
  w.phi_degree = 0;
  w.support_a = {-D};
  w.support_b = {D};
  w.fill_frac = {1.0};
  w.truncation_D = D;
  return {std::move(spec), std::move(w)};
}

double zw_band_radius(const ModelPreset& p) {
  // outer edge of the equilibrium bands from Q^2 = R^2 - 4 phi+ phi-
  double A = 2.0 * (p.w_inf.real() - p.z_inf.real());
  double Bc = std::norm(p.z_inf) + std::norm(p.w_inf) -
              p.theta * 2.0 * (p.z_inf.real() + p.w_inf.real()) + 2.0 * p.theta * p.theta;
  auto R = [A, Bc](double x) { return 2.0 * x * x + A * x + Bc; };
  auto pp = [&p](double x) {
    return std::norm(cplx(x, 0.0) - p.z_inf) * std::norm(cplx(x, 0.0) + p.w_inf);
  };
  double band = 1.0;
  for (int it = 0; it < 200; ++it) {
    double q = R(band) * R(band) - 4.0 * pp(band);
    double qm = R(-band) * R(-band) - 4.0 * pp(-band);
    if (q > 0 && qm > 0) break;
    band *= 1.25;
  }
  return band;
}

double zw_truncation(const ModelPreset& p) {
  double cdec = 2.0 * (p.z_inf.real() + p.w_inf.real()) - 2.0 * p.theta;
  double x0 = std::exp(8.0 / cdec);
  return p.safety * std::max({x0, 2.0 * zw_band_radius(p), 1.0, p.theta});
}

BuiltModel build_zw(const ModelPreset& p, int N) {
  const double theta = p.theta;
  require(p.z_inf.imag() != 0.0 && p.w_inf.imag() != 0.0,
          "zw: z and w must be non-real (conjugate pairs are implicit)");
  require(p.z_inf.real() + p.w_inf.real() > theta + 1e-9,
          "zw: need Re(z + w) > theta for a tight particle system");

  const double D = zw_truncation(p);
  const double Nd = N;
  long long a_int = -iround(D * Nd);
  long long K = iround(2.0 * D * Nd - theta * Nd);
  require(K >= 0, "zw: truncation window shorter than the packed configuration");
  const double a = static_cast<double>(a_int);
  const double b = a + theta * Nd + static_cast<double>(K);
  StateSpaceSpec spec(theta, {{a, b}}, {N});

  const cplx zN = p.z_inf * Nd, wN = p.w_inf * Nd;
  const cplx zi = p.z_inf, wi = p.w_inf;
  WeightModel w;
  w.name = "zw_measure";
  w.family = Family::zw_measure;
  w.theta = theta;
  w.N = N;
  w.log_weight = [zN, wN](double x) {
    return -2.0 * lgamma_complex(zN - x).real() - 2.0 * lgamma_complex(wN + x).real();
  };
  w.log_ratio = [zN, wN](double x) {
    return 2.0 * std::log(std::abs(x - zN)) - 2.0 * std::log(std::abs(x + wN - 1.0));
  };
  w.phi_plus_N = [zN, Nd](cplx xi) { return (xi - zN) * (xi - std::conj(zN)) / (Nd * Nd); };
  w.phi_minus_N = [wN, Nd](cplx xi) {
    return (xi + wN - 1.0) * (xi + std::conj(wN) - 1.0) / (Nd * Nd);
  };
  w.phi_plus = [zi](cplx z) { return (z - zi) * (z - std::conj(zi)); };
  w.phi_minus = [wi](cplx z) { return (z + wi) * (z + std::conj(wi)); };
  w.varphi_plus = [](cplx) { return cplx(0.0); };
  w.varphi_minus = [wi, Nd](cplx z) { return -(2.0 * z + 2.0 * wi.real()) + 1.0 / Nd; };
  w.V = [zi, wi](double x) {
    auto g = [](cplx s) { return 2.0 * (s * std::log(s) - s); };
    return (g(zi - x) + g(wi + x)).real();
  };
  w.Vprime = [zi, wi](double x) {
    return 2.0 * std::log(std::abs(wi + x)) - 2.0 * std::log(std::abs(zi - x));
  };
  w.polynomial_phi = true;
  w.phi_degree = 2;
  const double core = std::min(D, std::max(1.0, 2.0 * zw_band_radius(p)));
  w.support_a = {-D};
  w.support_b = {D};
  w.eq_a = {-core};
  w.eq_b = {core};
  w.fill_frac = {1.0};
  w.truncation_D = D;
  return {std::move(spec), std::move(w)};
}

}  // namespace

Family family_from_string(const std::string& s) {
  if (s == "krawtchouk") return Family::krawtchouk;
  if (s == "multicut_krawtchouk") return Family::multicut_krawtchouk;
  if (s == "hahn_hexagon") return Family::hahn_hexagon;
  if (s == "hexagon_hole") return Family::hexagon_hole;
  if (s == "convex_potential") return Family::convex_potential;
  if (s == "zw_measure") return Family::zw_measure;
  throw std::invalid_argument("unknown model family: " + s);
}

std::string to_string(Family f) {
  switch (f) {
    case Family::krawtchouk: return "krawtchouk";
    case Family::multicut_krawtchouk: return "multicut_krawtchouk";
    case Family::hahn_hexagon: return "hahn_hexagon";
    case Family::hexagon_hole: return "hexagon_hole";
    case Family::convex_potential: return "convex_potential";
    case Family::zw_measure: return "zw_measure";
  }
  throw std::invalid_argument("unknown model family enum");
}

BuiltModel build(const ModelPreset& p, int N) {
  require(N >= 1, "N must be positive");
  require(p.theta > 0, "theta must be positive");
  switch (p.family) {
    case Family::krawtchouk: return build_krawtchouk(p, N);
    case Family::multicut_krawtchouk: return build_multicut(p, N);
    case Family::hahn_hexagon: return build_hahn(p, N);
    case Family::hexagon_hole: return build_hole(p, N);
    case Family::convex_potential: return build_convex(p, N);
    case Family::zw_measure: return build_zw(p, N);
  }
  throw std::invalid_argument("unknown model family enum");
}

double truncation_radius(const ModelPreset& p) {
  switch (p.family) {
    case Family::convex_potential: return convex_truncation(p);
    case Family::zw_measure: return zw_truncation(p);
    case Family::krawtchouk: return p.m;
    case Family::multicut_krawtchouk:
      return p.cut_b.empty() ? 0.0 : *std::max_element(p.cut_b.begin(), p.cut_b.end());
    case Family::hahn_hexagon:
    case Family::hexagon_hole:
      return p.A_hat + p.B_hat + p.C_hat - p.t_hat;
  }
  return 0.0;
}

}  // namespace dbe
