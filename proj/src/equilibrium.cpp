#include "dbe/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dbe/rng.hpp"

namespace dbe {

namespace {

struct Grid {
  std::vector<double> center, width, left;
  std::vector<int> ivl;
  std::vector<std::pair<int, int>> range;  // [begin, end) per interval
  int n() const { return static_cast<int>(center.size()); }
};

Grid make_grid(const std::vector<double>& a, const std::vector<double>& b,
               int grid_size) {
  const int k = static_cast<int>(a.size());
  double total = 0.0;
  for (int i = 0; i < k; ++i) total += b[i] - a[i];
  const double h_target = total / std::max(grid_size, 8 * k);
  Grid g;
  for (int i = 0; i < k; ++i) {
    const double len = b[i] - a[i];
    const int m = std::max<int>(6, static_cast<int>(std::llround(len / h_target)));
    const double h = len / m;
    const int begin = g.n();
    for (int j = 0; j < m; ++j) {
      g.left.push_back(a[i] + j * h);
      g.center.push_back(a[i] + (j + 0.5) * h);
      g.width.push_back(h);
      g.ivl.push_back(i);
    }
    g.range.emplace_back(begin, g.n());
  }
  return g;
}

// dense symmetric matrix of cell-pair integrals of ln|x-y|
std::vector<double> kernel_matrix(const Grid& g) {
  const int n = g.n();
  std::vector<double> K(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int kk = j; kk < n; ++kk) {
      const double v = cell_cell_log(g.left[j] - g.left[kk], g.width[j], g.width[kk]);
      K[static_cast<std::size_t>(j) * n + kk] = v;
      K[static_cast<std::size_t>(kk) * n + j] = v;
    }
  }
  return K;
}

// F_j = 2 theta (K mu)_j / w_j - V_j
void eval_F(const std::vector<double>& K, const Grid& g, double theta,
            const std::vector<double>& Vx, const std::vector<double>& mu,
            std::vector<double>& F) {
  const int n = g.n();
  for (int j = 0; j < n; ++j) {
    const double* row = &K[static_cast<std::size_t>(j) * n];
    double acc = 0.0;
    for (int kk = 0; kk < n; ++kk) acc += row[kk] * mu[kk];
    F[static_cast<std::size_t>(j)] =
        2.0 * theta * acc / g.width[static_cast<std::size_t>(j)] -
        Vx[static_cast<std::size_t>(j)];
  }
}

// Euclidean projection of one interval block onto {0 <= mu <= cap, sum mu w = target}
void project_interval(std::vector<double>& mu, int begin, int end, double w,
                      double cap, double target) {
  double vmin = mu[static_cast<std::size_t>(begin)], vmax = vmin;
  for (int j = begin; j < end; ++j) {
    vmin = std::min(vmin, mu[static_cast<std::size_t>(j)]);
    vmax = std::max(vmax, mu[static_cast<std::size_t>(j)]);
  }
  double lo = -vmax - 1.0, hi = cap - vmin + 1.0;
  for (int it = 0; it < 100; ++it) {
    const double s = 0.5 * (lo + hi);
    double mass = 0.0;
    for (int j = begin; j < end; ++j)
      mass += std::clamp(mu[static_cast<std::size_t>(j)] + s, 0.0, cap);
    if (mass * w < target)
      lo = s;
    else
      hi = s;
  }
  const double s = 0.5 * (lo + hi);
  for (int j = begin; j < end; ++j)
    mu[static_cast<std::size_t>(j)] = std::clamp(mu[static_cast<std::size_t>(j)] + s, 0.0, cap);
}

void project(std::vector<double>& mu, const Grid& g, double cap,
             const std::vector<double>& fillings) {
  for (std::size_t i = 0; i < g.range.size(); ++i)
    project_interval(mu, g.range[i].first, g.range[i].second,
                     g.width[static_cast<std::size_t>(g.range[i].first)], cap,
                     fillings[i]);
}

struct KktReport {
  std::vector<double> f;
  double residual = 0.0;
};

KktReport classify_kkt(const Grid& g, const std::vector<double>& F,
                       const std::vector<double>& mu, double cap) {
  KktReport rep;
  rep.f.resize(g.range.size());
  for (std::size_t i = 0; i < g.range.size(); ++i) {
    double acc = 0.0;
    int cnt = 0;
    double fmax_void = -1e300, fmin_sat = 1e300;
    for (int j = g.range[i].first; j < g.range[i].second; ++j) {
      const double m = mu[static_cast<std::size_t>(j)];
      if (m > 0.0 && m < cap) {
        acc += F[static_cast<std::size_t>(j)];
        ++cnt;
      } else if (m <= 0.0) {
        fmax_void = std::max(fmax_void, F[static_cast<std::size_t>(j)]);
      } else {
        fmin_sat = std::min(fmin_sat, F[static_cast<std::size_t>(j)]);
      }
    }
    rep.f[i] = cnt > 0 ? acc / cnt : 0.5 * (fmax_void + fmin_sat);
  }
  for (std::size_t i = 0; i < g.range.size(); ++i) {
    for (int j = g.range[i].first; j < g.range[i].second; ++j) {
      const double m = mu[static_cast<std::size_t>(j)];
      const double d = F[static_cast<std::size_t>(j)] - rep.f[i];
      double viol;
      if (m <= 0.0)
        viol = std::max(0.0, d);
      else if (m >= cap)
        viol = std::max(0.0, -d);
      else
        viol = std::fabs(d);
      rep.residual = std::max(rep.residual, viol);
    }
  }
  return rep;
}

// exact KKT solve on the current free set; returns false on a singular system
bool polish_once(const std::vector<double>& K, const Grid& g, double theta,
                 double cap, const std::vector<double>& Vx,
                 const std::vector<double>& fillings, std::vector<signed char>& state,
                 std::vector<double>& mu, std::vector<double>& f_out) {
  const int n = g.n();
  const int k = static_cast<int>(g.range.size());
  std::vector<int> free_idx;
  for (int j = 0; j < n; ++j)
    if (state[static_cast<std::size_t>(j)] == 0) free_idx.push_back(j);
  const int nf = static_cast<int>(free_idx.size());
  if (nf == 0) return false;
  const std::size_t dim = static_cast<std::size_t>(nf + k);

  std::vector<double> M(dim * dim, 0.0), rhs(dim, 0.0);
  for (int r = 0; r < nf; ++r) {
    const int j = free_idx[static_cast<std::size_t>(r)];
    const double* row = &K[static_cast<std::size_t>(j) * n];
    double fixed = 0.0;
    for (int c = 0; c < nf; ++c)
      M[static_cast<std::size_t>(r) * dim + static_cast<std::size_t>(c)] =
          2.0 * theta * row[free_idx[static_cast<std::size_t>(c)]];
    for (int jj = 0; jj < n; ++jj)
      if (state[static_cast<std::size_t>(jj)] == 1) fixed += row[jj] * cap;
    const int iv = g.ivl[static_cast<std::size_t>(j)];
    M[static_cast<std::size_t>(r) * dim + static_cast<std::size_t>(nf + iv)] =
        -g.width[static_cast<std::size_t>(j)];
    rhs[static_cast<std::size_t>(r)] =
        Vx[static_cast<std::size_t>(j)] * g.width[static_cast<std::size_t>(j)] -
        2.0 * theta * fixed;
  }
  for (int i = 0; i < k; ++i) {
    double target = fillings[static_cast<std::size_t>(i)];
    for (int j = g.range[static_cast<std::size_t>(i)].first;
         j < g.range[static_cast<std::size_t>(i)].second; ++j)
      if (state[static_cast<std::size_t>(j)] == 1)
        target -= cap * g.width[static_cast<std::size_t>(j)];
    for (int c = 0; c < nf; ++c) {
      const int j = free_idx[static_cast<std::size_t>(c)];
      if (g.ivl[static_cast<std::size_t>(j)] == i)
        M[static_cast<std::size_t>(nf + i) * dim + static_cast<std::size_t>(c)] =
            g.width[static_cast<std::size_t>(j)];
    }
    rhs[static_cast<std::size_t>(nf + i)] = target;
  }

  std::vector<double> sol;
  try {
    sol = solve_linear(M, rhs);
  } catch (const std::exception&) {
    return false;
  }
  for (int j = 0; j < n; ++j)
    mu[static_cast<std::size_t>(j)] =
        (state[static_cast<std::size_t>(j)] == 1) ? cap
        : (state[static_cast<std::size_t>(j)] == -1) ? 0.0
                                                     : 0.0;
  for (int c = 0; c < nf; ++c)
    mu[static_cast<std::size_t>(free_idx[static_cast<std::size_t>(c)])] =
        sol[static_cast<std::size_t>(c)];
  f_out.assign(sol.begin() + nf, sol.end());
  return true;
}

EquilibriumMeasure solve_on_domain(const WeightModel& model,
                                   const std::vector<double>& fillings,
                                   int grid_size, const EquilibriumOptions& opts,
                                   const std::vector<double>& dom_a,
                                   const std::vector<double>& dom_b) {
  const double theta = model.theta;
  const double cap = 1.0 / theta;
  const std::size_t k = dom_a.size();
  if (fillings.size() != k)
    throw std::invalid_argument("solve_equilibrium: filling count mismatch");
  for (std::size_t i = 0; i < k; ++i) {
    const double len = dom_b[i] - dom_a[i];
    if (!(fillings[i] > 0.0) || fillings[i] >= cap * len * (1.0 - 1e-9))
      throw std::invalid_argument("solve_equilibrium: filling outside (0, len/theta)");
  }

  const Grid g = make_grid(dom_a, dom_b, grid_size);
  const int n = g.n();
  const std::vector<double> K = kernel_matrix(g);
  std::vector<double> Vx(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) Vx[static_cast<std::size_t>(j)] = model.V(g.center[static_cast<std::size_t>(j)]);

  std::vector<double> mu(static_cast<std::size_t>(n));
  if (opts.random_start) {
    Rng rng(opts.seed, 77);
    for (auto& m : mu) m = cap * rng.uniform();
  } else {
    for (int j = 0; j < n; ++j) {
      const int i = g.ivl[static_cast<std::size_t>(j)];
      mu[static_cast<std::size_t>(j)] =
          fillings[static_cast<std::size_t>(i)] /
          (dom_b[static_cast<std::size_t>(i)] - dom_a[static_cast<std::size_t>(i)]);
    }
  }
  project(mu, g, cap, fillings);

  // Lipschitz bound of the gradient for the initial step
  double L = 0.0;
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    const double* row = &K[static_cast<std::size_t>(j) * n];
    for (int kk = 0; kk < n; ++kk) s += std::fabs(row[kk]);
    L = std::max(L, 2.0 * theta * s);
  }
  const double alpha0 = 1.0 / L;

  std::vector<double> F(static_cast<std::size_t>(n)), grad(static_cast<std::size_t>(n));
  std::vector<double> mu_prev, grad_prev;
  eval_F(K, g, theta, Vx, mu, F);
  for (int j = 0; j < n; ++j)
    grad[static_cast<std::size_t>(j)] =
        g.width[static_cast<std::size_t>(j)] * F[static_cast<std::size_t>(j)];

  double alpha = alpha0;
  double best_res = 1e300;
  int since_best = 0;
  int it = 0;
  const double pga_goal = std::max(opts.kkt_tol, 1e-5);
  for (; it < opts.max_iter; ++it) {
    mu_prev = mu;
    grad_prev = grad;
    for (int j = 0; j < n; ++j) mu[static_cast<std::size_t>(j)] += alpha * grad[static_cast<std::size_t>(j)];
    project(mu, g, cap, fillings);
    eval_F(K, g, theta, Vx, mu, F);
    for (int j = 0; j < n; ++j)
      grad[static_cast<std::size_t>(j)] =
          g.width[static_cast<std::size_t>(j)] * F[static_cast<std::size_t>(j)];

    double ss = 0.0, sy = 0.0;
    for (int j = 0; j < n; ++j) {
      const double s = mu[static_cast<std::size_t>(j)] - mu_prev[static_cast<std::size_t>(j)];
      const double y = grad[static_cast<std::size_t>(j)] - grad_prev[static_cast<std::size_t>(j)];
      ss += s * s;
      sy += s * y;
    }
    alpha = (sy < 0.0 && ss > 0.0)
                ? std::clamp(ss / (-sy), 1e-3 * alpha0, 1e7 * alpha0)
                : alpha0;

    if (it % 20 == 19) {
      const auto rep = classify_kkt(g, F, mu, cap);
      if (rep.residual < best_res * 0.995) {
        best_res = rep.residual;
        since_best = 0;
      } else {
        ++since_best;
      }
      if (rep.residual < pga_goal || since_best > 40) break;
    }
  }

  // active-set refinement: exact stationarity on the free set
  std::vector<signed char> state(static_cast<std::size_t>(n), 0);
  for (int j = 0; j < n; ++j) {
    if (mu[static_cast<std::size_t>(j)] <= 0.0) state[static_cast<std::size_t>(j)] = -1;
    else if (mu[static_cast<std::size_t>(j)] >= cap) state[static_cast<std::size_t>(j)] = 1;
  }
  std::vector<double> fvals;
  for (int round = 0; round < opts.polish_rounds; ++round) {
    std::vector<double> mu_try = mu;
    if (!polish_once(K, g, theta, cap, Vx, fillings, state, mu_try, fvals)) break;
    int changes = 0;
    for (int j = 0; j < n; ++j) {
      if (state[static_cast<std::size_t>(j)] != 0) continue;
      if (mu_try[static_cast<std::size_t>(j)] < 0.0) {
        state[static_cast<std::size_t>(j)] = -1;
        mu_try[static_cast<std::size_t>(j)] = 0.0;
        ++changes;
      } else if (mu_try[static_cast<std::size_t>(j)] > cap) {
        state[static_cast<std::size_t>(j)] = 1;
        mu_try[static_cast<std::size_t>(j)] = cap;
        ++changes;
      }
    }
    mu = mu_try;
    if (changes > 0) continue;
    eval_F(K, g, theta, Vx, mu, F);
    for (int j = 0; j < n; ++j) {
      const int iv = g.ivl[static_cast<std::size_t>(j)];
      const double d = F[static_cast<std::size_t>(j)] - fvals[static_cast<std::size_t>(iv)];
      if (state[static_cast<std::size_t>(j)] == -1 && d > 1e-13) {
        state[static_cast<std::size_t>(j)] = 0;
        ++changes;
      } else if (state[static_cast<std::size_t>(j)] == 1 && d < -1e-13) {
        state[static_cast<std::size_t>(j)] = 0;
        ++changes;
      }
    }
    if (changes == 0) break;
  }

  eval_F(K, g, theta, Vx, mu, F);
  auto rep = classify_kkt(g, F, mu, cap);
  if (!fvals.empty()) {
    rep.f = fvals;
    rep.residual = 0.0;
    for (int j = 0; j < n; ++j) {
      const double m = mu[static_cast<std::size_t>(j)];
      const double d = F[static_cast<std::size_t>(j)] -
                       rep.f[static_cast<std::size_t>(g.ivl[static_cast<std::size_t>(j)])];
      double viol;
      if (m <= 0.0)
        viol = std::max(0.0, d);
      else if (m >= cap)
        viol = std::max(0.0, -d);
      else
        viol = std::fabs(d);
      rep.residual = std::max(rep.residual, viol);
    }
  }

  if (opts.strict && rep.residual > opts.kkt_tol) {
    std::ostringstream msg;
    msg << "solve_equilibrium: KKT residual " << rep.residual << " > tol "
        << opts.kkt_tol << " after " << it << " gradient iterations, grid " << n;
    throw std::runtime_error(msg.str());
  }

  EquilibriumMeasure out;
  out.theta = theta;
  out.grid = g.center;
  out.width = g.width;
  out.density = mu;
  out.cell_interval = g.ivl;
  out.support_a = dom_a;
  out.support_b = dom_b;
  out.fillings = fillings;
  out.lagrange = rep.f;
  out.kkt_residual = rep.residual;
  out.iterations = it;

  for (std::size_t i = 0; i < k; ++i) {
    const int begin = g.range[i].first, end = g.range[i].second;
    const double h = g.width[static_cast<std::size_t>(begin)];
    int run_start = begin;
    auto label = [&](int j) {
      const double m = mu[static_cast<std::size_t>(j)];
      if (m > cap - 10.0 * h) return 2;
      if (m < 10.0 * h) return 0;
      return 1;
    };
    int cur = label(begin);
    auto flush = [&](int upto, int lab) {
      const double lo = g.left[static_cast<std::size_t>(run_start)];
      const double hi = g.left[static_cast<std::size_t>(upto - 1)] +
                        g.width[static_cast<std::size_t>(upto - 1)];
      if (lab == 0) out.voids.emplace_back(lo, hi);
      else if (lab == 1) out.bands.emplace_back(lo, hi);
      else out.saturated.emplace_back(lo, hi);
    };
    for (int j = begin + 1; j < end; ++j) {
      const int lj = label(j);
      if (lj != cur) {
        flush(j, cur);
        run_start = j;
        cur = lj;
      }
    }
    flush(end, cur);
  }
  return out;
}

}  // namespace

double EquilibriumMeasure::mass(int interval) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j)
    if (cell_interval[j] == interval) acc += density[j] * width[j];
  return acc;
}

double EquilibriumMeasure::max_width() const {
  double w = 0.0;
  for (double x : width) w = std::max(w, x);
  return w;
}

EquilibriumMeasure solve_equilibrium(const WeightModel& model,
                                     const std::vector<double>& fillings,
                                     int grid_size, const EquilibriumOptions& opts) {
  std::vector<double> dom_a = model.eq_a.empty() ? model.support_a : model.eq_a;
  std::vector<double> dom_b = model.eq_b.empty() ? model.support_b : model.eq_b;

  for (int attempt = 0; attempt < 5; ++attempt) {
    EquilibriumMeasure m = solve_on_domain(model, fillings, grid_size, opts, dom_a, dom_b);
    bool widened = false;
    for (const auto& band : m.bands) {
      for (std::size_t i = 0; i < dom_a.size(); ++i) {
        const double mid = 0.5 * (band.first + band.second);
        if (mid < dom_a[i] || mid > dom_b[i]) continue;
        const double h = m.max_width();
        const double len = dom_b[i] - dom_a[i];
        if (band.first < dom_a[i] + 3.0 * h && dom_a[i] > model.support_a[i] + 1e-12) {
          dom_a[i] = std::max(model.support_a[i], dom_a[i] - 0.75 * len);
          widened = true;
        }
        if (band.second > dom_b[i] - 3.0 * h && dom_b[i] < model.support_b[i] - 1e-12) {
          dom_b[i] = std::min(model.support_b[i], dom_b[i] + 0.75 * len);
          widened = true;
        }
      }
    }
    if (!widened) return m;
  }
  return solve_on_domain(model, fillings, grid_size, opts, dom_a, dom_b);
}

EquilibriumMeasure solve_equilibrium(const WeightModel& model, int grid_size,
                                     const EquilibriumOptions& opts) {
  return solve_equilibrium(model, model.fill_frac, grid_size, opts);
}

cplx stieltjes(const EquilibriumMeasure& mu, cplx z) {
  if (z.imag() == 0.0) {
    for (std::size_t i = 0; i < mu.support_a.size(); ++i) {
      const double h = mu.max_width();
      if (z.real() > mu.support_a[i] - 0.5 * h && z.real() < mu.support_b[i] + 0.5 * h)
        throw std::domain_error("stieltjes: evaluation too close to the support");
    }
  }
  cplx acc = 0.0;
  for (std::size_t j = 0; j < mu.grid.size(); ++j) {
    if (mu.density[j] == 0.0) continue;
    const double l = mu.grid[j] - 0.5 * mu.width[j];
    const double r = mu.grid[j] + 0.5 * mu.width[j];
    acc += mu.density[j] * (std::log(z - l) - std::log(z - r));
  }
  return acc;
}

cplx stieltjes_prime(const EquilibriumMeasure& mu, cplx z) {
  if (z.imag() == 0.0) {
    for (std::size_t i = 0; i < mu.support_a.size(); ++i) {
      const double h = mu.max_width();
      if (z.real() > mu.support_a[i] - 0.5 * h && z.real() < mu.support_b[i] + 0.5 * h)
        throw std::domain_error("stieltjes_prime: evaluation too close to the support");
    }
  }
  cplx acc = 0.0;
  for (std::size_t j = 0; j < mu.grid.size(); ++j) {
    if (mu.density[j] == 0.0) continue;
    const double l = mu.grid[j] - 0.5 * mu.width[j];
    const double r = mu.grid[j] + 0.5 * mu.width[j];
    acc += mu.density[j] * (1.0 / (z - l) - 1.0 / (z - r));
  }
  return acc;
}

double effective_potential(const EquilibriumMeasure& mu, const WeightModel& model,
                           double x) {
  double acc = 0.0;
  for (std::size_t j = 0; j < mu.grid.size(); ++j) {
    if (mu.density[j] == 0.0) continue;
    const double l = mu.grid[j] - 0.5 * mu.width[j];
    const double r = mu.grid[j] + 0.5 * mu.width[j];
    acc += mu.density[j] * point_cell_log(x, l, r);
  }
  return 2.0 * mu.theta * acc - model.V(x);
}

SpectralData spectral_data(const EquilibriumMeasure& mu, const WeightModel& model) {
  const std::size_t k = mu.support_a.size();
  std::vector<int> per_interval(k, 0);
  for (const auto& band : mu.bands) {
    const double mid = 0.5 * (band.first + band.second);
    for (std::size_t i = 0; i < k; ++i)
      if (mid >= mu.support_a[i] && mid <= mu.support_b[i]) ++per_interval[i];
  }
  for (std::size_t i = 0; i < k; ++i)
    if (per_interval[i] != 1)
      throw std::runtime_error("spectral_data: expected exactly one band per interval");

  double span = 0.0;
  for (std::size_t i = 0; i < k; ++i) span = std::max(span, mu.support_b[i] - mu.support_a[i]);
  const double total_lo = *std::min_element(mu.support_a.begin(), mu.support_a.end());
  const double total_hi = *std::max_element(mu.support_b.begin(), mu.support_b.end());
  const double h = mu.max_width();
  const double delta = 1e-7 * std::max(1.0, total_hi - total_lo);

  const double theta = mu.theta;
  auto Gf = [mu](cplx z) { return stieltjes(mu, z); };
  auto phip = model.phi_plus;
  auto phim = model.phi_minus;
  auto Rf = [Gf, phip, phim, theta](cplx z) {
    const cplx G = Gf(z);
    return phim(z) * std::exp(-theta * G) + phip(z) * std::exp(theta * G);
  };
  auto Qraw = [Gf, phip, phim, theta](cplx z) {
    const cplx G = Gf(z);
    return phim(z) * std::exp(-theta * G) - phip(z) * std::exp(theta * G);
  };
  auto qsig = [Rf, phip, phim, delta](double x) {
    const cplx z(x, delta);
    const cplx R = Rf(z);
    return (R * R - 4.0 * phip(z) * phim(z)).real();
  };

  SpectralData sd;
  for (const auto& band : mu.bands) {
    const double mid = 0.5 * (band.first + band.second);
    std::size_t iv = 0;
    for (std::size_t i = 0; i < k; ++i)
      if (mid >= mu.support_a[i] && mid <= mu.support_b[i]) iv = i;

    auto refine = [&](double edge, int dir) {
      // dir = +1: band lies to the right of the endpoint
      double inside = edge + dir * 6.0 * h;
      double outside = edge - dir * 6.0 * h;
      if (dir > 0)
        outside = std::max(outside, mu.support_a[iv] - 2.0 * h);
      else
        outside = std::min(outside, mu.support_b[iv] + 2.0 * h);
      inside = std::clamp(inside, band.first, band.second);
      double q_in = qsig(inside), q_out = qsig(outside);
      for (int widen = 0; widen < 4 && q_out <= 0.0; ++widen) {
        outside -= dir * 4.0 * h;
        if (dir > 0 && outside < mu.support_a[iv] - 2.0 * h) break;
        if (dir < 0 && outside > mu.support_b[iv] + 2.0 * h) break;
        q_out = qsig(outside);
      }
      if (!(q_in < 0.0) || !(q_out > 0.0)) return edge;
      for (int bi = 0; bi < 80; ++bi) {
        const double m = 0.5 * (inside + outside);
        if (qsig(m) < 0.0)
          inside = m;
        else
          outside = m;
      }
      return 0.5 * (inside + outside);
    };
    sd.alpha.push_back(refine(band.first, 1));
    sd.beta.push_back(refine(band.second, -1));
  }

  auto alphas = sd.alpha;
  auto betas = sd.beta;
  auto prod_sqrt = [alphas, betas](cplx z) {
    cplx acc = 1.0;
    for (std::size_t i = 0; i < alphas.size(); ++i)
      acc *= branch_sqrt(z, alphas[i], betas[i]);
    return acc;
  };
  const double zfar = total_hi + 2.0 * std::max(1.0, total_hi - total_lo);
  const double orient = (Qraw(cplx(zfar, 0.0)) / prod_sqrt(cplx(zfar, 0.0))).real();
  sd.sign = orient >= 0.0 ? 1.0 : -1.0;

  sd.G = Gf;
  sd.Gp = [mu](cplx z) { return stieltjes_prime(mu, z); };
  sd.R = Rf;
  sd.Q = Qraw;
  sd.H = [Qraw, prod_sqrt](cplx z) { return Qraw(z) / prod_sqrt(z); };

  double min_h = 1e300;
  const double off = std::max(h, 1e-4 * std::max(1.0, total_hi - total_lo));
  for (std::size_t j = 0; j < mu.grid.size(); j += 2)
    min_h = std::min(min_h, std::abs(sd.H(cplx(mu.grid[j], off))));
  sd.min_abs_H = min_h;
  return sd;
}

}  // namespace dbe
