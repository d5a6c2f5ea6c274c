#include "dbe/fluctuations.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <utility>

namespace dbe {

namespace {

cplx central_moment(const std::vector<const std::vector<cplx>*>& cols,
                    const std::vector<cplx>& means, std::int64_t lo, std::int64_t hi) {
  cplx acc = 0.0;
  for (std::int64_t s = lo; s < hi; ++s) {
    cplx prod = 1.0;
    for (std::size_t k = 0; k < cols.size(); ++k) prod *= (*cols[k])[s] - means[k];
    acc += prod;
  }
  return acc / static_cast<double>(hi - lo);
}

cplx pair_central(const std::vector<cplx>& a, const std::vector<cplx>& b, cplx ma,
                  cplx mb, std::int64_t lo, std::int64_t hi) {
  cplx acc = 0.0;
  for (std::int64_t s = lo; s < hi; ++s) acc += (a[s] - ma) * (b[s] - mb);
  return acc / static_cast<double>(hi - lo);
}

// plain-product joint cumulant of the selected columns over [lo, hi)
cplx span_cumulant(const std::vector<const std::vector<cplx>*>& cols, int order,
                   std::int64_t lo, std::int64_t hi) {
  std::vector<cplx> means(cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) {
    cplx m = 0.0;
    for (std::int64_t s = lo; s < hi; ++s) m += (*cols[k])[s];
    means[k] = m / static_cast<double>(hi - lo);
  }
  if (order == 1) return means[0];
  if (order == 2 || order == 3) return central_moment(cols, means, lo, hi);
  const cplx m4 = central_moment(cols, means, lo, hi);
  auto c2 = [&](int i, int j) {
    return pair_central(*cols[i], *cols[j], means[i], means[j], lo, hi);
  };
  return m4 - c2(0, 1) * c2(2, 3) - c2(0, 2) * c2(1, 3) - c2(0, 3) * c2(1, 2);
}

// integrated autocorrelation time with the self-consistent window
double autocorrelation_time(const std::vector<cplx>& col, std::int64_t lo,
                            std::int64_t hi) {
  const std::int64_t n = hi - lo;
  if (n < 4) return 1.0;
  cplx mean = 0.0;
  for (std::int64_t s = lo; s < hi; ++s) mean += col[s];
  mean /= static_cast<double>(n);
  auto cov = [&](std::int64_t k) {
    cplx acc = 0.0;
    for (std::int64_t s = lo; s < hi - k; ++s)
      acc += (col[s] - mean) * std::conj(col[s + k] - mean);
    return acc.real() / static_cast<double>(n - k);
  };
  const double c0 = cov(0);
  if (c0 <= 0.0) return 1.0;
  double tau = 1.0;
  for (std::int64_t k = 1; k < n / 3; ++k) {
    const double r = cov(k) / c0;
    if (r <= 0.0) break;
    tau += 2.0 * r;
    if (k >= 5.0 * tau) break;
  }
  return std::max(tau, 0.1);
}

double sinc(double s) { return s == 0.0 ? 1.0 : std::sin(s) / s; }

cplx empirical_hat(const EmpiricalMeasure& nu, double t) {
  cplx acc = 0.0;
  for (double a : nu.atoms) acc += std::polar(1.0, t * a);
  acc /= static_cast<double>(nu.atoms.size());
  const double th = t * nu.smoothing;
  if (std::abs(th) < 1e-8) return acc * cplx(1.0, 0.5 * th);
  return acc * (std::polar(1.0, th) - 1.0) / cplx(0.0, th);
}

// piecewise-constant density: exact cell transforms, rotated incrementally
// along runs of equal width
cplx density_hat(const EquilibriumMeasure& rho, double t) {
  cplx acc = 0.0;
  const std::size_t n = rho.grid.size();
  std::size_t j = 0;
  while (j < n) {
    const double w = rho.width[j];
    std::size_t end = j + 1;
    while (end < n && rho.width[end] == w &&
           std::abs(rho.grid[end] - rho.grid[end - 1] - w) < 1e-12 * std::max(1.0, w))
      ++end;
    const double cellf = w * sinc(0.5 * t * w);
    const cplx step = std::polar(1.0, t * w);
    cplx phase = std::polar(1.0, t * rho.grid[j]);
    for (std::size_t k = j; k < end; ++k) {
      if (rho.density[k] != 0.0) acc += rho.density[k] * cellf * phase;
      phase *= step;
    }
    j = end;
  }
  return acc;
}

// total variation of the density profile, interval by interval; |hat(t)| <= TV/t
double density_tv(const EquilibriumMeasure& rho) {
  double tv = 0.0;
  double prev = 0.0;
  int prev_interval = -1;
  for (std::size_t j = 0; j < rho.grid.size(); ++j) {
    if (rho.cell_interval[j] != prev_interval) {
      tv += std::abs(prev);
      prev = 0.0;
      prev_interval = rho.cell_interval[j];
    }
    tv += std::abs(rho.density[j] - prev);
    prev = rho.density[j];
  }
  tv += std::abs(prev);
  return tv;
}

struct SupportBox {
  double lo = 0.0, hi = 0.0;
};

SupportBox support_of(const EmpiricalMeasure& nu) {
  SupportBox b;
  b.lo = *std::min_element(nu.atoms.begin(), nu.atoms.end());
  b.hi = *std::max_element(nu.atoms.begin(), nu.atoms.end()) + nu.smoothing;
  return b;
}

SupportBox support_of(const EquilibriumMeasure& rho) {
  SupportBox b;
  b.lo = rho.grid.front() - 0.5 * rho.width.front();
  b.hi = rho.grid.back() + 0.5 * rho.width.back();
  return b;
}

void require_bounded(const EmpiricalMeasure& nu) {
  if (nu.atoms.empty()) throw std::invalid_argument("pseudodistance: empty measure");
  for (double a : nu.atoms)
    if (!std::isfinite(a))
      throw std::invalid_argument("pseudodistance: unbounded support");
  if (!std::isfinite(nu.smoothing) || nu.smoothing < 0.0)
    throw std::invalid_argument("pseudodistance: invalid smoothing width");
}

double octave_simpson(const std::function<cplx(double)>& a,
                      const std::function<cplx(double)>& b, double lo, double hi,
                      double width) {
  std::int64_t n =
      std::max<std::int64_t>(16, std::llround(10.0 * (hi - lo) * width / (2.0 * kPi)));
  n = std::min<std::int64_t>(n, 20000);
  if (n % 2) ++n;
  const double h = (hi - lo) / static_cast<double>(n);
  auto f = [&](double t) {
    const double g = std::abs(a(t) - b(t));
    return g * g / t;
  };
  double acc = f(lo) + f(hi);
  for (std::int64_t k = 1; k < n; ++k) acc += f(lo + k * h) * (k % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

double pseudodistance_core(const std::function<cplx(double)>& a,
                           const std::function<cplx(double)>& b, double width,
                           double t_max, const PseudodistanceOptions& opts) {
  if (opts.t_min <= 0.0 || t_max <= opts.t_min)
    throw std::invalid_argument("pseudodistance: bad frequency window");
  double acc = 0.0;
  double lo = opts.t_min;
  while (lo < t_max) {
    const double hi = std::min(2.0 * lo, t_max);
    acc += octave_simpson(a, b, lo, hi, width);
    lo = hi;
  }
  return std::sqrt(std::max(acc, 0.0));
}

double auto_cutoff(double tv, double width, const PseudodistanceOptions& opts) {
  if (opts.t_max > 0.0) return opts.t_max;
  const double certified = tv * std::sqrt(2.0 / opts.tail_tol);
  const double floor_modes = 128.0 * kPi / width;
  return std::min(std::max(certified, floor_modes), 1e7);
}

}  // namespace

void ObservableSet::add_custom(const std::string& name,
                               std::function<cplx(const ParticleConfig&)> fn) {
  names.push_back(name);
  fns.push_back(std::move(fn));
}

void ObservableSet::add_linear_stat(const std::string& name,
                                    std::function<cplx(cplx)> f) {
  add_custom(name, [f = std::move(f)](const ParticleConfig& c) {
    const double N = static_cast<double>(c.positions.size());
    cplx acc = 0.0;
    for (double l : c.positions) acc += f(cplx(l / N, 0.0));
    return acc;
  });
}

void ObservableSet::add_stieltjes(const std::string& name, cplx z) {
  add_custom(name, [z](const ParticleConfig& c) {
    const double N = static_cast<double>(c.positions.size());
    cplx acc = 0.0;
    for (double l : c.positions) acc += 1.0 / (z - l / N);
    return acc / N;
  });
}

LinearStatSample collect_samples(const BuiltModel& bm, const ObservableSet& obs,
                                 const CollectOptions& opts) {
  if (opts.chains < 1 || opts.samples_per_chain < 1)
    throw std::invalid_argument("collect_samples: need at least one chain and sample");
  LinearStatSample out;
  out.N = bm.spec.num_particles();
  out.chain_count = opts.chains;
  out.per_chain = opts.samples_per_chain;
  out.thin_sweeps = opts.thin_sweeps;
  out.burn_in_sweeps = opts.burn_in_sweeps > 0 ? opts.burn_in_sweeps
                                               : default_burn_in(bm.spec.num_particles());
  out.seed = opts.seed;
  out.names = obs.names;
  out.values.assign(obs.fns.size(), {});
  for (auto& col : out.values) col.reserve(opts.chains * opts.samples_per_chain);
  if (opts.keep_configs) out.configs.reserve(opts.chains * opts.samples_per_chain);

  std::vector<std::vector<std::vector<cplx>>> chain_values(
      opts.chains, std::vector<std::vector<cplx>>(obs.fns.size()));
  std::vector<std::vector<ParticleConfig>> chain_configs(opts.chains);

  auto run_one = [&](int chain) {
    ChainState st = init_chain(bm, opts.seed, static_cast<std::uint64_t>(chain));
    run_chain(bm, st, out.burn_in_sweeps, opts.samples_per_chain, opts.thin_sweeps,
              [&](const ChainState& cur) {
                for (std::size_t k = 0; k < obs.fns.size(); ++k)
                  chain_values[chain][k].push_back(obs.fns[k](cur.config));
                if (opts.keep_configs) chain_configs[chain].push_back(cur.config);
              });
  };

  const int workers = std::max(1, std::min(opts.threads, opts.chains));
  if (workers == 1) {
    for (int chain = 0; chain < opts.chains; ++chain) run_one(chain);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int c = next.fetch_add(1); c < opts.chains; c = next.fetch_add(1))
          run_one(c);
      });
    for (auto& t : pool) t.join();
  }

  for (int chain = 0; chain < opts.chains; ++chain) {
    for (std::size_t k = 0; k < obs.fns.size(); ++k)
      out.values[k].insert(out.values[k].end(), chain_values[chain][k].begin(),
                           chain_values[chain][k].end());
    out.configs.insert(out.configs.end(), chain_configs[chain].begin(),
                       chain_configs[chain].end());
  }
  return out;
}

CumulantEstimate estimate_cumulants(const LinearStatSample& samples,
                                    const std::vector<std::size_t>& indices,
                                    int order) {
  if (order < 1 || order > 4)
    throw std::invalid_argument("estimate_cumulants: order must be in 1..4");
  if (indices.empty() ||
      (indices.size() != 1 && indices.size() != static_cast<std::size_t>(order)))
    throw std::invalid_argument(
        "estimate_cumulants: pass one index or exactly `order` indices");
  for (std::size_t i : indices)
    if (i >= samples.values.size())
      throw std::invalid_argument("estimate_cumulants: observable index out of range");
  const std::int64_t count = samples.count();
  if (count < 1000)
    throw std::invalid_argument("estimate_cumulants: need at least 10^3 samples");

  std::vector<const std::vector<cplx>*> cols(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k)
    cols[k] = &samples.values[indices.size() == 1 ? indices[0] : indices[k]];

  const int chains = samples.chain_count;
  const std::int64_t per_chain = samples.per_chain;
  const int bpc = std::max<std::int64_t>(1, 50 / chains);
  const int batches = bpc * chains;
  if (batches < 20)
    throw std::invalid_argument("estimate_cumulants: too few batches for an error bar");
  if (per_chain < bpc)
    throw std::invalid_argument("estimate_cumulants: chains too short to batch");

  CumulantEstimate est;
  est.order = order;
  est.batches = batches;
  est.value = span_cumulant(cols, order, 0, count);

  std::vector<cplx> batch_vals;
  batch_vals.reserve(batches);
  for (int c = 0; c < chains; ++c) {
    const std::int64_t base = c * per_chain;
    for (int b = 0; b < bpc; ++b) {
      const std::int64_t lo = base + (b * per_chain) / bpc;
      const std::int64_t hi = base + ((b + 1) * per_chain) / bpc;
      batch_vals.push_back(span_cumulant(cols, order, lo, hi));
    }
  }
  cplx bmean = std::accumulate(batch_vals.begin(), batch_vals.end(), cplx(0.0));
  bmean /= static_cast<double>(batches);
  double spread = 0.0;
  for (const cplx& v : batch_vals) spread += std::norm(v - bmean);
  est.standard_error =
      std::sqrt(spread / static_cast<double>(batches - 1) / static_cast<double>(batches));

  double tau = 0.0;
  for (int c = 0; c < chains; ++c)
    tau += autocorrelation_time(*cols[0], c * per_chain, (c + 1) * per_chain);
  tau /= static_cast<double>(chains);
  est.ess = static_cast<double>(count) / tau;
  return est;
}

LlnReport lln_check(const std::vector<LinearStatSample>& runs,
                    const EquilibriumMeasure& mu,
                    const std::function<double(double)>& f) {
  LlnReport rep;
  double target = 0.0;
  for (std::size_t j = 0; j < mu.grid.size(); ++j)
    target += mu.density[j] * mu.width[j] * f(mu.grid[j]);

  std::vector<std::size_t> idx(runs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return runs[a].N < runs[b].N; });

  for (std::size_t i : idx) {
    const LinearStatSample& run = runs[i];
    if (run.configs.empty())
      throw std::invalid_argument("lln_check: run has no stored configurations");
    const double N = run.N;
    double gap = 0.0;
    for (const ParticleConfig& c : run.configs) {
      double emp = 0.0;
      for (double l : c.positions) emp += f(l / N);
      gap += std::abs(emp / N - target);
    }
    gap /= static_cast<double>(run.configs.size());
    rep.N.push_back(run.N);
    rep.scaled_gap.push_back(std::pow(N, 0.5 - rep.epsilon) * gap);
  }
  rep.decreasing = true;
  for (std::size_t i = 1; i < rep.scaled_gap.size(); ++i)
    if (rep.scaled_gap[i] >= rep.scaled_gap[i - 1]) rep.decreasing = false;
  return rep;
}

EmpiricalMeasure make_empirical(const ParticleConfig& c, double p) {
  if (p <= 2.0)
    throw std::invalid_argument("make_empirical: smoothing exponent must exceed 2");
  if (c.positions.empty()) throw std::invalid_argument("make_empirical: empty config");
  EmpiricalMeasure nu;
  const double N = static_cast<double>(c.positions.size());
  nu.atoms.reserve(c.positions.size());
  for (double l : c.positions) nu.atoms.push_back(l / N);
  nu.smoothing = std::pow(N, -p);
  return nu;
}

double pseudodistance(const EmpiricalMeasure& nu, const EquilibriumMeasure& rho,
                      const PseudodistanceOptions& opts) {
  require_bounded(nu);
  const SupportBox ba = support_of(nu), bb = support_of(rho);
  const double width = std::max(ba.hi, bb.hi) - std::min(ba.lo, bb.lo);
  const double t_max = auto_cutoff(density_tv(rho), width, opts);
  return pseudodistance_core([&](double t) { return empirical_hat(nu, t); },
                             [&](double t) { return density_hat(rho, t); }, width,
                             t_max, opts);
}

double pseudodistance(const EquilibriumMeasure& a, const EquilibriumMeasure& b,
                      const PseudodistanceOptions& opts) {
  const SupportBox ba = support_of(a), bb = support_of(b);
  const double width = std::max(ba.hi, bb.hi) - std::min(ba.lo, bb.lo);
  const double t_max =
      auto_cutoff(std::max(density_tv(a), density_tv(b)), width, opts);
  return pseudodistance_core([&](double t) { return density_hat(a, t); },
                             [&](double t) { return density_hat(b, t); }, width,
                             t_max, opts);
}

TailReport tail_check(const std::vector<LinearStatSample>& runs, double D) {
  TailReport rep;
  rep.D = D;
  std::vector<std::size_t> idx(runs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return runs[a].N < runs[b].N; });

  std::vector<double> x, y;
  for (std::size_t i : idx) {
    const LinearStatSample& run = runs[i];
    if (run.configs.empty())
      throw std::invalid_argument("tail_check: run has no stored configurations");
    const double N = run.N;
    std::int64_t exceed = 0;
    for (const ParticleConfig& c : run.configs) {
      double extreme = 0.0;
      for (double l : c.positions) extreme = std::max(extreme, std::abs(l) / N);
      if (extreme > D) ++exceed;
    }
    const double n = static_cast<double>(run.configs.size());
    rep.N.push_back(run.N);
    rep.frequency.push_back(static_cast<double>(exceed) / n);
    x.push_back(N);
    y.push_back(std::log((static_cast<double>(exceed) + 0.5) / (n + 1.0)));
  }

  // least-squares slope of adjusted log frequency against N
  if (x.size() >= 2) {
    const double n = static_cast<double>(x.size());
    const double sx = std::accumulate(x.begin(), x.end(), 0.0);
    const double sy = std::accumulate(y.begin(), y.end(), 0.0);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxx += x[i] * x[i];
      sxy += x[i] * y[i];
    }
    rep.log_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  rep.decaying = rep.log_slope < 0.0;
  return rep;
}

}  // namespace dbe
