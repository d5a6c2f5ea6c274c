#include "dbe/mcmc.hpp"

#include <cmath>
#include <stdexcept>

#include "dbe/exact.hpp"

namespace dbe {

namespace {

constexpr std::int64_t kRecomputeEvery = 100000;

// interaction factor ratios when one gap g changes by +-1:
//   F(g) = Gamma(g+1)Gamma(g+theta) / (Gamma(g)Gamma(g+1-theta))
//   F(g+1)/F(g) = (g+1)(g+theta) / (g (g+1-theta))
//   F(g-1)/F(g) = (g-1)(g-theta) / (g (g-1+theta))
inline void gap_up_factor(double g, double theta, double& num, double& den) {
  num *= (g + 1.0) * (g + theta);
  den *= g * (g + 1.0 - theta);
}

inline void gap_down_factor(double g, double theta, double& num, double& den) {
  num *= (g - 1.0) * (g - theta);
  den *= g * (g - 1.0 + theta);
}

}  // namespace

double config_log_mass(const BuiltModel& bm, const ParticleConfig& c) {
  const double theta = bm.spec.theta();
  const auto& x = c.positions;
  const int n = static_cast<int>(x.size());
  double lm = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) lm += pair_log(x[j] - x[i], theta);
    lm += bm.model.log_weight(x[i]);
  }
  return lm;
}

bool move_valid(const StateSpaceSpec& spec, const ParticleConfig& c, int i, int dir) {
  const int j = spec.group_of_particle(i);
  const int r = spec.rank_of_particle(i);
  const int nj = spec.fillings()[j];
  const std::int64_t lam = c.lambda[i];
  if (dir > 0) {
    if (lam + 1 > spec.slack(j)) return false;
    if (r + 1 < nj && lam + 1 > c.lambda[i + 1]) return false;
  } else {
    if (lam - 1 < 0) return false;
    if (r > 0 && lam - 1 < c.lambda[i - 1]) return false;
  }
  return true;
}

double move_log_ratio(const BuiltModel& bm, const ParticleConfig& c, int i, int dir) {
  const double theta = bm.spec.theta();
  const auto& x = c.positions;
  const int n = static_cast<int>(x.size());
  const double xi = x[i];

  // positions are sorted, so particles left of i recede exactly when dir > 0
  // and approach otherwise; folding the running products into the ratio every
  // 8 pairs keeps everything in range without per-pair magnitude checks
  double acc = 1.0, num = 1.0, den = 1.0;
  int cnt = 0;
  auto fold = [&] {
    if ((++cnt & 7) == 0) {
      acc *= num / den;
      num = den = 1.0;
    }
  };
  if (dir > 0) {
    for (int j = 0; j < i; ++j) {
      gap_up_factor(xi - x[j], theta, num, den);
      fold();
    }
    for (int j = i + 1; j < n; ++j) {
      gap_down_factor(x[j] - xi, theta, num, den);
      fold();
    }
  } else {
    for (int j = 0; j < i; ++j) {
      gap_down_factor(xi - x[j], theta, num, den);
      fold();
    }
    for (int j = i + 1; j < n; ++j) {
      gap_up_factor(x[j] - xi, theta, num, den);
      fold();
    }
  }
  acc *= num / den;

  const double lw = (dir > 0) ? bm.model.log_ratio(xi + 1.0) : -bm.model.log_ratio(xi);
  return std::log(acc) + lw;
}

bool block_valid(const StateSpaceSpec& spec, const ParticleConfig& c, int i, int len,
                 int dir) {
  if (len < 1 || i < 0 || i + len > spec.num_particles()) return false;
  const int j = spec.group_of_particle(i);
  const int last = i + len - 1;
  if (spec.group_of_particle(last) != j) return false;
  if (dir > 0) {
    if (spec.rank_of_particle(last) + 1 < spec.fillings()[j]) {
      if (c.lambda[last] + 1 > c.lambda[last + 1]) return false;
    } else if (c.lambda[last] + 1 > spec.slack(j)) {
      return false;
    }
  } else {
    if (spec.rank_of_particle(i) > 0) {
      if (c.lambda[i] - 1 < c.lambda[i - 1]) return false;
    } else if (c.lambda[i] - 1 < 0) {
      return false;
    }
  }
  return true;
}

double block_log_ratio(const BuiltModel& bm, const ParticleConfig& c, int i, int len,
                       int dir) {
  const double theta = bm.spec.theta();
  const auto& x = c.positions;
  const int n = static_cast<int>(x.size());

  // gaps inside the rigid block are unchanged; only block-to-outside pairs move
  double acc = 1.0, num = 1.0, den = 1.0;
  int cnt = 0;
  auto fold = [&] {
    if ((++cnt & 7) == 0) {
      acc *= num / den;
      num = den = 1.0;
    }
  };
  for (int u = i; u < i + len; ++u) {
    const double xu = x[u];
    if (dir > 0) {
      for (int v = 0; v < i; ++v) {
        gap_up_factor(xu - x[v], theta, num, den);
        fold();
      }
      for (int v = i + len; v < n; ++v) {
        gap_down_factor(x[v] - xu, theta, num, den);
        fold();
      }
    } else {
      for (int v = 0; v < i; ++v) {
        gap_down_factor(xu - x[v], theta, num, den);
        fold();
      }
      for (int v = i + len; v < n; ++v) {
        gap_up_factor(x[v] - xu, theta, num, den);
        fold();
      }
    }
  }
  acc *= num / den;

  double lw = 0.0;
  for (int u = i; u < i + len; ++u)
    lw += (dir > 0) ? bm.model.log_ratio(x[u] + 1.0) : -bm.model.log_ratio(x[u]);
  return std::log(acc) + lw;
}

ChainState init_chain(const BuiltModel& bm, std::uint64_t seed, std::uint64_t stream) {
  const auto& spec = bm.spec;
  std::vector<std::int64_t> lam;
  lam.reserve(static_cast<std::size_t>(spec.num_particles()));
  for (int j = 0; j < spec.num_intervals(); ++j) {
    const std::int64_t G = spec.slack(j);
    const int nj = spec.fillings()[j];
    for (int r = 0; r < nj; ++r)
      lam.push_back(static_cast<std::int64_t>(std::llround(
          static_cast<double>(G) * (r + 0.5) / static_cast<double>(nj))));
  }
  ChainState st;
  st.config = make_config(spec, lam);
  st.log_mass = config_log_mass(bm, st.config);
  st.rng = Rng(seed, stream);
  return st;
}

bool propose_and_accept(ChainState& st, const BuiltModel& bm) {
  const auto& spec = bm.spec;
  const int n = spec.num_particles();
  const int i = static_cast<int>(st.rng.uniform_below(static_cast<std::uint64_t>(n)));
  const int dir = (st.rng.uniform_below(2) == 0) ? 1 : -1;

  ++st.step_count;
  const bool recompute = (st.step_count % kRecomputeEvery == 0);

  bool accepted = false;
  if (move_valid(spec, st.config, i, dir)) {
    const double lr = move_log_ratio(bm, st.config, i, dir);
    const double u = st.rng.uniform();
    if (lr >= 0.0 || std::log(u) < lr) {
      st.config.lambda[i] += dir;
      st.config.positions[i] += dir;
      st.log_mass += lr;
      ++st.accept_count;
      accepted = true;
    }
  }
  if (recompute) st.log_mass = config_log_mass(bm, st.config);
  return accepted;
}

bool translate_block(ChainState& st, const BuiltModel& bm, int i, int len, int dir) {
  ++st.step_count;
  const bool recompute = (st.step_count % kRecomputeEvery == 0);

  bool accepted = false;
  if (block_valid(bm.spec, st.config, i, len, dir)) {
    const double lr = block_log_ratio(bm, st.config, i, len, dir);
    const double u = st.rng.uniform();
    if (lr >= 0.0 || std::log(u) < lr) {
      for (int k = i; k < i + len; ++k) {
        st.config.lambda[k] += dir;
        st.config.positions[k] += dir;
      }
      st.log_mass += lr;
      ++st.accept_count;
      accepted = true;
    }
  }
  if (recompute) st.log_mass = config_log_mass(bm, st.config);
  return accepted;
}

namespace {

// one sweep = n single-site proposals, then two rigid-translation attempts:
// a full-group shift (kills the slow center-of-mass random walk) and a
// dyadic sub-block shift (relaxes intermediate density wavelengths)
void sweep(ChainState& st, const BuiltModel& bm) {
  const auto& spec = bm.spec;
  const std::int64_t n = spec.num_particles();
  for (std::int64_t k = 0; k < n; ++k) propose_and_accept(st, bm);

  const int groups = spec.num_intervals();
  for (int pass = 0; pass < 2; ++pass) {
    const int j =
        groups == 1 ? 0 : static_cast<int>(st.rng.uniform_below(
                              static_cast<std::uint64_t>(groups)));
    int first = 0;
    for (int g = 0; g < j; ++g) first += spec.fillings()[g];
    const int nj = spec.fillings()[j];
    int len = nj;
    if (pass == 1 && nj >= 4) {
      int levels = 1;
      while ((nj >> levels) >= 2) ++levels;
      len = std::max(1, nj >> (1 + static_cast<int>(st.rng.uniform_below(
                                      static_cast<std::uint64_t>(levels - 1)))));
    }
    const int start =
        first + static_cast<int>(st.rng.uniform_below(
                    static_cast<std::uint64_t>(nj - len + 1)));
    const int dir = (st.rng.uniform_below(2) == 0) ? 1 : -1;
    translate_block(st, bm, start, len, dir);
  }
}

}  // namespace

void run_chain(const BuiltModel& bm, ChainState& st, std::int64_t burn_in_sweeps,
               std::int64_t n_samples, std::int64_t thin_sweeps,
               const std::function<void(const ChainState&)>& cb) {
  if (thin_sweeps < 1) thin_sweeps = 1;
  for (std::int64_t s = 0; s < burn_in_sweeps; ++s) sweep(st, bm);
  for (std::int64_t t = 0; t < n_samples; ++t) {
    for (std::int64_t s = 0; s < thin_sweeps; ++s) sweep(st, bm);
    cb(st);
  }
}

std::int64_t default_burn_in(int N) {
  const std::int64_t q = 50LL * N * N;
  return q < 2000000LL ? q : 2000000LL;
}

}  // namespace dbe
