#include "dbe/exact.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace dbe {

double pair_log(double g, double theta) {
  if (theta == 1.0) return 2.0 * std::log(g);
  return std::lgamma(g + 1.0) + std::lgamma(g + theta) - std::lgamma(g) -
         std::lgamma(g + 1.0 - theta);
}

double log_qpochhammer_inf(double s, double q) {
  double lq = std::log(q);
  double acc = 0.0;
  double a = std::exp(s * lq);
  for (int n = 0; n < 100000000; ++n) {
    if (a / (1.0 - q) < 1e-16) break;
    acc += std::log1p(-a);
    a *= q;
  }
  return acc;
}

double pair_log_q(double g, double theta, double q) {
  return -theta * g * std::log(q) - 2.0 * theta * std::log(1.0 - q) +
         log_qpochhammer_inf(g, q) + log_qpochhammer_inf(g + 1.0 - theta, q) -
         log_qpochhammer_inf(g + 1.0, q) - log_qpochhammer_inf(g + theta, q);
}

namespace {

ExactEnsemble build_impl(const BuiltModel& bm, double cap,
                         const std::function<double(double)>& pair) {
  ExactEnsemble ens{bm.spec, {}, {}, {}, 0.0};
  const auto& model = bm.model;
  enumerate(
      bm.spec,
      [&](const ParticleConfig& c) {
        double lm = 0.0;
        const auto& x = c.positions;
        for (std::size_t i = 0; i < x.size(); ++i) {
          for (std::size_t j = i + 1; j < x.size(); ++j) lm += pair(x[j] - x[i]);
          lm += model.log_weight(x[i]);
        }
        ens.configs.push_back(c);
        ens.log_mass.push_back(lm);
      },
      cap);
  ens.log_Z = logsumexp(ens.log_mass);
  if (!std::isfinite(ens.log_Z))
    throw std::runtime_error("build_exact: degenerate partition function");
  ens.prob.resize(ens.log_mass.size());
  for (std::size_t i = 0; i < ens.prob.size(); ++i)
    ens.prob[i] = std::exp(ens.log_mass[i] - ens.log_Z);
  return ens;
}

}  // namespace

ExactEnsemble build_exact(const BuiltModel& bm, double cap) {
  double theta = bm.model.theta;
  return build_impl(bm, cap, [theta](double g) { return pair_log(g, theta); });
}

ExactEnsemble build_exact_q(const BuiltModel& bm, double q, double cap) {
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument("build_exact_q: q must lie in (0,1)");
  double theta = bm.model.theta;
  return build_impl(bm, cap, [theta, q](double g) { return pair_log_q(g, theta, q); });
}

double expectation(const ExactEnsemble& ens,
                   const std::function<double(const ParticleConfig&)>& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ens.configs.size(); ++i) acc += ens.prob[i] * f(ens.configs[i]);
  return acc;
}

cplx expectation(const ExactEnsemble& ens,
                 const std::function<cplx(const ParticleConfig&)>& f) {
  cplx acc = 0.0;
  for (std::size_t i = 0; i < ens.configs.size(); ++i) acc += ens.prob[i] * f(ens.configs[i]);
  return acc;
}

cplx nekrasov_R(const ExactEnsemble& ens, const WeightModel& model, cplx xi) {
  const double theta = model.theta;
  cplx eminus = 0.0, eplus = 0.0;
  for (std::size_t i = 0; i < ens.configs.size(); ++i) {
    cplx pm = 1.0, pp = 1.0;
    for (double l : ens.configs[i].positions) {
      pm *= 1.0 - theta / (xi - l);
      pp *= 1.0 + theta / (xi - l - 1.0);
    }
    eminus += ens.prob[i] * pm;
    eplus += ens.prob[i] * pp;
  }
  return model.phi_minus_N(xi) * eminus + model.phi_plus_N(xi) * eplus;
}

cplx nekrasov_R_q(const ExactEnsemble& ens_q, const WeightModel& model, cplx xi, double q) {
  const double theta = model.theta;
  const double lq = std::log(q);
  const double qh = std::exp(0.5 * theta * lq);
  cplx eminus = 0.0, eplus = 0.0;
  for (std::size_t i = 0; i < ens_q.configs.size(); ++i) {
    cplx pm = 1.0, pp = 1.0;
    for (double l : ens_q.configs[i].positions) {
      cplx u = std::exp((xi - l) * lq);       // q^{xi - l}
      cplx v = std::exp((xi - l - 1.0) * lq);  // q^{xi - l - 1}
      pm *= qh * (1.0 - u * std::exp(-theta * lq)) / (1.0 - u);
      pp *= (1.0 - v * std::exp(theta * lq)) / (qh * (1.0 - v));
    }
    eminus += ens_q.prob[i] * pm;
    eplus += ens_q.prob[i] * pp;
  }
  return model.phi_minus_N(xi) * eminus + model.phi_plus_N(xi) * eplus;
}

namespace {

void partitions_rec(int t, int k, std::vector<int>& assign, int blocks,
                    const std::function<void(const std::vector<int>&, int)>& emit) {
  if (t == k) {
    emit(assign, blocks);
    return;
  }
  for (int b = 0; b <= blocks; ++b) {
    assign[t] = b;
    partitions_rec(t + 1, k, assign, std::max(blocks, b + 1), emit);
  }
}

}  // namespace

cplx joint_cumulant(const ExactEnsemble& ens,
                    const std::vector<std::function<cplx(const ParticleConfig&)>>& obs) {
  const int k = static_cast<int>(obs.size());
  if (k == 0 || k > 6) throw std::invalid_argument("joint_cumulant: need 1..6 observables");
  // precompute observable values per configuration
  std::vector<std::vector<cplx>> vals(k, std::vector<cplx>(ens.configs.size()));
  for (int a = 0; a < k; ++a)
    for (std::size_t i = 0; i < ens.configs.size(); ++i) vals[a][i] = obs[a](ens.configs[i]);

  auto block_moment = [&](const std::vector<int>& assign, int b) {
    cplx acc = 0.0;
    for (std::size_t i = 0; i < ens.configs.size(); ++i) {
      cplx prod = ens.prob[i];
      for (int a = 0; a < k; ++a)
        if (assign[a] == b) prod *= vals[a][i];
      acc += prod;
    }
    return acc;
  };

  double fact[7] = {1, 1, 2, 6, 24, 120, 720};
  cplx total = 0.0;
  std::vector<int> assign(k, 0);
  partitions_rec(0, k, assign, 0, [&](const std::vector<int>& part, int blocks) {
    cplx prod = (blocks % 2 == 1 ? 1.0 : -1.0) * fact[blocks - 1];
    for (int b = 0; b < blocks; ++b) prod *= block_moment(part, b);
    total += prod;
  });
  return total;
}

std::vector<double> pole_candidates(const StateSpaceSpec& spec) {
  std::set<long long> seen;
  std::vector<double> out;
  for (int j = 0; j < spec.num_intervals(); ++j) {
    for (int r = 0; r < spec.fillings()[j]; ++r) {
      for (std::int64_t lam = 0; lam <= spec.slack(j); ++lam) {
        double x = spec.position(j, r, lam);
        for (double cand : {x, x + 1.0}) {
          long long key = std::llround(cand * 1024.0);
          if (seen.insert(key).second) out.push_back(cand);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dbe
