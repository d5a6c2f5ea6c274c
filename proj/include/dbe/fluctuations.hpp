#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dbe/equilibrium.hpp"
#include "dbe/lattice.hpp"
#include "dbe/mcmc.hpp"
#include "dbe/models.hpp"
#include "dbe/numerics.hpp"

namespace dbe {

// Named observables evaluated on sampled configurations.  Linear statistics
// use scaled positions x_i = l_i / N; the Stieltjes observable is
// G_N(z) = (1/N) sum_i 1/(z - l_i/N).
struct ObservableSet {
  std::vector<std::string> names;
  std::vector<std::function<cplx(const ParticleConfig&)>> fns;

  void add_custom(const std::string& name,
                  std::function<cplx(const ParticleConfig&)> fn);
  void add_linear_stat(const std::string& name, std::function<cplx(cplx)> f);
  void add_stieltjes(const std::string& name, cplx z);
};

// MCMC sample stream: per-sample observable values plus the configurations
// they were computed from, concatenated chain after chain.
struct LinearStatSample {
  int N = 0;
  int chain_count = 0;
  std::int64_t per_chain = 0;  // samples per chain
  std::int64_t thin_sweeps = 0;
  std::int64_t burn_in_sweeps = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> names;
  std::vector<std::vector<cplx>> values;  // values[obs][sample]
  std::vector<ParticleConfig> configs;

  std::int64_t count() const { return chain_count * per_chain; }
};

struct CollectOptions {
  std::uint64_t seed = 1;
  int chains = 2;
  std::int64_t samples_per_chain = 1000;
  std::int64_t thin_sweeps = 2;
  std::int64_t burn_in_sweeps = 0;  // 0 = default_burn_in(N)
  bool keep_configs = true;
  int threads = 1;  // chains run on a worker pool; output order is by chain index
};

LinearStatSample collect_samples(const BuiltModel& bm, const ObservableSet& obs,
                                 const CollectOptions& opts);

struct CumulantEstimate {
  int order = 0;
  cplx value = 0.0;
  double standard_error = 0.0;  // batch means; zero only for constant data
  double ess = 0.0;             // autocorrelation-adjusted effective samples
  int batches = 0;
};

// Joint cumulant of the selected observables.  A single index with
// order k means kappa_k of that observable; otherwise indices.size()
// must equal order.  Cumulants are plain-product (bilinear) in the
// complex values.  Requires at least 10^3 samples so that the 50
// batch means stay meaningful.
CumulantEstimate estimate_cumulants(const LinearStatSample& samples,
                                    const std::vector<std::size_t>& indices,
                                    int order);

// Law-of-large-numbers diagnostic: for each run, the mean over samples of
// |int f d mu_N - int f d mu| scaled by N^{1/2 - eps}, eps = 0.1.
struct LlnReport {
  double epsilon = 0.1;
  std::vector<int> N;
  std::vector<double> scaled_gap;
  bool decreasing = false;  // strictly decreasing along increasing N
};

LlnReport lln_check(const std::vector<LinearStatSample>& runs,
                    const EquilibriumMeasure& mu,
                    const std::function<double(double)>& f);

// Empirical measure of a configuration: atoms of mass 1/N at l_i/N,
// convolved with the uniform measure on [0, smoothing].
struct EmpiricalMeasure {
  std::vector<double> atoms;
  double smoothing = 0.0;
};

EmpiricalMeasure make_empirical(const ParticleConfig& c, double p = 3.0);

struct PseudodistanceOptions {
  double t_min = 1e-4;
  double t_max = 0.0;     // 0 = automatic from the density tail bound
  double tail_tol = 1e-6;
};

// D(nu, rho) = sqrt(int_0^inf |hat nu(t) - hat rho(t)|^2 dt / t), computed
// by per-octave Simpson quadrature of the transforms.  The automatic cutoff
// certifies the neglected tail of the density sides to tail_tol; the
// atom-scale tail of an empirical side (frequencies of order N^p) is
// truncated, so the value is a slight underestimate used for trend tests.
double pseudodistance(const EmpiricalMeasure& nu, const EquilibriumMeasure& rho,
                      const PseudodistanceOptions& opts = {});
double pseudodistance(const EquilibriumMeasure& a, const EquilibriumMeasure& b,
                      const PseudodistanceOptions& opts = {});

// Frequency of configurations whose scaled extreme particle leaves [-D, D],
// with a least-squares slope of log adjusted frequency against N.
struct TailReport {
  double D = 0.0;
  std::vector<int> N;
  std::vector<double> frequency;
  double log_slope = 0.0;
  bool decaying = false;  // log_slope < 0
};

TailReport tail_check(const std::vector<LinearStatSample>& runs, double D);

}  // namespace dbe
