#pragma once

#include <functional>
#include <vector>

#include "dbe/lattice.hpp"
#include "dbe/models.hpp"
#include "dbe/numerics.hpp"

namespace dbe {

// Fully enumerated ensemble: every configuration with its unnormalized
// log mass and normalized probability.
struct ExactEnsemble {
  StateSpaceSpec spec;
  std::vector<ParticleConfig> configs;
  std::vector<double> log_mass;
  std::vector<double> prob;
  double log_Z = 0.0;
};

// log of the pairwise interaction Gamma(g+1)Gamma(g+theta) /
// (Gamma(g)Gamma(g+1-theta)) for a gap g >= theta
double pair_log(double g, double theta);

// q-deformed pairwise interaction (config-dependent parts exact, the
// (1-q)^{-2 theta} prefactor kept for gauge fidelity)
double pair_log_q(double g, double theta, double q);

// log (q^s; q)_infty, truncated with relative tail below 1e-15
double log_qpochhammer_inf(double s, double q);

ExactEnsemble build_exact(const BuiltModel& bm, double cap = 2e6);
ExactEnsemble build_exact_q(const BuiltModel& bm, double q, double cap = 2e6);

double expectation(const ExactEnsemble& ens,
                   const std::function<double(const ParticleConfig&)>& f);
cplx expectation(const ExactEnsemble& ens,
                 const std::function<cplx(const ParticleConfig&)>& f);

// R_N(xi) = phi-_N(xi) E[prod(1 - theta/(xi - l_i))]
//         + phi+_N(xi) E[prod(1 + theta/(xi - l_i - 1))]
cplx nekrasov_R(const ExactEnsemble& ens, const WeightModel& model, cplx xi);

// q-deformed observable with factors q^{+-theta/2} (1-q^{xi-l-theta}) / (1-q^{xi-l})
cplx nekrasov_R_q(const ExactEnsemble& ens_q, const WeightModel& model, cplx xi, double q);

// joint cumulant of up to six observables via the set-partition expansion
cplx joint_cumulant(const ExactEnsemble& ens,
                    const std::vector<std::function<cplx(const ParticleConfig&)>>& obs);

// candidate pole locations of R_N: every lattice slot and slot + 1
std::vector<double> pole_candidates(const StateSpaceSpec& spec);

}  // namespace dbe
