#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "dbe/models.hpp"
#include "dbe/numerics.hpp"

namespace dbe {

struct EquilibriumOptions {
  int max_iter = 6000;        // projected-gradient iterations before polishing
  double kkt_tol = 1e-8;
  int polish_rounds = 12;     // active-set refinement solves
  bool random_start = false;
  std::uint64_t seed = 1;
  bool strict = true;         // throw if kkt_tol is not reached
};

// maximizer of  theta * int int ln|x-y| mu mu - int V mu  with 0 <= mu <= 1/theta
// and fixed mass per interval, discretized on a midpoint grid
struct EquilibriumMeasure {
  double theta = 1.0;
  std::vector<double> grid;      // cell centers
  std::vector<double> width;     // cell widths (constant within an interval)
  std::vector<double> density;   // mu_j in [0, 1/theta]
  std::vector<int> cell_interval;
  std::vector<double> support_a, support_b;  // solve domain per interval
  std::vector<double> fillings;              // target mass per interval
  std::vector<double> lagrange;              // f_i: F_V level on the bands
  std::vector<std::pair<double, double>> bands, voids, saturated;
  double kkt_residual = 0.0;
  int iterations = 0;

  double mass(int interval) const;
  double max_width() const;
};

EquilibriumMeasure solve_equilibrium(const WeightModel& model,
                                     const std::vector<double>& fillings,
                                     int grid_size,
                                     const EquilibriumOptions& opts = {});

// fillings taken from the model
EquilibriumMeasure solve_equilibrium(const WeightModel& model, int grid_size,
                                     const EquilibriumOptions& opts = {});

// G(z) = int mu(y) dy / (z - y), cell-analytic quadrature.
// Throws for real z closer than half a cell to the solve domain.
cplx stieltjes(const EquilibriumMeasure& mu, cplx z);

// G'(z) = -int mu(y) dy / (z - y)^2, same domain restrictions.
cplx stieltjes_prime(const EquilibriumMeasure& mu, cplx z);

// F_V(x) = 2 theta int ln|x-y| mu(y) dy - V(x)
double effective_potential(const EquilibriumMeasure& mu, const WeightModel& model,
                           double x);

struct SpectralData {
  std::vector<double> alpha, beta;  // refined band endpoints
  double sign = 1.0;                // orientation of Q relative to the sqrt product
  double min_abs_H = 0.0;           // smallest |H| seen on the support scan
  std::function<cplx(cplx)> G;      // Stieltjes transform
  std::function<cplx(cplx)> Gp;     // d/dz of the Stieltjes transform
  std::function<cplx(cplx)> R;      // phi- e^{-theta G} + phi+ e^{theta G}
  std::function<cplx(cplx)> Q;      // phi- e^{-theta G} - phi+ e^{theta G}
  std::function<cplx(cplx)> H;      // Q / prod sqrt((z-alpha_i)(z-beta_i))
};

// one band per interval required; throws otherwise
SpectralData spectral_data(const EquilibriumMeasure& mu, const WeightModel& model);

}  // namespace dbe
