#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dbe/lattice.hpp"
#include "dbe/numerics.hpp"

namespace dbe {

enum class Family {
  krawtchouk,
  multicut_krawtchouk,
  hahn_hexagon,
  hexagon_hole,
  convex_potential,
  zw_measure,
};

Family family_from_string(const std::string& s);
std::string to_string(Family f);

// Parameters of a weight family before it is instantiated at a particle
// count N.  Lengths are "hatted": measured in units of N.
struct ModelPreset {
  Family family = Family::krawtchouk;
  double theta = 1.0;

  // krawtchouk: lattice of ~ m*N sites, binomial-type weight
  double m = 2.0;
  long long M_override = -1;  // force the exact lattice extent (theta-compatible)

  // multicut_krawtchouk: target intervals, filling fractions, gauge constants
  std::vector<double> cut_a, cut_b, cut_fill, cut_gauge;

  // hahn_hexagon / hexagon_hole
  double A_hat = 1.0, B_hat = 2.0, C_hat = 2.0, t_hat = 3.0;
  double H_hat = 0.0, D_hat = 0.0, n1_frac = 0.5;

  // convex_potential: V(x) = sum_k V_coeffs[k] x^k, weight exp(-kappa N V(x/N))
  std::vector<double> V_coeffs = {0.0, 0.0, 1.0};
  double kappa = 1.0;

  // zw_measure
  cplx z_inf = cplx(1.0, 1.0);
  cplx w_inf = cplx(1.0, 0.5);

  // unbounded-support truncation
  double eps_tail = 0.1;
  double safety = 1.5;
};

// A weight family instantiated at particle count N.  phi_plus_N/phi_minus_N
// are the forward/backward weight-ratio factors on the lattice scale,
// phi_plus/phi_minus their limiting shapes on the z = x/N scale and
// varphi_* the 1/N corrections.  V is the limiting external potential.
struct WeightModel {
  std::string name;
  Family family = Family::krawtchouk;
  double theta = 1.0;
  int N = 0;

  std::function<double(double)> log_weight;
  std::function<double(double)> log_ratio;             // ln w(x)/w(x-1)
  std::function<cplx(cplx)> phi_plus_N, phi_minus_N;
  std::function<cplx(cplx)> phi_plus, phi_minus;
  std::function<cplx(cplx)> varphi_plus, varphi_minus;
  std::function<double(double)> V, Vprime;

  bool polynomial_phi = false;
  int phi_degree = 0;
  std::vector<double> support_a, support_b;  // hatted support hint
  std::vector<double> eq_a, eq_b;  // equilibrium solve window (defaults to support)
  std::vector<double> fill_frac;
  std::vector<long long> int_params;  // integer data for the exact-rational path
  double truncation_D = 0.0;          // nonzero for truncated (unbounded) models
};

struct BuiltModel {
  StateSpaceSpec spec;
  WeightModel model;
};

// Instantiates the preset at particle count N; validates parameter ranges
// and lattice compatibility, throws std::invalid_argument on violation.
BuiltModel build(const ModelPreset& preset, int N);

inline double log_weight_ratio(const WeightModel& m, double x) { return m.log_ratio(x); }

// Truncation radius D for unbounded families: weight mass outside [-DN, DN]
// is exponentially small.  Compact families return their support extent.
double truncation_radius(const ModelPreset& preset);

}  // namespace dbe
