#pragma once

#ifdef DBE_HAVE_GMP

#include <gmpxx.h>

#include <vector>

#include "dbe/lattice.hpp"
#include "dbe/models.hpp"

namespace dbe::rational {

// Exact-rational ensemble at theta = 1 for weight families whose weights are
// rational at integer lattice points (krawtchouk, multicut, hahn, hole).
struct ExactRational {
  std::vector<std::vector<long long>> configs;  // integer positions, ascending
  std::vector<mpq_class> mass;
  mpq_class Z;
};

bool supported(const WeightModel& m);

mpq_class weight(const WeightModel& m, long long x);
mpq_class phi_plus(const WeightModel& m, long long x);
mpq_class phi_minus(const WeightModel& m, long long x);

ExactRational build(const BuiltModel& bm, double cap = 1e5);

// Exact residue of R_N at the lattice point m: the two boundary sums of the
// pole-cancellation argument.  Zero for every m iff R_N is entire.
mpq_class nekrasov_residue(const ExactRational& ens, const WeightModel& model, long long m);

// closed-form binomial-ensemble partition function
// Z(N, M) = 2^{N(M-N+1)} (M!)^N prod_{j=0}^{N-1} j!/(M-j)!
mpq_class krawtchouk_Z(int N, long long M);

}  // namespace dbe::rational

#endif
