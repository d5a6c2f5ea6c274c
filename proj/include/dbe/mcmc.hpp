#pragma once

#include <cstdint>
#include <functional>

#include "dbe/lattice.hpp"
#include "dbe/models.hpp"
#include "dbe/rng.hpp"

namespace dbe {

struct ChainState {
  ParticleConfig config;
  double log_mass = 0.0;
  Rng rng;
  std::int64_t step_count = 0;
  std::int64_t accept_count = 0;
};

// unnormalized log mass of a configuration
double config_log_mass(const BuiltModel& bm, const ParticleConfig& c);

// log of mass(config with particle i moved by dir) / mass(config);
// requires the move to be lattice-valid
double move_log_ratio(const BuiltModel& bm, const ParticleConfig& c, int i, int dir);

// checks slack bounds and within-group ordering for a +-1 move of particle i
bool move_valid(const StateSpaceSpec& spec, const ParticleConfig& c, int i, int dir);

// rigid +-1 shift of the contiguous particle block [i, i+len); the block must
// lie in one group, and only its outermost lattice constraints can bind
bool block_valid(const StateSpaceSpec& spec, const ParticleConfig& c, int i, int len,
                 int dir);

// log mass ratio of the rigid block shift; internal gaps cancel, so the cost
// is len * (n - len) boundary pairs plus len weight ratios
double block_log_ratio(const BuiltModel& bm, const ParticleConfig& c, int i, int len,
                       int dir);

// Metropolis accept/reject of the rigid block shift; true if accepted
bool translate_block(ChainState& st, const BuiltModel& bm, int i, int len, int dir);

// chain started from evenly spread slacks, rng seeded by (seed, stream)
ChainState init_chain(const BuiltModel& bm, std::uint64_t seed, std::uint64_t stream = 0);

// one Metropolis proposal (uniform site, uniform direction); true if accepted
bool propose_and_accept(ChainState& st, const BuiltModel& bm);

// burn_in sweeps, then n_samples callbacks every thin sweeps (1 sweep = N proposals)
void run_chain(const BuiltModel& bm, ChainState& st, std::int64_t burn_in_sweeps,
               std::int64_t n_samples, std::int64_t thin_sweeps,
               const std::function<void(const ChainState&)>& cb);

// default burn-in heuristic, 50 N^2 sweeps capped for very large N
std::int64_t default_burn_in(int N);

}  // namespace dbe
