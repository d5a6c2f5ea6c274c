#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace dbe {

// Tolerance for recognizing integer lattice offsets from floating positions.
inline constexpr double kLatticeTol = 1e-9;

struct Interval {
  double a = 0.0;
  double b = 0.0;
};

// State space of N particles spread over k closed intervals.
//
// Within interval j the particle of rank r (r = 0..n_j-1, left to right)
// sits at  a_j + c_j + lambda + theta * r  with integer slack lambda.
// The slacks of one interval form a nondecreasing sequence in [0, G_j].
// c_j = frac(theta) is the unique left offset compatible with integer
// anchoring at the right endpoint b_j and the requirement
// b_j - theta * n_j - a_j in Z, which is checked on construction.
class StateSpaceSpec {
 public:
  StateSpaceSpec(double theta, std::vector<Interval> intervals,
                 std::vector<int> fillings);

  double theta() const { return theta_; }
  int num_intervals() const { return static_cast<int>(intervals_.size()); }
  int num_particles() const { return total_; }
  const std::vector<Interval>& intervals() const { return intervals_; }
  const std::vector<int>& fillings() const { return fillings_; }

  // integer slack range of interval j
  std::int64_t slack(int j) const { return slack_[j]; }
  // position of (interval j, rank r, lambda)
  double position(int j, int r, std::int64_t lambda) const;
  // first particle index of interval j in a flat configuration
  int offset(int j) const { return offsets_[j]; }
  int group_of_particle(int i) const { return group_of_[i]; }
  int rank_of_particle(int i) const { return rank_of_[i]; }

  double count_configurations() const;  // product of binomials, as double

 private:
  double theta_ = 1.0;
  std::vector<Interval> intervals_;
  std::vector<int> fillings_;
  std::vector<std::int64_t> slack_;
  std::vector<double> left_offset_;  // c_j
  std::vector<int> offsets_;
  std::vector<int> group_of_, rank_of_;
  int total_ = 0;
};

struct ParticleConfig {
  std::vector<double> positions;       // ascending
  std::vector<std::int64_t> lambda;    // integer slack per particle
};

// Checks membership of a raw position list in the state space.
// Throws std::invalid_argument on dimension mismatch.
bool validate(const StateSpaceSpec& spec, const std::vector<double>& positions);

// Builds the configuration with the given slack variables (must be valid).
ParticleConfig make_config(const StateSpaceSpec& spec,
                           const std::vector<std::int64_t>& lambda);

// Minimal (fully packed to the left) configuration.
ParticleConfig min_config(const StateSpaceSpec& spec);

// Visits every configuration; throws std::length_error if the count
// exceeds cap.
void enumerate(const StateSpaceSpec& spec,
               const std::function<void(const ParticleConfig&)>& visit,
               double cap = 1e7);

}  // namespace dbe
