#include "dbe/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dbe/numerics.hpp"

namespace dbe {

namespace {

bool near_integer(double x, double* rounded) {
  double r = std::round(x);
  if (std::fabs(x - r) > kLatticeTol * std::max(1.0, std::fabs(x))) return false;
  if (rounded) *rounded = r;
  return true;
}

}  // namespace

StateSpaceSpec::StateSpaceSpec(double theta, std::vector<Interval> intervals,
                               std::vector<int> fillings)
    : theta_(theta), intervals_(std::move(intervals)), fillings_(std::move(fillings)) {
  if (theta_ <= 0.0) throw std::invalid_argument("state space: theta must be positive");
  if (intervals_.empty() || intervals_.size() != fillings_.size())
    throw std::invalid_argument("state space: intervals/fillings mismatch");
  const int k = static_cast<int>(intervals_.size());
  slack_.resize(k);
  left_offset_.resize(k);
  offsets_.resize(k);
  for (int j = 0; j < k; ++j) {
    const auto [a, b] = intervals_[j];
    const int n = fillings_[j];
    if (n < 1) throw std::invalid_argument("state space: empty interval group");
    if (!(b > a)) throw std::invalid_argument("state space: interval not increasing");
    if (j + 1 < k && !(intervals_[j + 1].a >= b + theta_ - kLatticeTol))
      throw std::invalid_argument("state space: intervals too close or out of order");
    double anchor;
    if (!near_integer(b - a - theta_ * n, &anchor))
      throw std::invalid_argument("state space: b - theta*n - a not an integer (interval " +
                                  std::to_string(j) + ")");
    // g = b - a - theta*(n-1) = anchor + theta; slack range G = floor(g), offset c = g - G
    double g = anchor + theta_;
    std::int64_t G = static_cast<std::int64_t>(std::floor(g + kLatticeTol));
    double c = g - static_cast<double>(G);
    if (c < 0.0) c = 0.0;
    if (G < 0)
      throw std::invalid_argument("state space: interval " + std::to_string(j) +
                                  " too short for its filling");
    slack_[j] = G;
    left_offset_[j] = c;
    offsets_[j] = total_;
    total_ += n;
  }
  group_of_.resize(total_);
  rank_of_.resize(total_);
  for (int j = 0, i = 0; j < k; ++j)
    for (int r = 0; r < fillings_[j]; ++r, ++i) {
      group_of_[i] = j;
      rank_of_[i] = r;
    }
}

double StateSpaceSpec::position(int j, int r, std::int64_t lambda) const {
  return intervals_[j].a + left_offset_[j] + static_cast<double>(lambda) + theta_ * r;
}

double StateSpaceSpec::count_configurations() const {
  double c = 1.0;
  for (std::size_t j = 0; j < intervals_.size(); ++j)
    c *= binom(slack_[j] + fillings_[j], fillings_[j]);
  return c;
}

bool validate(const StateSpaceSpec& spec, const std::vector<double>& positions) {
  if (static_cast<int>(positions.size()) != spec.num_particles())
    throw std::invalid_argument("validate: configuration has wrong particle count");
  for (int j = 0; j < spec.num_intervals(); ++j) {
    const int n = spec.fillings()[j];
    const int off = spec.offset(j);
    std::int64_t prev = 0;
    for (int r = 0; r < n; ++r) {
      double lam = positions[off + r] - spec.position(j, r, 0);
      double rounded;
      if (!near_integer(lam, &rounded)) return false;
      auto l = static_cast<std::int64_t>(rounded);
      if (l < (r == 0 ? 0 : prev) || l > spec.slack(j)) return false;
      prev = l;
    }
  }
  return true;
}

ParticleConfig make_config(const StateSpaceSpec& spec,
                           const std::vector<std::int64_t>& lambda) {
  if (static_cast<int>(lambda.size()) != spec.num_particles())
    throw std::invalid_argument("make_config: wrong slack count");
  ParticleConfig cfg;
  cfg.lambda = lambda;
  cfg.positions.resize(lambda.size());
  for (int i = 0; i < spec.num_particles(); ++i) {
    int j = spec.group_of_particle(i);
    int r = spec.rank_of_particle(i);
    std::int64_t l = lambda[i];
    if (l < 0 || l > spec.slack(j)) throw std::invalid_argument("make_config: slack out of range");
    if (r > 0 && l < lambda[i - 1]) throw std::invalid_argument("make_config: slack not sorted");
    cfg.positions[i] = spec.position(j, r, l);
  }
  return cfg;
}

ParticleConfig min_config(const StateSpaceSpec& spec) {
  return make_config(spec, std::vector<std::int64_t>(spec.num_particles(), 0));
}

void enumerate(const StateSpaceSpec& spec,
               const std::function<void(const ParticleConfig&)>& visit, double cap) {
  double total = spec.count_configurations();
  if (total > cap)
    throw std::length_error("enumerate: " + std::to_string(total) +
                            " configurations exceed cap");
  const int N = spec.num_particles();
  ParticleConfig cfg = min_config(spec);

  // odometer over nondecreasing slack sequences, advancing per group
  auto refresh = [&](int i) {
    int j = spec.group_of_particle(i);
    cfg.positions[i] = spec.position(j, spec.rank_of_particle(i), cfg.lambda[i]);
  };
  for (;;) {
    visit(cfg);
    int i = N - 1;
    for (; i >= 0; --i) {
      int j = spec.group_of_particle(i);
      if (cfg.lambda[i] < spec.slack(j)) {
        ++cfg.lambda[i];
        refresh(i);
        // reset the tail of this group to the new value, later groups to zero
        for (int t = i + 1; t < N; ++t) {
          cfg.lambda[t] = (spec.group_of_particle(t) == j) ? cfg.lambda[i] : 0;
          refresh(t);
        }
        break;
      }
    }
    if (i < 0) return;
  }
}

}  // namespace dbe
