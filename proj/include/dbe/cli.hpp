#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbe/models.hpp"
#include "dbe/numerics.hpp"
#include "json.hpp"

namespace dbe {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitVerification = 3;
inline constexpr int kExitIo = 4;
inline constexpr int kExitInternal = 5;

// bad configuration content; the message carries the offending key path
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// an enabled check missed its tolerance
struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ChainSettings {
  int count = 2;
  std::int64_t samples = 1000;
  std::int64_t thin = 2;
  std::int64_t burn_in = 0;  // 0 = N-dependent default
};

struct PolyObservable {
  std::string name;
  std::vector<double> coeffs;  // f(x) = sum_k coeffs[k] x^k
};

struct ExperimentConfig {
  ModelPreset preset;
  std::vector<int> N = {20};
  ChainSettings chains;
  std::uint64_t seed = 1;
  int threads = 1;
  std::vector<PolyObservable> polynomials;
  std::vector<cplx> cauchy_points;  // Stieltjes evaluation points
  std::vector<std::string> analyses = {"nekrasov", "equilibrium", "covariance",
                                       "clt",      "lln",         "tails"};
  int grid = 1000;
  double tail_D = 0.0;  // 0 = twice the outermost band radius
  std::string out_dir = "out";
  bool check = true;      // enforce stage tolerances through the exit code
  bool rational = false;  // exact-rational loop-observable verification
  bool dump_positions = false;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);

// validates types and ranges; errors name the offending key
ExperimentConfig config_from_json(const nlohmann::json& j);

// JSON file; a manifest (object with a "config" key) is accepted as-is,
// so runs can be reproduced from their own manifests
ExperimentConfig load_config(const std::string& path);

// stage is one of: verify-nekrasov, equilibrium, sample, covariance, clt,
// lln, tails, export.  Writes manifest + stage artifacts into cfg.out_dir
// and returns a process exit code.
int run_stage(const std::string& stage, const ExperimentConfig& cfg);

// runs every stage listed in cfg.analyses, then export; returns the worst code
int run_pipeline(const ExperimentConfig& cfg);

}  // namespace dbe
