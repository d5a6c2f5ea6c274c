#include "dbe/cli.hpp"

#include <filesystem>
#include <string>

#include "dbe/io.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("dbe_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

dbe::ExperimentConfig tiny_config(const std::string& out) {
  dbe::ExperimentConfig cfg;
  cfg.preset.family = dbe::Family::krawtchouk;
  cfg.preset.m = 2.0;
  cfg.N = {6};
  cfg.chains.count = 2;
  cfg.chains.samples = 30;
  cfg.chains.thin = 1;
  cfg.grid = 300;
  cfg.out_dir = out;
  return cfg;
}

}  // namespace

TEST_CASE("config serialization round-trips and rejects bad input") {
  dbe::ExperimentConfig cfg;
  cfg.N = {4, 8};
  cfg.seed = 0xDEADBEEFCAFEF00DULL;
  cfg.polynomials.push_back({"x2", {0.0, 0.0, 1.0}});
  cfg.cauchy_points.push_back({3.0, -0.5});
  const json j = dbe::config_to_json(cfg);
  const dbe::ExperimentConfig back = dbe::config_from_json(j);
  CHECK(dbe::config_to_json(back) == j);
  CHECK(back.seed == cfg.seed);
  CHECK(back.polynomials.size() == 1);

  json bad = j;
  bad["no_such_key"] = 1;
  CHECK_THROWS_AS(dbe::config_from_json(bad), dbe::ConfigError);
  try {
    dbe::config_from_json(bad);
  } catch (const dbe::ConfigError& e) {
    CHECK(std::string(e.what()).find("/no_such_key") != std::string::npos);
  }

  json empty_n = j;
  empty_n["N"] = json::array();
  CHECK_THROWS_AS(dbe::config_from_json(empty_n), dbe::ConfigError);

  json bad_chain = j;
  bad_chain["chains"]["thin"] = 0;
  CHECK_THROWS_AS(dbe::config_from_json(bad_chain), dbe::ConfigError);

  json bad_analysis = j;
  bad_analysis["analyses"] = {"equilibrium", "astrology"};
  CHECK_THROWS_AS(dbe::config_from_json(bad_analysis), dbe::ConfigError);

  json bad_family = j;
  bad_family["preset"]["family"] = "cauchy";
  CHECK_THROWS_AS(dbe::config_from_json(bad_family), dbe::ConfigError);
}

TEST_CASE("config files: parse errors carry line and column, manifests load") {
  const std::string dir = fresh_dir("cfg");
  const std::string broken = dir + "/broken.json";
  dbe::write_text_atomic(broken, "{\n  \"N\": [4,\n}\n");
  try {
    dbe::load_config(broken);
    CHECK(false);
  } catch (const dbe::ConfigError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }

  dbe::ExperimentConfig cfg;
  cfg.N = {7};
  json manifest;
  manifest["config"] = dbe::config_to_json(cfg);
  manifest["rng"] = "whatever";
  const std::string mpath = dir + "/manifest.json";
  dbe::write_text_atomic(mpath, manifest.dump());
  CHECK(dbe::load_config(mpath).N == std::vector<int>{7});
  CHECK_THROWS_AS(dbe::load_config(dir + "/nope.json"), dbe::IoError);
  fs::remove_all(dir);
}

TEST_CASE("formatting and CSV plumbing") {
  for (double x : {1.0 / 3.0, 0.1, -2.5e-300, 6.02214076e23, 0.0}) {
    CHECK(std::stod(dbe::format_g17(x)) == x);
  }

  dbe::CsvWriter csv({"a", "b"});
  csv.row({"1", "2"});
  CHECK(csv.str() == "a,b\n1,2\n");
  CHECK_THROWS_AS(csv.row({"only one"}), std::invalid_argument);

  const std::string dir = fresh_dir("io");
  dbe::write_text_atomic(dir + "/f.txt", "payload");
  CHECK(dbe::read_text(dir + "/f.txt") == "payload");
  CHECK(!fs::exists(dir + "/f.txt.tmp"));
  fs::remove_all(dir);
}

TEST_CASE("equilibrium and residue stages write artifacts and pass") {
  const std::string dir = fresh_dir("stages");
  dbe::ExperimentConfig cfg = tiny_config(dir);

  CHECK(dbe::run_stage("equilibrium", cfg) == dbe::kExitOk);
  CHECK(fs::exists(dir + "/manifest.json"));
  CHECK(fs::exists(dir + "/equilibrium.json"));
  const std::string density = dbe::read_text(dir + "/density.csv");
  CHECK(density.rfind("x,mu,band_label\n", 0) == 0);

  cfg.N = {4};
  CHECK(dbe::run_stage("verify-nekrasov", cfg) == dbe::kExitOk);
  const json rep = json::parse(dbe::read_text(dir + "/nekrasov.json"));
  CHECK(rep.at("max_relative_residue").get<double>() < 1e-10);
  fs::remove_all(dir);
}

TEST_CASE("sample stage is bitwise deterministic") {
  const std::string dir1 = fresh_dir("det1");
  const std::string dir2 = fresh_dir("det2");
  dbe::ExperimentConfig cfg = tiny_config(dir1);
  cfg.polynomials.push_back({"x", {0.0, 1.0}});
  cfg.cauchy_points.push_back({4.0, 0.0});
  REQUIRE(dbe::run_stage("sample", cfg) == dbe::kExitOk);
  cfg.out_dir = dir2;
  cfg.threads = 2;
  REQUIRE(dbe::run_stage("sample", cfg) == dbe::kExitOk);
  CHECK(dbe::read_text(dir1 + "/samples_N6.csv") ==
        dbe::read_text(dir2 + "/samples_N6.csv"));
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("covariance stage: artifacts, symmetry, bad points") {
  const std::string dir = fresh_dir("cov");
  dbe::ExperimentConfig cfg = tiny_config(dir);
  cfg.polynomials.push_back({"x", {0.0, 1.0}});
  REQUIRE(dbe::run_stage("covariance", cfg) == dbe::kExitOk);
  const json rep = json::parse(dbe::read_text(dir + "/covariance.json"));
  CHECK(rep.at("mode") == "one_cut");
  CHECK(rep.at("max_relative_asymmetry").get<double>() < 1e-10);
  CHECK(rep.at("linear_stat_covariance").at("matrix")[0][0].get<double>() ==
        doctest::Approx(0.25).epsilon(1e-6));
  const std::string csv = dbe::read_text(dir + "/covariance_pairs.csv");
  CHECK(csv.rfind("u_re,u_im,v_re,v_im,c_re,c_im\n", 0) == 0);

  // a point on the support is rejected as configuration error
  cfg.cauchy_points = {{1.0, 0.0}, {4.0, 0.0}};
  CHECK(dbe::run_stage("covariance", cfg) == dbe::kExitConfig);
  fs::remove_all(dir);
}

TEST_CASE("clt stage emits the trend table; export rebuilds plot CSVs") {
  const std::string dir = fresh_dir("clt");
  dbe::ExperimentConfig cfg = tiny_config(dir);
  cfg.chains.count = 2;
  cfg.chains.samples = 700;
  cfg.check = false;  // N = 6 is far from the limit; keep the smoke fast
  REQUIRE(dbe::run_stage("clt", cfg) == dbe::kExitOk);
  const json rep = json::parse(dbe::read_text(dir + "/clt_trend.json"));
  CHECK(rep.at("estimates").size() == 5);
  CHECK(rep.at("kernel_prediction").contains("cov12"));

  fs::remove(dir + "/clt_trend.csv");
  REQUIRE(dbe::run_stage("export", cfg) == dbe::kExitOk);
  CHECK(fs::exists(dir + "/clt_trend.csv"));
  fs::remove_all(dir);

  const std::string empty = fresh_dir("empty");
  dbe::ExperimentConfig none = tiny_config(empty);
  CHECK(dbe::run_stage("export", none) == dbe::kExitIo);
  CHECK(dbe::run_stage("no-such-stage", none) == dbe::kExitConfig);
  fs::remove_all(empty);
}

TEST_CASE("lln and tails stages run and enforce their trend checks") {
  const std::string dir = fresh_dir("trend");
  dbe::ExperimentConfig cfg = tiny_config(dir);
  cfg.preset.m = 3.0;
  cfg.N = {8, 24};
  cfg.chains.count = 1;
  cfg.chains.samples = 300;
  const int lln_code = dbe::run_stage("lln", cfg);
  CHECK((lln_code == dbe::kExitOk || lln_code == dbe::kExitVerification));
  CHECK(fs::exists(dir + "/lln.json"));

  cfg.preset.family = dbe::Family::convex_potential;
  cfg.preset.m = 2.0;
  REQUIRE(dbe::run_stage("tails", cfg) == dbe::kExitOk);
  const json rep = json::parse(dbe::read_text(dir + "/tails.json"));
  CHECK(rep.at("D").get<double>() > 0.0);
  CHECK(rep.at("frequency").size() == 2);
  fs::remove_all(dir);
}
