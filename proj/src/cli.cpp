#include "dbe/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dbe/covariance.hpp"
#include "dbe/equilibrium.hpp"
#include "dbe/exact.hpp"
#include "dbe/fluctuations.hpp"
#include "dbe/io.hpp"
#include "dbe/mcmc.hpp"
#include "dbe/rational.hpp"
#include "dbe/rng.hpp"

namespace dbe {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kArtifactVersion = "1.0.0";
constexpr double kNekrasovTol = 1e-10;
constexpr double kSymmetryTol = 1e-8;
constexpr double kStageEnumCap = 2e5;

// ---------- config schema ----------

[[noreturn]] void fail_at(const std::string& path, const std::string& what) {
  throw ConfigError("config error at " + path + ": " + what);
}

void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) fail_at(path, "expected an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key())) fail_at(path + "/" + item.key(), "unknown key");
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail_at(path, "expected a number");
  return j.get<double>();
}

std::int64_t get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail_at(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail_at(path, "expected a string");
  return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail_at(path, "expected a boolean");
  return j.get<bool>();
}

std::vector<double> get_number_list(const json& j, const std::string& path) {
  if (!j.is_array()) fail_at(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(get_number(j[i], path + "/" + std::to_string(i)));
  return out;
}

json cplx_to_json(cplx z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

cplx cplx_from_json(const json& j, const std::string& path) {
  check_keys(j, path, {"re", "im"});
  if (!j.contains("re") || !j.contains("im")) fail_at(path, "need re and im");
  return {get_number(j["re"], path + "/re"), get_number(j["im"], path + "/im")};
}

json preset_to_json(const ModelPreset& p) {
  json j;
  j["family"] = to_string(p.family);
  j["theta"] = p.theta;
  j["m"] = p.m;
  j["M_override"] = p.M_override;
  j["cut_a"] = p.cut_a;
  j["cut_b"] = p.cut_b;
  j["cut_fill"] = p.cut_fill;
  j["cut_gauge"] = p.cut_gauge;
  j["A_hat"] = p.A_hat;
  j["B_hat"] = p.B_hat;
  j["C_hat"] = p.C_hat;
  j["t_hat"] = p.t_hat;
  j["H_hat"] = p.H_hat;
  j["D_hat"] = p.D_hat;
  j["n1_frac"] = p.n1_frac;
  j["V_coeffs"] = p.V_coeffs;
  j["kappa"] = p.kappa;
  j["z_inf"] = cplx_to_json(p.z_inf);
  j["w_inf"] = cplx_to_json(p.w_inf);
  j["eps_tail"] = p.eps_tail;
  j["safety"] = p.safety;
  return j;
}

ModelPreset preset_from_json(const json& j, const std::string& path) {
  check_keys(j, path,
             {"family", "theta", "m", "M_override", "cut_a", "cut_b", "cut_fill",
              "cut_gauge", "A_hat", "B_hat", "C_hat", "t_hat", "H_hat", "D_hat",
              "n1_frac", "V_coeffs", "kappa", "z_inf", "w_inf", "eps_tail", "safety"});
  ModelPreset p;
  if (j.contains("family")) {
    const std::string fam = get_string(j["family"], path + "/family");
    try {
      p.family = family_from_string(fam);
    } catch (const std::invalid_argument& e) {
      fail_at(path + "/family", e.what());
    }
  }
  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = get_number(j[key], path + "/" + key);
  };
  num("theta", p.theta);
  num("m", p.m);
  num("A_hat", p.A_hat);
  num("B_hat", p.B_hat);
  num("C_hat", p.C_hat);
  num("t_hat", p.t_hat);
  num("H_hat", p.H_hat);
  num("D_hat", p.D_hat);
  num("n1_frac", p.n1_frac);
  num("kappa", p.kappa);
  num("eps_tail", p.eps_tail);
  num("safety", p.safety);
  if (j.contains("M_override"))
    p.M_override = get_integer(j["M_override"], path + "/M_override");
  auto list = [&](const char* key, std::vector<double>& dst) {
    if (j.contains(key)) dst = get_number_list(j[key], path + "/" + key);
  };
  list("cut_a", p.cut_a);
  list("cut_b", p.cut_b);
  list("cut_fill", p.cut_fill);
  list("cut_gauge", p.cut_gauge);
  list("V_coeffs", p.V_coeffs);
  if (j.contains("z_inf")) p.z_inf = cplx_from_json(j["z_inf"], path + "/z_inf");
  if (j.contains("w_inf")) p.w_inf = cplx_from_json(j["w_inf"], path + "/w_inf");
  if (p.theta <= 0.0) fail_at(path + "/theta", "theta must be positive");
  return p;
}

const std::set<std::string> kKnownAnalyses = {
    "nekrasov", "equilibrium", "sample", "covariance", "clt", "lln", "tails"};

}  // namespace

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["preset"] = preset_to_json(cfg.preset);
  j["N"] = cfg.N;
  j["chains"] = {{"count", cfg.chains.count},
                 {"samples", cfg.chains.samples},
                 {"thin", cfg.chains.thin},
                 {"burn_in", cfg.chains.burn_in}};
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  json polys = json::array();
  for (const auto& p : cfg.polynomials)
    polys.push_back({{"name", p.name}, {"coeffs", p.coeffs}});
  j["polynomials"] = polys;
  json pts = json::array();
  for (cplx z : cfg.cauchy_points) pts.push_back(cplx_to_json(z));
  j["cauchy_points"] = pts;
  j["analyses"] = cfg.analyses;
  j["grid"] = cfg.grid;
  j["tail_D"] = cfg.tail_D;
  j["out"] = cfg.out_dir;
  j["check"] = cfg.check;
  j["rational"] = cfg.rational;
  j["dump_positions"] = cfg.dump_positions;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, "", {"preset", "N", "chains", "seed", "threads", "polynomials",
                     "cauchy_points", "analyses", "grid", "tail_D", "out", "check",
                     "rational", "dump_positions"});
  ExperimentConfig cfg;
  if (j.contains("preset")) cfg.preset = preset_from_json(j["preset"], "/preset");
  if (j.contains("N")) {
    if (!j["N"].is_array() || j["N"].empty()) fail_at("/N", "expected a nonempty array");
    cfg.N.clear();
    for (std::size_t i = 0; i < j["N"].size(); ++i) {
      const auto n = get_integer(j["N"][i], "/N/" + std::to_string(i));
      if (n < 1) fail_at("/N/" + std::to_string(i), "particle count must be positive");
      cfg.N.push_back(static_cast<int>(n));
    }
  }
  if (j.contains("chains")) {
    const json& c = j["chains"];
    check_keys(c, "/chains", {"count", "samples", "thin", "burn_in"});
    if (c.contains("count"))
      cfg.chains.count = static_cast<int>(get_integer(c["count"], "/chains/count"));
    if (c.contains("samples")) cfg.chains.samples = get_integer(c["samples"], "/chains/samples");
    if (c.contains("thin")) cfg.chains.thin = get_integer(c["thin"], "/chains/thin");
    if (c.contains("burn_in"))
      cfg.chains.burn_in = get_integer(c["burn_in"], "/chains/burn_in");
    if (cfg.chains.count < 1) fail_at("/chains/count", "need at least one chain");
    if (cfg.chains.samples < 1) fail_at("/chains/samples", "need at least one sample");
    if (cfg.chains.thin < 1) fail_at("/chains/thin", "thinning must be >= 1");
    if (cfg.chains.burn_in < 0) fail_at("/chains/burn_in", "burn-in must be >= 0");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() && !j["seed"].is_number_unsigned())
      fail_at("/seed", "expected an integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("threads")) {
    cfg.threads = static_cast<int>(get_integer(j["threads"], "/threads"));
    if (cfg.threads < 1) fail_at("/threads", "need at least one thread");
  }
  if (j.contains("polynomials")) {
    if (!j["polynomials"].is_array()) fail_at("/polynomials", "expected an array");
    for (std::size_t i = 0; i < j["polynomials"].size(); ++i) {
      const std::string path = "/polynomials/" + std::to_string(i);
      const json& p = j["polynomials"][i];
      check_keys(p, path, {"name", "coeffs"});
      PolyObservable po;
      po.name = p.contains("name") ? get_string(p["name"], path + "/name") : "";
      if (po.name.empty()) fail_at(path + "/name", "observable needs a name");
      if (!p.contains("coeffs")) fail_at(path + "/coeffs", "missing coefficients");
      po.coeffs = get_number_list(p["coeffs"], path + "/coeffs");
      if (po.coeffs.empty()) fail_at(path + "/coeffs", "need at least one coefficient");
      cfg.polynomials.push_back(std::move(po));
    }
  }
  if (j.contains("cauchy_points")) {
    if (!j["cauchy_points"].is_array()) fail_at("/cauchy_points", "expected an array");
    for (std::size_t i = 0; i < j["cauchy_points"].size(); ++i)
      cfg.cauchy_points.push_back(
          cplx_from_json(j["cauchy_points"][i], "/cauchy_points/" + std::to_string(i)));
  }
  if (j.contains("analyses")) {
    if (!j["analyses"].is_array()) fail_at("/analyses", "expected an array");
    cfg.analyses.clear();
    for (std::size_t i = 0; i < j["analyses"].size(); ++i) {
      const std::string a =
          get_string(j["analyses"][i], "/analyses/" + std::to_string(i));
      if (!kKnownAnalyses.count(a))
        fail_at("/analyses/" + std::to_string(i), "unknown analysis '" + a + "'");
      cfg.analyses.push_back(a);
    }
  }
  if (j.contains("grid")) {
    cfg.grid = static_cast<int>(get_integer(j["grid"], "/grid"));
    if (cfg.grid < 16) fail_at("/grid", "grid must have at least 16 cells");
  }
  if (j.contains("tail_D")) cfg.tail_D = get_number(j["tail_D"], "/tail_D");
  if (j.contains("out")) cfg.out_dir = get_string(j["out"], "/out");
  if (j.contains("check")) cfg.check = get_bool(j["check"], "/check");
  if (j.contains("rational")) cfg.rational = get_bool(j["rational"], "/rational");
  if (j.contains("dump_positions"))
    cfg.dump_positions = get_bool(j["dump_positions"], "/dump_positions");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": " + e.what());
  }
  if (j.is_object() && j.contains("config")) j = j["config"];
  return config_from_json(j);
}

namespace {

// ---------- shared stage helpers ----------

void write_json_file(const std::string& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

json manifest_json(const ExperimentConfig& cfg) {
  json j;
  j["config"] = config_to_json(cfg);
  j["rng"] = Rng::kIdentity;
  j["versions"] = {{"artifact", kArtifactVersion},
                   {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  return j;
}

std::string obs_name(cplx z) {
  return "G(" + format_g17(z.real()) + "," + format_g17(z.imag()) + ")";
}

std::function<cplx(cplx)> poly_fn(const std::vector<double>& coeffs) {
  std::vector<cplx> c(coeffs.begin(), coeffs.end());
  return [c](cplx x) { return polyval(c, x); };
}

ObservableSet make_observables(const ExperimentConfig& cfg) {
  ObservableSet obs;
  for (const auto& p : cfg.polynomials) obs.add_linear_stat(p.name, poly_fn(p.coeffs));
  for (cplx z : cfg.cauchy_points) obs.add_stieltjes(obs_name(z), z);
  return obs;
}

CollectOptions chain_options(const ExperimentConfig& cfg, int N) {
  CollectOptions co;
  co.seed = cfg.seed;
  co.chains = cfg.chains.count;
  co.samples_per_chain = cfg.chains.samples;
  co.thin_sweeps = cfg.chains.thin;
  // interactive default: enough sweeps to relax the evenly-spread start
  co.burn_in_sweeps = cfg.chains.burn_in > 0
                          ? cfg.chains.burn_in
                          : std::min<std::int64_t>(default_burn_in(N),
                                                   std::max<std::int64_t>(500, 20LL * N));
  co.threads = cfg.threads;
  return co;
}

struct SolvedModel {
  BuiltModel bm;
  EquilibriumMeasure mu;
};

SolvedModel solve_preset(const ExperimentConfig& cfg) {
  SolvedModel sm{build(cfg.preset, cfg.N.back()), {}};
  try {
    sm.mu = solve_equilibrium(sm.bm.model, cfg.grid);
  } catch (const std::runtime_error& e) {
    throw VerificationFailure(std::string("equilibrium solve: ") + e.what());
  }
  return sm;
}

// evaluation points clear of the contour family around the bands
std::vector<cplx> default_points(const EquilibriumMeasure& mu) {
  const double a = mu.bands.front().first;
  const double b = mu.bands.back().second;
  const double h = 0.5 * (b - a);
  return {cplx(b + h, 0.0), cplx(b + 1.5 * h, 0.0)};
}

std::string band_label(const EquilibriumMeasure& mu, double x) {
  for (std::size_t i = 0; i < mu.bands.size(); ++i)
    if (x >= mu.bands[i].first && x <= mu.bands[i].second)
      return "band" + std::to_string(i);
  for (const auto& s : mu.saturated)
    if (x >= s.first && x <= s.second) return "saturated";
  return "void";
}

// ---------- stages ----------

void stage_nekrasov(const ExperimentConfig& cfg) {
  json rep;
  rep["tolerance"] = kNekrasovTol;
  CsvWriter csv({"N", "theta", "xi_re", "xi_im", "abs_residue", "mode"});

  std::vector<int> Ns;
  for (int N : cfg.N) {
    BuiltModel bm = build(cfg.preset, N);
    if (bm.spec.count_configurations() <= kStageEnumCap) Ns.push_back(N);
  }
  bool fallback = false;
  if (Ns.empty()) {
    Ns = {4};
    fallback = true;
  }
  rep["N_fallback"] = fallback;

  double worst = 0.0;
  json per_n = json::array();
  for (int N : Ns) {
    BuiltModel bm = build(cfg.preset, N);
    ExactEnsemble ens = build_exact(bm);
    const auto candidates = pole_candidates(bm.spec);
    auto R = [&](cplx xi) { return nekrasov_R(ens, bm.model, xi); };
    double scale = 1.0;
    for (double m : candidates) scale = std::max(scale, std::abs(R(cplx(m, 0.5))));
    double worst_n = 0.0;
    for (double m : candidates) {
      const double res = std::abs(contour_residue(R, cplx(m, 0.0), 0.1));
      worst_n = std::max(worst_n, res / scale);
      csv.row({std::to_string(N), format_g17(bm.model.theta), format_g17(m),
               format_g17(0.0), format_g17(res), "float"});
    }
    worst = std::max(worst, worst_n);
    per_n.push_back({{"N", N}, {"max_relative_residue", worst_n}, {"scale", scale}});
  }
  rep["per_N"] = per_n;
  rep["max_relative_residue"] = worst;

  bool rational_exact = true;
  if (cfg.rational) {
#ifdef DBE_HAVE_GMP
    if (cfg.preset.theta != 1.0)
      throw ConfigError("rational mode requires theta = 1");
    json rat = json::array();
    for (int N : Ns) {
      BuiltModel bm = build(cfg.preset, N);
      if (!rational::supported(bm.model))
        throw ConfigError("rational mode does not support this weight family");
      auto ens = rational::build(bm);
      const auto candidates = pole_candidates(bm.spec);
      bool all_zero = true;
      for (double m : candidates) {
        const auto r =
            rational::nekrasov_residue(ens, bm.model, std::llround(m));
        const bool zero = r == 0;
        all_zero = all_zero && zero;
        csv.row({std::to_string(N), format_g17(bm.model.theta), format_g17(m),
                 format_g17(0.0), zero ? "0" : format_g17(r.get_d()), "rational"});
      }
      rational_exact = rational_exact && all_zero;
      rat.push_back({{"N", N}, {"all_residues_zero", all_zero}});
    }
    rep["rational"] = rat;
    rep["rational_exact"] = rational_exact;
#else
    throw ConfigError("rational mode unavailable: built without GMP");
#endif
  }

  write_json_file(join_path(cfg.out_dir, "nekrasov.json"), rep);
  write_text_atomic(join_path(cfg.out_dir, "nekrasov_residues.csv"), csv.str());
  std::printf("verify-nekrasov: max relative residue %.3e (tol %.0e)\n", worst,
              kNekrasovTol);
  if (cfg.check && (worst >= kNekrasovTol || !rational_exact))
    throw VerificationFailure("loop observable has a residue above tolerance");
}

void stage_equilibrium(const ExperimentConfig& cfg) {
  SolvedModel sm = solve_preset(cfg);
  const EquilibriumMeasure& mu = sm.mu;

  json rep;
  rep["theta"] = mu.theta;
  rep["kkt_residual"] = mu.kkt_residual;
  rep["iterations"] = mu.iterations;
  rep["fillings"] = mu.fillings;
  rep["lagrange"] = mu.lagrange;
  auto pairs = [](const std::vector<std::pair<double, double>>& v) {
    json out = json::array();
    for (const auto& p : v) out.push_back({p.first, p.second});
    return out;
  };
  rep["bands"] = pairs(mu.bands);
  rep["voids"] = pairs(mu.voids);
  rep["saturated"] = pairs(mu.saturated);
  json x = json::array(), d = json::array(), lab = json::array();
  for (std::size_t j = 0; j < mu.grid.size(); ++j) {
    x.push_back(mu.grid[j]);
    d.push_back(mu.density[j]);
    lab.push_back(band_label(mu, mu.grid[j]));
  }
  rep["density"] = {{"x", x}, {"mu", d}, {"band_label", lab}};
  write_json_file(join_path(cfg.out_dir, "equilibrium.json"), rep);

  CsvWriter csv({"x", "mu", "band_label"});
  for (std::size_t j = 0; j < mu.grid.size(); ++j)
    csv.row({format_g17(mu.grid[j]), format_g17(mu.density[j]),
             band_label(mu, mu.grid[j])});
  write_text_atomic(join_path(cfg.out_dir, "density.csv"), csv.str());
  std::printf("equilibrium: %zu band(s), kkt residual %.3e\n", mu.bands.size(),
              mu.kkt_residual);
}

void stage_sample(const ExperimentConfig& cfg) {
  ObservableSet obs = make_observables(cfg);
  for (int N : cfg.N) {
    BuiltModel bm = build(cfg.preset, N);
    CollectOptions co = chain_options(cfg, N);
    co.keep_configs = cfg.dump_positions;
    LinearStatSample run = collect_samples(bm, obs, co);

    std::vector<std::string> header = {"chain", "sample"};
    for (const auto& name : run.names) {
      header.push_back(name + "_re");
      header.push_back(name + "_im");
    }
    CsvWriter csv(header);
    for (std::int64_t s = 0; s < run.count(); ++s) {
      std::vector<std::string> cells = {std::to_string(s / run.per_chain),
                                        std::to_string(s % run.per_chain)};
      for (const auto& col : run.values) {
        cells.push_back(format_g17(col[s].real()));
        cells.push_back(format_g17(col[s].imag()));
      }
      csv.row(cells);
    }
    write_text_atomic(join_path(cfg.out_dir, "samples_N" + std::to_string(N) + ".csv"),
                      csv.str());

    if (cfg.dump_positions) {
      CsvWriter pos({"chain", "sample", "particle", "position"});
      for (std::int64_t s = 0; s < run.count(); ++s)
        for (std::size_t i = 0; i < run.configs[s].positions.size(); ++i)
          pos.row({std::to_string(s / run.per_chain), std::to_string(s % run.per_chain),
                   std::to_string(i), format_g17(run.configs[s].positions[i])});
      write_text_atomic(
          join_path(cfg.out_dir, "positions_N" + std::to_string(N) + ".csv"),
          pos.str());
    }
    std::printf("sample: N=%d, %lld samples across %d chain(s)\n", N,
                static_cast<long long>(run.count()), run.chain_count);
  }
}

void stage_covariance(const ExperimentConfig& cfg) {
  SolvedModel sm = solve_preset(cfg);
  SpectralData sd = spectral_data(sm.mu, sm.bm.model);
  CovarianceKernel kern = make_kernel(sd, sm.bm.model.theta);

  std::vector<cplx> pts = cfg.cauchy_points;
  if (pts.empty()) {
    const double a = sd.alpha.front(), b = sd.beta.back();
    const double h = 0.5 * (b - a), c = 0.5 * (a + b);
    pts = {cplx(b + h, 0.0),     cplx(b + 1.5 * h, 0.0), cplx(a - h, 0.0),
           cplx(a - 1.5 * h, 0.0), cplx(c, 2.0 * h),       cplx(c, -2.0 * h)};
  }

  json rep;
  rep["mode"] =
      kern.mode == CovarianceKernel::Mode::one_cut_closed_form ? "one_cut" : "multi_cut";
  rep["theta"] = kern.theta;
  rep["alpha"] = kern.alpha;
  rep["beta"] = kern.beta;

  CsvWriter csv({"u_re", "u_im", "v_re", "v_im", "c_re", "c_im"});
  json pairs = json::array();
  double worst_asym = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i; j < pts.size(); ++j) {
      const cplx c = kernel_multi_cut(pts[i], pts[j], kern);
      const cplx ct = kernel_multi_cut(pts[j], pts[i], kern);
      worst_asym =
          std::max(worst_asym, std::abs(c - ct) / std::max(1.0, std::abs(c)));
      csv.row({format_g17(pts[i].real()), format_g17(pts[i].imag()),
               format_g17(pts[j].real()), format_g17(pts[j].imag()),
               format_g17(c.real()), format_g17(c.imag())});
      pairs.push_back({{"u", cplx_to_json(pts[i])},
                       {"v", cplx_to_json(pts[j])},
                       {"c", cplx_to_json(c)}});
    }
  rep["pairs"] = pairs;
  rep["max_relative_asymmetry"] = worst_asym;

  if (!cfg.polynomials.empty()) {
    json names = json::array();
    for (const auto& p : cfg.polynomials) names.push_back(p.name);
    json matrix = json::array();
    for (const auto& pi : cfg.polynomials) {
      json rowv = json::array();
      for (const auto& pj : cfg.polynomials)
        rowv.push_back(
            linear_stat_covariance(poly_fn(pi.coeffs), poly_fn(pj.coeffs), kern));
      matrix.push_back(rowv);
    }
    rep["linear_stat_covariance"] = {{"names", names}, {"matrix", matrix}};
  }

  if (sm.bm.model.varphi_plus && sm.bm.model.varphi_minus) {
    json mc = json::array();
    for (cplx u : pts)
      mc.push_back({{"u", cplx_to_json(u)},
                    {"value", cplx_to_json(mean_correction(kern, sd, sm.bm.model, u))}});
    rep["mean_correction"] = mc;
  }

  write_json_file(join_path(cfg.out_dir, "covariance.json"), rep);
  write_text_atomic(join_path(cfg.out_dir, "covariance_pairs.csv"), csv.str());
  std::printf("covariance: %zu pair(s), max relative asymmetry %.3e\n", pairs.size(),
              worst_asym);
  if (cfg.check && worst_asym >= kSymmetryTol)
    throw VerificationFailure("covariance kernel asymmetry above tolerance");
}

void stage_clt(const ExperimentConfig& cfg) {
  SolvedModel sm = solve_preset(cfg);
  SpectralData sd = spectral_data(sm.mu, sm.bm.model);
  CovarianceKernel kern = make_kernel(sd, sm.bm.model.theta);

  std::vector<cplx> pts = cfg.cauchy_points;
  if (pts.size() < 2) pts = default_points(sm.mu);
  const cplx u1 = pts[0], u2 = pts[1];
  const double invt = 1.0 / sm.bm.model.theta;
  const cplx pred11 = invt * kernel_multi_cut(u1, u1, kern);
  const cplx pred12 = invt * kernel_multi_cut(u1, u2, kern);
  const cplx pred22 = invt * kernel_multi_cut(u2, u2, kern);

  ObservableSet obs;
  obs.add_stieltjes(obs_name(u1), u1);
  obs.add_stieltjes(obs_name(u2), u2);

  struct Row {
    int N;
    std::string name;
    int order;
    cplx value;
    double se;
    double ess;
  };
  std::vector<Row> rows;

  for (int N : cfg.N) {
    BuiltModel bm = build(cfg.preset, N);
    CollectOptions co = chain_options(cfg, N);
    co.keep_configs = false;
    LinearStatSample run = collect_samples(bm, obs, co);
    const double Nd = N;
    auto push = [&](const std::string& name, const std::vector<std::size_t>& idx,
                    int order) {
      CumulantEstimate est = estimate_cumulants(run, idx, order);
      const double scale = std::pow(Nd, order);  // cumulants of N G_N
      rows.push_back({N, name, order, est.value * scale, est.standard_error * scale,
                      est.ess});
    };
    push("cov11", {0, 0}, 2);
    push("cov12", {0, 1}, 2);
    push("cov22", {1, 1}, 2);
    push("k3", {0}, 3);
    push("k4", {0}, 4);
  }

  json rep;
  rep["points"] = {cplx_to_json(u1), cplx_to_json(u2)};
  rep["kernel_prediction"] = {{"cov11", cplx_to_json(pred11)},
                              {"cov12", cplx_to_json(pred12)},
                              {"cov22", cplx_to_json(pred22)}};
  json jrows = json::array();
  CsvWriter csv({"N", "observable", "cumulant_order", "value_re", "value_im", "stderr",
                 "ess"});
  for (const auto& r : rows) {
    jrows.push_back({{"N", r.N},
                     {"observable", r.name},
                     {"order", r.order},
                     {"value", cplx_to_json(r.value)},
                     {"stderr", r.se},
                     {"ess", r.ess}});
    csv.row({std::to_string(r.N), r.name, std::to_string(r.order),
             format_g17(r.value.real()), format_g17(r.value.imag()), format_g17(r.se),
             format_g17(r.ess)});
  }
  rep["estimates"] = jrows;

  // checks: covariance against the kernel at the largest N; higher
  // cumulants shrink along N up to one standard error of slack
  auto find_row = [&](int N, const std::string& name) -> const Row& {
    for (const auto& r : rows)
      if (r.N == N && r.name == name) return r;
    throw std::logic_error("clt: missing trend row");
  };
  const int Nmax = *std::max_element(cfg.N.begin(), cfg.N.end());
  const Row& top = find_row(Nmax, "cov12");
  const bool cov_ok = std::abs(top.value - pred12) <= 3.0 * top.se;
  bool trend_ok = true;
  std::vector<int> sortedN = cfg.N;
  std::sort(sortedN.begin(), sortedN.end());
  for (const char* name : {"k3", "k4"})
    for (std::size_t i = 1; i < sortedN.size(); ++i) {
      const Row& prev = find_row(sortedN[i - 1], name);
      const Row& cur = find_row(sortedN[i], name);
      if (std::abs(cur.value) > std::abs(prev.value) + prev.se + cur.se)
        trend_ok = false;
    }
  rep["checks"] = {{"cov12_within_3se", cov_ok}, {"higher_cumulants_shrink", trend_ok}};
  write_json_file(join_path(cfg.out_dir, "clt_trend.json"), rep);
  write_text_atomic(join_path(cfg.out_dir, "clt_trend.csv"), csv.str());
  std::printf("clt: cov12 within 3 SE: %s; higher cumulants shrink: %s\n",
              cov_ok ? "yes" : "no", trend_ok ? "yes" : "no");
  if (cfg.check && !(cov_ok && trend_ok))
    throw VerificationFailure("clt trend check failed");
}

void stage_lln(const ExperimentConfig& cfg) {
  SolvedModel sm = solve_preset(cfg);
  std::vector<double> coeffs =
      cfg.polynomials.empty() ? std::vector<double>{0.0, 1.0} : cfg.polynomials[0].coeffs;
  const std::string fname = cfg.polynomials.empty() ? "x" : cfg.polynomials[0].name;
  auto f = poly_fn(coeffs);

  std::vector<LinearStatSample> runs;
  ObservableSet none;
  for (int N : cfg.N) {
    BuiltModel bm = build(cfg.preset, N);
    runs.push_back(collect_samples(bm, none, chain_options(cfg, N)));
  }
  LlnReport rep = lln_check(runs, sm.mu,
                            [&f](double x) { return f(cplx(x, 0.0)).real(); });

  json out;
  out["f"] = fname;
  out["epsilon"] = rep.epsilon;
  out["N"] = rep.N;
  out["scaled_gap"] = rep.scaled_gap;
  out["decreasing"] = rep.decreasing;
  write_json_file(join_path(cfg.out_dir, "lln.json"), out);
  CsvWriter csv({"N", "scaled_gap"});
  for (std::size_t i = 0; i < rep.N.size(); ++i)
    csv.row({std::to_string(rep.N[i]), format_g17(rep.scaled_gap[i])});
  write_text_atomic(join_path(cfg.out_dir, "lln.csv"), csv.str());
  std::printf("lln: scaled gap %s\n", rep.decreasing ? "decreasing" : "NOT decreasing");
  if (cfg.check && rep.N.size() >= 2 && !rep.decreasing)
    throw VerificationFailure("scaled law-of-large-numbers gap is not decreasing");
}

void stage_tails(const ExperimentConfig& cfg) {
  SolvedModel sm = solve_preset(cfg);
  double radius = 0.0;
  for (const auto& b : sm.mu.bands)
    radius = std::max({radius, std::abs(b.first), std::abs(b.second)});
  const double D = cfg.tail_D > 0.0 ? cfg.tail_D : 2.0 * radius;
  const double D_aux = 1.1 * radius;

  std::vector<LinearStatSample> runs;
  ObservableSet none;
  for (int N : cfg.N) {
    BuiltModel bm = build(cfg.preset, N);
    runs.push_back(collect_samples(bm, none, chain_options(cfg, N)));
  }
  TailReport main = tail_check(runs, D);
  TailReport aux = tail_check(runs, D_aux);

  bool nonincreasing = true;
  for (std::size_t i = 1; i < main.frequency.size(); ++i)
    if (main.frequency[i] > main.frequency[i - 1]) nonincreasing = false;

  json rep;
  rep["D"] = D;
  rep["band_radius"] = radius;
  rep["N"] = main.N;
  rep["frequency"] = main.frequency;
  rep["log_slope"] = main.log_slope;
  rep["nonincreasing"] = nonincreasing;
  rep["aux"] = {{"D", D_aux},
                {"frequency", aux.frequency},
                {"log_slope", aux.log_slope},
                {"decaying", aux.decaying}};
  write_json_file(join_path(cfg.out_dir, "tails.json"), rep);
  CsvWriter csv({"N", "D", "frequency"});
  for (std::size_t i = 0; i < main.N.size(); ++i)
    csv.row({std::to_string(main.N[i]), format_g17(D), format_g17(main.frequency[i])});
  for (std::size_t i = 0; i < aux.N.size(); ++i)
    csv.row({std::to_string(aux.N[i]), format_g17(D_aux), format_g17(aux.frequency[i])});
  write_text_atomic(join_path(cfg.out_dir, "tails.csv"), csv.str());
  std::printf("tails: exceedance frequency at D=%.4g %s\n", D,
              nonincreasing ? "nonincreasing" : "NOT nonincreasing");
  if (cfg.check && main.N.size() >= 2 && !nonincreasing)
    throw VerificationFailure("tail exceedance frequency grows with N");
}

void stage_export(const ExperimentConfig& cfg) {
  int exported = 0;
  const std::string eq = join_path(cfg.out_dir, "equilibrium.json");
  if (fs::exists(eq)) {
    const json j = json::parse(read_text(eq));
    CsvWriter csv({"x", "mu", "band_label"});
    const json& d = j.at("density");
    for (std::size_t i = 0; i < d.at("x").size(); ++i)
      csv.row({format_g17(d.at("x")[i].get<double>()),
               format_g17(d.at("mu")[i].get<double>()),
               d.at("band_label")[i].get<std::string>()});
    write_text_atomic(join_path(cfg.out_dir, "density.csv"), csv.str());
    ++exported;
  }
  const std::string clt = join_path(cfg.out_dir, "clt_trend.json");
  if (fs::exists(clt)) {
    const json j = json::parse(read_text(clt));
    CsvWriter csv(
        {"N", "observable", "cumulant_order", "value_re", "value_im", "stderr", "ess"});
    for (const auto& r : j.at("estimates"))
      csv.row({std::to_string(r.at("N").get<int>()),
               r.at("observable").get<std::string>(),
               std::to_string(r.at("order").get<int>()),
               format_g17(r.at("value").at("re").get<double>()),
               format_g17(r.at("value").at("im").get<double>()),
               format_g17(r.at("stderr").get<double>()),
               format_g17(r.at("ess").get<double>())});
    write_text_atomic(join_path(cfg.out_dir, "clt_trend.csv"), csv.str());
    ++exported;
  }
  const std::string cov = join_path(cfg.out_dir, "covariance.json");
  if (fs::exists(cov)) {
    const json j = json::parse(read_text(cov));
    CsvWriter csv({"u_re", "u_im", "v_re", "v_im", "c_re", "c_im"});
    for (const auto& p : j.at("pairs"))
      csv.row({format_g17(p.at("u").at("re").get<double>()),
               format_g17(p.at("u").at("im").get<double>()),
               format_g17(p.at("v").at("re").get<double>()),
               format_g17(p.at("v").at("im").get<double>()),
               format_g17(p.at("c").at("re").get<double>()),
               format_g17(p.at("c").at("im").get<double>())});
    write_text_atomic(join_path(cfg.out_dir, "covariance_pairs.csv"), csv.str());
    ++exported;
  }
  if (exported == 0)
    throw IoError("missing stage output: nothing to export in " + cfg.out_dir);
  std::printf("export: regenerated %d plot file(s)\n", exported);
}

void dispatch(const std::string& stage, const ExperimentConfig& cfg) {
  if (stage == "verify-nekrasov" || stage == "nekrasov") return stage_nekrasov(cfg);
  if (stage == "equilibrium") return stage_equilibrium(cfg);
  if (stage == "sample") return stage_sample(cfg);
  if (stage == "covariance") return stage_covariance(cfg);
  if (stage == "clt") return stage_clt(cfg);
  if (stage == "lln") return stage_lln(cfg);
  if (stage == "tails") return stage_tails(cfg);
  if (stage == "export") return stage_export(cfg);
  throw ConfigError("unknown stage '" + stage + "'");
}

}  // namespace

int run_stage(const std::string& stage, const ExperimentConfig& cfg) {
  try {
    fs::create_directories(cfg.out_dir);
    write_json_file(join_path(cfg.out_dir, "manifest.json"), manifest_json(cfg));
    dispatch(stage, cfg);
    return kExitOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const VerificationFailure& e) {
    std::fprintf(stderr, "verification failed: %s\n", e.what());
    return kExitVerification;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
}

int run_pipeline(const ExperimentConfig& cfg) {
  static const std::vector<std::string> order = {
      "nekrasov", "equilibrium", "sample", "covariance", "clt", "lln", "tails"};
  json stages = json::array();
  int worst = kExitOk;
  for (const auto& stage : order) {
    if (std::find(cfg.analyses.begin(), cfg.analyses.end(), stage) ==
        cfg.analyses.end())
      continue;
    const int code = run_stage(stage, cfg);
    stages.push_back({{"stage", stage}, {"exit", code}});
    worst = std::max(worst, code);
  }
  if (worst == kExitOk) {
    const int code = run_stage("export", cfg);
    stages.push_back({{"stage", "export"}, {"exit", code}});
    worst = std::max(worst, code);
  }
  try {
    fs::create_directories(cfg.out_dir);
    json rep = {{"stages", stages}, {"exit", worst}};
    write_text_atomic((fs::path(cfg.out_dir) / "pipeline.json").string(),
                      rep.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    worst = std::max(worst, kExitIo);
  }
  return worst;
}

}  // namespace dbe
