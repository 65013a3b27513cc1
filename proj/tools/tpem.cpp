// Command-line front end: certify, simulate, kcheck, verify.
// Exit codes: 0 success, 1 configuration/usage errors, 2 failed checks or
// rejected certification.

#include "tpem/config.hpp"
#include "tpem/io.hpp"
#include "tpem/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

using namespace tpem;

namespace {

int log_level() {
  const char* env = std::getenv("TPEM_LOG");
  if (!env) return 1;  // info
  std::string v(env);
  if (v == "debug") return 0;
  if (v == "info") return 1;
  if (v == "warn") return 2;
  return 3;
}

void log_info(const std::string& msg) {
  if (log_level() <= 1) std::cerr << "[tpem] " << msg << "\n";
}

struct CommonArgs {
  std::string configPath;
  std::string outDir;
  uint64_t seed = 0;
  bool seedSet = false;
};

RunConfig load_config(const CommonArgs& args) {
  if (args.configPath.empty()) throw ConfigError("--config is required");
  RunConfig cfg = parse_config_file(args.configPath);
  if (!args.outDir.empty()) cfg.outDir = args.outDir;
  if (args.seedSet) {
    cfg.boundarySeed = args.seed;
    cfg.sourceSeed = args.seed;
  }
  return cfg;
}

int cmd_certify(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  BuiltProblem p = build_problem(cfg);
  Certificate cert = certify(*p.material, *p.triple, cfg.certifyParams);
  std::filesystem::create_directories(cfg.outDir);
  const std::string path = cfg.outDir + "/certificate.json";
  write_text_file(path, certificate_to_json(cert));
  if (cert.accepted) {
    std::cout << "certificate: accepted, nu_min=" << cert.nuMin << ", c=" << cert.c << " -> " << path << "\n";
    return 0;
  }
  std::cout << "certificate: REJECTED (" << cert.failureReason << ") -> " << path << "\n";
  double worst = std::numeric_limits<double>::infinity();
  std::string worstName = "none";
  for (const auto& m : cert.conditions)
    if (!m.pass && m.margin < worst) {
      worst = m.margin;
      worstName = m.name;
    }
  std::cout << "worst violated condition: " << worstName << " (margin " << worst << ")\n";
  return 2;
}

int cmd_simulate(const CommonArgs& args, const std::string& solver, bool overrideCert) {
  RunConfig cfg = load_config(args);
  if (!solver.empty()) cfg.solver = solver;
  if (!cfg.cells) throw ConfigError("simulate needs a grid");
  BuiltProblem p = build_problem(cfg);
  EvoSystem sys = make_system(p.complex, p.suite, *p.material, *p.triple);
  SourceTerm sources = build_sources(cfg, sys.layout);

  Certificate cert = certify(*p.material, *p.triple, cfg.certifyParams);
  double nu = cfg.nuAuto ? cert.nuMin : cfg.nu;
  log_info("certificate " + std::string(cert.accepted ? "accepted" : "rejected") +
           ", nu_min=" + std::to_string(cert.nuMin) + ", using nu=" + std::to_string(nu));
  if (!cert.accepted && !overrideCert) {
    std::cout << "certificate rejected the data (" << cert.failureReason
              << "); pass --override-certificate to run anyway\n";
    return 2;
  }

  TimeSeries series;
  auto t0 = std::chrono::steady_clock::now();
  if (cfg.solver == "time") {
    SimulateOptions opts;
    opts.certificate = &cert;
    opts.overrideCertificate = overrideCert;
    series = simulate(sys, sources, cfg.dt, nu, cfg.nSteps, opts);
  } else if (cfg.solver == "freq") {
    FreqOptions opts;
    opts.certificate = &cert;
    opts.overrideCertificate = overrideCert;
    opts.padFactor = cfg.pad;
    series = freq_solve(sys, sources, nu, cfg.nSteps, opts);
  } else {
    throw ConfigError("unknown solver '" + cfg.solver + "' (expected time or freq)");
  }
  auto dtWall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::filesystem::create_directories(cfg.outDir);
  for (const auto& fmt : cfg.formats) {
    if (fmt == "csv")
      write_series_csv(cfg.outDir + "/series.csv", series, sys.layout);
    else if (fmt == "raw")
      write_series_raw(cfg.outDir + "/series.raw", cfg.outDir + "/series.json", series, sys.layout);
    else
      throw ConfigError("unknown output format '" + fmt + "'");
  }
  std::cout << series_summary(series, sys.layout) << "\n";
  std::cout << "causality: max pre-onset state norm = " << check_causality(series, sys.layout, sources.onset)
            << "\n";
  if (cert.accepted && cert.c > 0.0 && !sources.isZero())
    std::cout << "norm bound: slack = " << check_norm_bound(series, sources, sys.layout, cert.c)
              << " (>= -0.05 expected at fine dt)\n";
  std::cout << "solver wall time: " << dtWall << " s\n";
  return 0;
}

int cmd_kcheck(const std::string& dimsCsv, int trials, uint64_t seed, double nuOverride, double imagPart,
               const std::string& outPath) {
  std::array<Index, 3> dims{3, 4, 5};
  {
    std::stringstream ss(dimsCsv);
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',') && i < 3) dims[size_t(i++)] = std::stol(item);
    if (i != 3) throw ConfigError("--dims expects three comma-separated values");
  }
  for (Index d : dims)
    if (d < 1) throw ConfigError("--dims entries must be at least 1");
  if (trials < 1) throw ConfigError("--trials must be at least 1");

  std::vector<double> residuals(size_t(trials), 0.0);
  double maxResidual = 0.0;
  Complex zUsed;
  for (int i = 0; i < trials; ++i) {
    BoundaryTriple t = synthetic_triple(dims[0], dims[1], dims[2], seed + uint64_t(i));
    const double na = t.alphaNorm();
    double nu = nuOverride > 0.0 ? nuOverride : 2.0 * na + 1.0;
    if (nu <= na) {
      std::cout << "kcheck refused: nu = " << nu << " does not exceed ||alphaB|| = " << na
                << "; the inverted boundary block is only certified by the bound 1 - ||alphaB||/nu > 0\n";
      return 1;
    }
    FrequencyPoint z(Complex(nu, imagPart));
    zUsed = z.z;
    residuals[size_t(i)] = k_times_b_residual(t, z);
    maxResidual = std::max(maxResidual, residuals[size_t(i)]);
  }
  const double tol = 1e-9;
  nlohmann::ordered_json j;
  j["dims"] = {dims[0], dims[1], dims[2]};
  j["trials"] = trials;
  j["seed"] = seed;
  j["z"] = {zUsed.real(), zUsed.imag()};
  j["tolerance"] = tol;
  j["max_residual"] = maxResidual;
  j["pass"] = maxResidual <= tol;
  j["residuals"] = residuals;
  const std::string report = j.dump(2);
  if (!outPath.empty()) write_text_file(outPath, report);
  std::cout << "kcheck: max ||K B - 1||_F = " << maxResidual << " over " << trials
            << " trials (tolerance " << tol << ")\n";
  return maxResidual <= tol ? 0 : 2;
}

int cmd_verify(const std::string& suite, uint64_t seed) {
  auto reports = run_verify(suite, seed);
  std::cout << verify_report_to_text(reports);
  for (const auto& r : reports)
    if (!r.pass()) return 2;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structure-preserving thermo-piezo-electromagnetic evolution solver"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string solver, dimsCsv = "3,4,5", suite = "all", kcheckOut;
  int trials = 100;
  uint64_t kcheckSeed = 42, verifySeed = 1;
  double nuOverride = -1.0, imagPart = 1.0;
  bool overrideCert = false;

  auto addCommon = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.configPath, "path to the run configuration (JSON)");
    cmd->add_option("--out", common.outDir, "output directory override");
    cmd->add_option("--seed", common.seed, "seed override for boundary and source data")
        ->each([&](const std::string&) { common.seedSet = true; });
  };

  CLI::App* certify = app.add_subcommand("certify", "well-posedness certificate for the configured data");
  addCommon(certify);

  CLI::App* simulate = app.add_subcommand("simulate", "causal or frequency-domain solve");
  addCommon(simulate);
  simulate->add_option("--solver", solver, "time | freq (overrides the config)");
  simulate->add_flag("--override-certificate", overrideCert, "run even when certification fails");

  CLI::App* kcheck = app.add_subcommand("kcheck", "inverse exactness of the boundary block formulas");
  kcheck->add_option("--dims", dimsCsv, "boundary space dimensions g,c,G");
  kcheck->add_option("--trials", trials, "number of seeded trials");
  kcheck->add_option("--seed", kcheckSeed, "base seed");
  kcheck->add_option("--nu", nuOverride, "real part of z (default 2||alphaB||+1)");
  kcheck->add_option("--imag", imagPart, "imaginary part of z");
  kcheck->add_option("--out", kcheckOut, "write the JSON report here");

  CLI::App* verify = app.add_subcommand("verify", "module invariant suites");
  verify->add_option("--suite", suite, "bd | mesh | impedance | material | evosolve | all");
  verify->add_option("--seed", verifySeed, "seed for the sampled checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (certify->parsed()) return cmd_certify(common);
    if (simulate->parsed()) return cmd_simulate(common, solver, overrideCert);
    if (kcheck->parsed()) return cmd_kcheck(dimsCsv, trials, kcheckSeed, nuOverride, imagPart, kcheckOut);
    if (verify->parsed()) return cmd_verify(suite, verifySeed);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
