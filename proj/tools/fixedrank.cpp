// fixedrank: geometry verification, Newton experiments and kernel timings
// for optimization on the manifold of fixed-rank matrices.
//
// Exit status: 0 success / converged, 1 property or convergence failure,
// 2 usage or parse error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "fixedrank/bench.hpp"
#include "fixedrank/errors.hpp"
#include "fixedrank/experiments.hpp"
#include "fixedrank/verify.hpp"

namespace fr = fixedrank;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

// String-valued experiment flags, applied over the config file only when given.
struct ExperimentFlags {
  std::string config;
  std::map<std::string, std::string> values;
  bool damped = false;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options.emplace_back(key, app->add_option(flag, values[key], help));
  }

  void attach(CLI::App* app, bool completion) {
    app->add_option("--config", config, "key=value config file; flags override it")->check(CLI::ExistingFile);
    add(app, "--geometry", "geometry", "balanced | stiefel");
    add(app, "--m", "m", "rows");
    add(app, "--n", "n", "columns");
    add(app, "--p", "p", "rank");
    add(app, "--seed", "seed", "RNG seed for synthetic data and perturbations");
    options.back().second->default_str("1");
    add(app, "--rank", "rank", "rank of the synthetic matrix");
    add(app, "--noise", "noise", "additive Gaussian noise level");
    add(app, "--input", "input", "MatrixMarket input file");
    options.back().second->check(CLI::ExistingFile);
    if (completion) {
      add(app, "--mask", "mask", "MatrixMarket coordinate file of observed positions");
      options.back().second->check(CLI::ExistingFile);
      add(app, "--sampling", "sampling", "fraction of observed entries");
    } else {
      add(app, "--perturbation", "perturbation", "size of the start perturbation");
    }
    add(app, "--out", "out", "CSV convergence log");
    add(app, "--max-outer", "max_outer", "Newton iteration cap");
    add(app, "--grad-tol", "grad_tol", "stop when the Riemannian gradient norm is below this");
    add(app, "--warmstart", "warmstart", "Riemannian gradient steps before Newton");
    add(app, "--krylov-tol", "krylov_tol", "fixed inner tolerance (0 = forcing rule)");
    add(app, "--krylov-max", "krylov_max", "inner iteration cap (0 = dimension)");
    app->add_flag("--damped", damped, "Armijo backtracking along the Newton vector");
  }

  fr::ExperimentConfig build(fr::ObjectiveKind objective) const {
    fr::ExperimentConfig cfg;
    cfg.objective = objective;
    if (!config.empty()) fr::load_config(config, cfg);
    cfg.objective = objective;
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) fr::set_config_value(cfg, key, values.at(key));
    if (damped) cfg.newton.step_policy = fr::StepPolicy::kArmijoDamped;
    return cfg;
  }
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

int cmd_verify(const fr::VerifyConfig& cfg, const std::string& out) {
  const fr::VerifyReport report = fr::run_verify(cfg);
  int failed = 0;
  for (const auto& p : report.properties) {
    failed += p.passed() ? 0 : 1;
    std::printf("%s  %-9s %-50s %s %s %s  (%d cases)\n", p.passed() ? "PASS" : "FAIL", p.geometry.c_str(),
                p.name.c_str(), sci(p.observed).c_str(), p.lower_bound ? ">=" : "<=", sci(p.threshold).c_str(),
                p.cases);
  }
  std::printf("%zu properties, %d failed, %.2f s\n", report.properties.size(), failed, report.seconds);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw fr::Error("cannot write '" + out + "'");
    f << "geometry,property,observed,bound,threshold,cases,passed\n";
    for (const auto& p : report.properties)
      f << p.geometry << ",\"" << p.name << "\"," << sci(p.observed) << ',' << (p.lower_bound ? "min" : "max") << ','
        << sci(p.threshold) << ',' << p.cases << ',' << (p.passed() ? 1 : 0) << '\n';
  }
  return report.all_passed() ? kOk : kFailure;
}

int cmd_experiment(const fr::ExperimentConfig& cfg) {
  const fr::ExperimentResult r = fr::run_experiment(cfg);
  if (!cfg.out.empty()) {
    std::ofstream f(cfg.out);
    if (!f) throw fr::Error("cannot write '" + cfg.out + "'");
    fr::write_log(f, r.log);
  }
  std::printf("geometry: %s\n", std::string(fr::to_string(cfg.geometry)).c_str());
  std::printf("status: %s\n", std::string(fr::to_string(r.status)).c_str());
  std::printf("warm-start steps: %d\n", r.warmstart_steps);
  std::printf("newton iterations: %d\n", r.newton_iterations);
  std::printf("final f: %s\n", sci(r.final_f).c_str());
  std::printf("final riemannian grad norm: %s\n", sci(r.final_grad).c_str());
  if (r.oracle_distance) {
    std::printf("distance to truncated SVD: %s\n", sci(*r.oracle_distance).c_str());
    std::printf("errors e_k:");
    for (double e : r.errors) std::printf(" %s", sci(e).c_str());
    std::printf("\nlog(e_k+1)/log(e_k):");
    for (double q : r.log_ratios) std::printf(" %.3f", q);
    std::printf("\n");
    if (r.fitted_c) std::printf("fitted C in e_k+1 <= C e_k^2: %.4g\n", *r.fitted_c);
  }
  if (r.training_residual) std::printf("training residual (relative): %s\n", sci(*r.training_residual).c_str());
  if (r.heldout_rmse) std::printf("held-out RMSE: %s\n", sci(*r.heldout_rmse).c_str());
  std::printf("time: %.3f s\n", r.seconds);
  if (!cfg.out.empty()) std::printf("log: %s\n", cfg.out.c_str());
  return r.converged() ? kOk : kFailure;
}

int cmd_bench(const fr::BenchConfig& cfg, const std::string& out) {
  const fr::BenchReport report = fr::run_bench(cfg);
  if (out.empty()) {
    fr::write_bench(std::cout, report);
  } else {
    std::ofstream f(out);
    if (!f) throw fr::Error("cannot write '" + out + "'");
    fr::write_bench(f, report);
    for (const auto& fit : report.fits)
      std::printf("%s %s-sweep exponent %.3f (%d points)\n", std::string(fr::to_string(fit.geometry)).c_str(),
                  fit.sweep.c_str(), fit.exponent, fit.points);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian Newton on fixed-rank matrices: verification, experiments, benchmarks"};
  app.require_subcommand(1);

  fr::VerifyConfig vcfg;
  std::string verify_out;
  auto* verify = app.add_subcommand("verify", "run the geometry invariant battery");
  verify->add_option("--seed", vcfg.seed, "RNG seed")->capture_default_str();
  verify->add_option("--trials", vcfg.trials, "trials per instance")->capture_default_str();
  verify->add_option("--algebra-tol", vcfg.algebra_tol, "splits, roundtrips, Sylvester, invariance")
      ->capture_default_str();
  verify->add_option("--covariance-tol", vcfg.covariance_tol, "gauge covariance")->capture_default_str();
  verify->add_option("--fd-tol", vcfg.fd_tol, "finite-difference checks")->capture_default_str();
  verify->add_option("--fd-step", vcfg.fd_step, "finite-difference step")->capture_default_str();
  verify->add_option("--euclidean-min", vcfg.euclidean_min, "required Euclidean discrepancy")
      ->capture_default_str();
  verify->add_option("--out", verify_out, "CSV report");

  ExperimentFlags approx_flags, complete_flags;
  auto* approx = app.add_subcommand("approx", "Newton on f(X) = 1/2 |X - A|^2");
  approx_flags.attach(approx, false);
  auto* complete = app.add_subcommand("complete", "warm start + Newton on observed entries");
  complete_flags.attach(complete, true);

  fr::BenchConfig bcfg;
  std::string bench_geometry, bench_out;
  auto* bench = app.add_subcommand("bench", "time lift, projection and connection kernels");
  bench->add_option("--geometry", bench_geometry, "balanced | stiefel (default: both)")
      ->check(CLI::IsMember({"balanced", "stiefel"}));
  bench->add_option("--sizes", bcfg.sizes, "m+n values of the size sweep")->capture_default_str();
  bench->add_option("--p", bcfg.p, "rank of the size sweep")->capture_default_str();
  bench->add_option("--ps", bcfg.ps, "ranks of the p sweep")->capture_default_str();
  bench->add_option("--size", bcfg.size, "m+n of the p sweep")->capture_default_str();
  bench->add_option("--repeats", bcfg.repeats, "timed batches per kernel")->capture_default_str();
  bench->add_option("--seed", bcfg.seed, "RNG seed")->capture_default_str();
  bench->add_option("--out", bench_out, "CSV output (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (verify->parsed()) return cmd_verify(vcfg, verify_out);
    if (approx->parsed()) return cmd_experiment(approx_flags.build(fr::ObjectiveKind::kApprox));
    if (complete->parsed()) return cmd_experiment(complete_flags.build(fr::ObjectiveKind::kCompletion));
    if (bench->parsed()) {
      if (!bench_geometry.empty())
        bcfg.geometries = {bench_geometry == "balanced" ? fr::GeometryKind::kBalanced : fr::GeometryKind::kStiefel};
      return cmd_bench(bcfg, bench_out);
    }
  } catch (const fr::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kUsage;
  } catch (const fr::DimensionError& e) {
    std::fprintf(stderr, "invalid configuration: %s\n", e.what());
    return kUsage;
  } catch (const fr::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kUsage;
}
