/*
 * Copyright 2026 The dgplvm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

// Acceptance runner: one [PASS]/[FAIL] line per criterion.
//
//   acceptance --only 1,2,3,4,5   fast property suites
//   acceptance --only 6,7         simulation reproduction (long)
//   acceptance --only 8           periodic latent recovery
//   acceptance --only 9           case-study pipeline
//
// Exit status is 0 only when every selected criterion passes.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "dgplvm/diagnostics.hpp"
#include "dgplvm/errors.hpp"
#include "dgplvm/harness.hpp"
#include "dgplvm/kernels.hpp"
#include "dgplvm/model.hpp"
#include "dgplvm/sampler.hpp"
#include "dgplvm/simgen.hpp"
#include "support.hpp"

using namespace dgplvm;
namespace fs = std::filesystem;

namespace {

// ------------------------------------------------------------ tolerances
namespace tol {
constexpr double kFirstOrderRel = 1e-5;
constexpr double kSecondOrderRel = 1e-4;
constexpr double kKernelSeconds = 5.0;
constexpr double kScalingAbs = 1e-12;
constexpr double kScalingJitter = 1e-6;
constexpr double kGradRel = 1e-5;
constexpr double kGradAbs = 1e-7;
constexpr double kGradSeconds = 120.0;
constexpr double kStdNormalMean = 0.1;
constexpr double kShiftedMean = 0.15;
constexpr double kSdRel = 0.10;
constexpr double kSamplerSeconds = 60.0;
constexpr double kIidEssLo = 0.8, kIidEssHi = 1.2;
constexpr double kIidRhat = 1.01;
constexpr double kAr1EssFraction = 0.2;
constexpr double kRmseIdentity = 1e-10;
constexpr double kFullVsNoDeriv = 0.7;
constexpr double kFullVsPrior = 0.5;
constexpr double kConvergedFraction = 0.9;
constexpr double kPeriodicSeconds = 600.0;
}  // namespace tol

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path out;
  int workers = 1;
  bool resume = false;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double sample_sd(const Eigen::ArrayXd& c) {
  return std::sqrt((c - c.mean()).square().sum() / static_cast<double>(c.size() - 1));
}

// --------------------------------------------------------------- 1. kernels
Outcome kernel_derivatives(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u_rho(0.3, 3.0), u_sd(0.2, 3.0), u_x(-2.0, 2.0);
  double worst1 = 0.0, worst2 = 0.0;
  int cases = 0;
  for (KernelFamily family :
       {KernelFamily::SquaredExponential, KernelFamily::Matern32, KernelFamily::Matern52}) {
    for (int rep = 0; rep < 100; ++rep, ++cases) {
      const KernelSpec spec{family, u_rho(rng), u_sd(rng), u_sd(rng)};
      double xi, xj;
      do {
        xi = u_x(rng);
        xj = u_x(rng);
      } while (std::abs(xi - xj) < 1e-2 * spec.rho);
      // Finite differences of the value kernel; the derivative blocks carry
      // alpha' in place of alpha once per differentiated argument.
      KernelSpec tied = spec;
      tied.alpha_prime = spec.alpha;
      const double ratio = spec.alpha_prime / spec.alpha;
      auto k00 = [&](double a, double b) { return kernel_block(tied, a, b, Block::K00); };
      const double h = 1e-5;
      const double fd01 = ratio * (k00(xi, xj + h) - k00(xi, xj - h)) / (2 * h);
      const double fd10 = ratio * (k00(xi + h, xj) - k00(xi - h, xj)) / (2 * h);
      const double h2 = 1e-4;
      const double fd11 = ratio * ratio *
                          (k00(xi + h2, xj + h2) - k00(xi + h2, xj - h2) -
                           k00(xi - h2, xj + h2) + k00(xi - h2, xj - h2)) /
                          (4 * h2 * h2);
      // Relative error, floored at 1e-3 of the block's natural scale where
      // the block passes through zero.
      const double s1 = 1e-3 * spec.alpha * spec.alpha_prime / spec.rho;
      const double s2 = 1e-3 * spec.alpha_prime * spec.alpha_prime / (spec.rho * spec.rho);
      auto rel = [](double got, double want, double floor) {
        return std::abs(got - want) / std::max(std::abs(want), floor);
      };
      worst1 = std::max({worst1, rel(kernel_block(spec, xi, xj, Block::K01), fd01, s1),
                         rel(kernel_block(spec, xi, xj, Block::K10), fd10, s1)});
      worst2 = std::max(worst2, rel(kernel_block(spec, xi, xj, Block::K11), fd11, s2));
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst1 <= tol::kFirstOrderRel && worst2 <= tol::kSecondOrderRel &&
           secs < tol::kKernelSeconds;
  o.detail = std::to_string(cases) + " tuples; worst first-order rel " + fmt("%.2e", worst1) +
             ", mixed second-order rel " + fmt("%.2e", worst2) + "; " + fmt("%.2f", secs) + " s";
  return o;
}

// ---------------------------------------------------------- 2. scaling
Outcome scaling_identity(const Context&) {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u_rho(0.3, 2.0), u_sd(0.1, 3.0), u_x(0.0, 10.0);
  const KernelFamily families[] = {KernelFamily::SquaredExponential, KernelFamily::Matern32,
                                   KernelFamily::Matern52};
  double worst = 0.0;
  int chol_ok = 0;
  const int cases = 50;
  for (int rep = 0; rep < cases; ++rep) {
    const KernelSpec spec{families[rep % 3], u_rho(rng), u_sd(rng), u_sd(rng)};
    KernelSpec tied = spec;
    tied.alpha_prime = spec.alpha;
    Eigen::VectorXd x(20);
    for (auto& v : x) v = u_x(rng);
    const Eigen::MatrixXd k = build_joint_cov(spec, x, true, 0.0).entries;
    const Eigen::MatrixXd s = build_joint_cov(tied, x, true, 0.0).entries;
    Eigen::VectorXd d = Eigen::VectorXd::Ones(40);
    d.tail(20).setConstant(spec.alpha_prime / spec.alpha);
    worst = std::max(worst, (k - d.asDiagonal() * s * d.asDiagonal()).cwiseAbs().maxCoeff());
    try {
      cholesky_psd(build_joint_cov(spec, x, true, tol::kScalingJitter));
      ++chol_ok;
    } catch (const NotPositiveDefinite&) {
    }
  }
  Outcome o;
  o.pass = worst <= tol::kScalingAbs && chol_ok == cases;
  o.detail = std::to_string(cases) + " cases (N=20); worst entry difference " +
             fmt("%.2e", worst) + "; Cholesky with jitter 1e-6 succeeded on " +
             std::to_string(chol_ok) + "/" + std::to_string(cases);
  return o;
}

// --------------------------------------------------------- 3. gradients
Outcome gradient_suite(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset data = testing::simulated_data(3, 5, 303);
  std::mt19937_64 rng(304);
  double worst = 0.0;
  int checks = 0, bad = 0;
  for (GpParameterization par : {GpParameterization::Whitened, GpParameterization::Marginal}) {
    for (const std::string code : all_variant_codes()) {
      ModelConfig c = testing::model_config(code, data);
      c.parameterization = par;
      const DgpLvmModel model(c, data);
      for (int rep = 0; rep < 10; ++rep, ++checks) {
        const Eigen::VectorXd q = testing::random_point(c, data, rng).values();
        Eigen::VectorXd g;
        model.log_density_gradient(q, g);
        const Eigen::VectorXd fd = testing::central_difference(
            [&](const Eigen::VectorXd& w) { return model.log_density(w); }, q);
        const double m = testing::gradient_mismatch(g, fd, tol::kGradRel, tol::kGradAbs);
        worst = std::max(worst, m);
        bad += m > 1.0;
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = bad == 0 && secs < tol::kGradSeconds;
  o.detail = std::to_string(checks) +
             " points (12 variants x 10, whitened and marginal, D=3, N=5); failing points " +
             std::to_string(bad) + "; worst mismatch " + fmt("%.3f", worst) +
             " of tolerance; " + fmt("%.1f", secs) + " s";
  return o;
}

// ----------------------------------------------------------- 4. sampler
Outcome sampler_calibration(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  SamplerConfig cfg;
  cfg.n_iterations = 3000;
  cfg.n_warmup = 1000;
  cfg.seed = 404;
  const FunctionTarget std_normal(10, [](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    g = -q;
    return -0.5 * q.squaredNorm();
  });
  const ChainDraws a = sample(std_normal, cfg);
  double worst_mean = 0.0, worst_sd = 0.0;
  for (Eigen::Index j = 0; j < 10; ++j) {
    const Eigen::ArrayXd c = a.draws.col(j).array();
    worst_mean = std::max(worst_mean, std::abs(c.mean()));
    worst_sd = std::max(worst_sd, std::abs(sample_sd(c) - 1.0));
  }
  const FunctionTarget shifted(1, [](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    const double r = (q[0] - 5.0) / 2.0;
    g = Eigen::VectorXd::Constant(1, -r / 2.0);
    return -0.5 * r * r;
  });
  cfg.seed = 405;
  const ChainDraws b = sample(shifted, cfg);
  const Eigen::ArrayXd c = b.draws.col(0).array();
  const double mean_err = std::abs(c.mean() - 5.0);
  const double sd_err = std::abs(sample_sd(c) / 2.0 - 1.0);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = a.draws.rows() == 2000 && worst_mean <= tol::kStdNormalMean &&
           worst_sd <= tol::kSdRel && mean_err <= tol::kShiftedMean && sd_err <= tol::kSdRel &&
           a.divergences == 0 && b.divergences == 0 && secs < tol::kSamplerSeconds;
  o.detail = "N(0,I_10): worst |mean| " + fmt("%.3f", worst_mean) + ", worst |sd-1| " +
             fmt("%.3f", worst_sd) + "; N(5,2^2): |mean-5| " + fmt("%.3f", mean_err) +
             ", |sd/2-1| " + fmt("%.3f", sd_err) + "; divergences " +
             std::to_string(a.divergences + b.divergences) + "; " + fmt("%.1f", secs) + " s";
  return o;
}

// ------------------------------------------------------- 5. diagnostics
Outcome diagnostics_calibration(const Context&) {
  std::mt19937_64 rng(505);
  std::normal_distribution<double> normal;
  const int s = 4000;
  ScalarDrawSet iid(1, s);
  for (auto& v : iid.reshaped()) v = normal(rng);
  const double bulk = bulk_ess(iid).value;
  const double rhat = split_rhat(iid).value;
  ScalarDrawSet ar(1, s);
  double v = normal(rng) / std::sqrt(1 - 0.81);
  for (int i = 0; i < s; ++i) {
    v = 0.9 * v + normal(rng);
    ar(0, i) = v;
  }
  const double ar_bulk = bulk_ess(ar).value;
  double worst_identity = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n_draws = 10 + 13 * rep;
    Eigen::MatrixXd draws(n_draws, 8);
    for (auto& d : draws.reshaped()) d = 3.0 * normal(rng) - 1.0;
    Eigen::VectorXd truth(8);
    for (auto& t : truth) t = 2.0 * normal(rng);
    for (const auto& r : rmse_latent(draws, truth).per_input) {
      const double sd_part = r.sd * r.sd * (n_draws - 1.0) / n_draws;
      worst_identity = std::max(worst_identity, std::abs(r.rmse * r.rmse - (r.bias * r.bias + sd_part)));
    }
  }
  Outcome o;
  o.pass = bulk >= tol::kIidEssLo * s && bulk <= tol::kIidEssHi * s && rhat < tol::kIidRhat &&
           ar_bulk < tol::kAr1EssFraction * s && worst_identity <= tol::kRmseIdentity;
  o.detail = "iid S=" + std::to_string(s) + ": bulk ESS " + fmt("%.0f", bulk) + ", R-hat " +
             fmt("%.4f", rhat) + "; AR(1) 0.9: bulk ESS " + fmt("%.0f", ar_bulk) +
             " (limit " + fmt("%.0f", tol::kAr1EssFraction * s) +
             "); RMSE^2 = bias^2 + var worst deviation " + fmt("%.1e", worst_identity);
  return o;
}

// ------------------------------------------- 6 and 7. simulation study
struct StudyResult {
  ExperimentOutcome outcome;
  double seconds = 0.0;
  bool ran = false;
};

StudyResult& study(const Context& ctx) {
  static StudyResult r;
  if (r.ran) return r;
  ExperimentPlan plan;
  plan.scenario = Scenario::Gp;
  plan.dims_list = {5};
  plan.n_trials = 10;
  plan.model_variants = {"1111", "0011", "1011"};
  plan.sampler.n_iterations = 3000;
  plan.sampler.n_warmup = 1000;
  plan.base_seed = 600;
  plan.workers = ctx.workers;
  plan.output_dir = ctx.out / "simulation_study";
  if (!ctx.resume) fs::remove_all(plan.output_dir);
  const auto t0 = std::chrono::steady_clock::now();
  r.outcome = run_experiment(plan);
  r.seconds = seconds_since(t0);
  r.ran = true;
  return r;
}

Outcome rmse_ordering(const Context& ctx) {
  const StudyResult& st = study(ctx);
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& row : st.outcome.rows) {
    if (row.failed) continue;
    acc[row.variant].first += row.rmse;
    acc[row.variant].second += 1;
  }
  auto mean = [&](const std::string& v) {
    const auto it = acc.find(v);
    return it == acc.end() ? std::nan("") : it->second.first / it->second.second;
  };
  double prior = 0.0;
  for (const auto& b : st.outcome.benchmarks) prior += b.prior_rmse;
  prior /= static_cast<double>(st.outcome.benchmarks.size());
  const double full = mean("1111"), none = mean("0011"), unscaled = mean("1011");
  Outcome o;
  o.pass = st.outcome.n_failed == 0 && full < tol::kFullVsNoDeriv * none &&
           full < tol::kFullVsPrior * prior && unscaled > full;
  o.detail = "mean RMSE full " + fmt("%.4f", full) + ", no-derivative " + fmt("%.4f", none) +
             " (ratio " + fmt("%.3f", full / none) + "), derivative-without-scaling " +
             fmt("%.4f", unscaled) + ", prior " + fmt("%.4f", prior) + " (ratio " +
             fmt("%.3f", full / prior) + "); " + std::to_string(st.outcome.n_fits) + " fits, " +
             std::to_string(st.outcome.n_failed) + " failed; " + fmt("%.0f", st.seconds) +
             " s wall with " + std::to_string(ctx.workers) +
             " worker(s) (runtime is reported, not judged)";
  return o;
}

Outcome convergence_rate(const Context& ctx) {
  const StudyResult& st = study(ctx);
  std::map<std::tuple<int, int, std::string>, bool> ok;
  for (const auto& row : st.outcome.rows) {
    auto key = std::make_tuple(row.trial, row.dims, row.variant);
    if (!ok.count(key)) ok[key] = true;
    const bool good = !row.failed && row.rhat_x <= kRhatThreshold &&
                      row.bulk_ess_x >= kEssPerChain && row.tail_ess_x >= kEssPerChain;
    ok[key] = ok[key] && good;
  }
  int n_ok = 0;
  std::map<std::string, std::pair<int, int>> per_variant;
  for (const auto& [key, good] : ok) {
    n_ok += good;
    auto& pv = per_variant[std::get<2>(key)];
    pv.first += good;
    pv.second += 1;
  }
  const double frac = ok.empty() ? 0.0 : static_cast<double>(n_ok) / ok.size();
  Outcome o;
  o.pass = !ok.empty() && frac >= tol::kConvergedFraction;
  std::ostringstream d;
  d << n_ok << "/" << ok.size() << " fits with every x R-hat <= 1.1 and bulk/tail ESS >= 100 ("
    << fmt("%.0f", 100 * frac) << "%; by variant:";
  for (const auto& [v, c] : per_variant) d << " " << v << " " << c.first << "/" << c.second;
  d << ")";
  o.detail = d.str();
  return o;
}

// --------------------------------------------------- 8. periodic scenario
Outcome periodic_recovery(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioConfig sc;
  sc.scenario = Scenario::Periodic;
  sc.n_dims = 5;
  sc.seed = 808;
  const Simulation sim = simulate(sc);
  Dataset visible = sim.data;
  visible.x_true.reset();
  ModelConfig config;
  config.parameterization = GpParameterization::Marginal;
  SamplerConfig sampler;
  sampler.seed = 809;
  const FitResult fit = fit_single(config, visible, sampler, ctx.out / "periodic_fit");
  const Eigen::Index n = sim.data.n_obs();
  const Eigen::MatrixXd x = fit.chains[0].draws.leftCols(n);
  double post = 0.0, obs = 0.0, post_mean = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    post += (x.col(i).array() - (*sim.data.x_true)[i]).abs().mean();
    post_mean += std::abs(x.col(i).mean() - (*sim.data.x_true)[i]);
    obs += std::abs(sim.data.x_obs[i] - (*sim.data.x_true)[i]);
  }
  post /= n;
  post_mean /= n;
  obs /= n;
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = post < obs && secs <= tol::kPeriodicSeconds;
  o.detail = "posterior mean |x - x_true| " + fmt("%.4f", post) + " (|E[x] - x_true| " +
             fmt("%.4f", post_mean) + ") vs |x_obs - x_true| " + fmt("%.4f", obs) + "; " +
             fmt("%.0f", secs) + " s";
  return o;
}

// ---------------------------------------------------------- 9. case study
// A 20 x 12 dataset shaped like the case study: inputs on [0, 1] (the
// simulation grid divided by 10), derivatives rescaled to match, cell hours
// observed with SD 0.03.
fs::path write_synthetic_case_study(const fs::path& dir) {
  ScenarioConfig sc;
  sc.n_dims = 12;
  sc.seed = 909;
  Simulation sim = simulate(sc);
  Dataset d = sim.data;
  Rng rng(910);
  std::normal_distribution<double> normal;
  const Eigen::VectorXd x_true = *d.x_true / 10.0;
  d.x_true = x_true;
  for (Eigen::Index i = 0; i < d.n_obs(); ++i) d.x_obs[i] = x_true[i] + kCaseStudyXObsSd * normal(rng);
  *d.y_prime *= 10.0;
  d.dim_names.clear();
  for (int g = 1; g <= 12; ++g) d.dim_names.push_back("gene" + std::string(g < 10 ? "0" : "") + std::to_string(g));
  std::vector<std::string> ids;
  for (int c = 1; c <= 20; ++c) ids.push_back("cell" + std::string(c < 10 ? "0" : "") + std::to_string(c));
  const fs::path path = dir / "case_study.csv";
  fs::create_directories(dir);
  write_dataset_csv(path, d, false, ids);
  return path;
}

Outcome case_study(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = ctx.out / "case_study";
  if (!ctx.resume) fs::remove_all(dir);
  const LoadedDataset loaded = load_case_study(write_synthetic_case_study(dir));
  bool shape_ok = loaded.data.n_obs() == 20 && loaded.data.n_dims() == 12 &&
                  loaded.data.y_prime.has_value() && loaded.warnings.empty();
  std::ostringstream d;
  d << "loaded N=" << loaded.data.n_obs() << " D=" << loaded.data.n_dims() << ";";
  bool all_ok = shape_ok;
  for (KernelFamily family : {KernelFamily::SquaredExponential, KernelFamily::Matern32}) {
    const ModelConfig config = case_study_config(family, loaded.data);
    SamplerConfig sampler;
    sampler.seed = 911;
    const fs::path fit_dir = dir / to_string(family);
    const FitResult fit = fit_single(config, loaded.data, sampler, fit_dir);
    const auto shifts = shift_table(fit.chains, loaded.data, loaded.ids, config.priors.x_obs_sd);
    write_shift_table(fit_dir / "shift.csv", shifts);
    const auto hyper = hyperparameter_table(fit.summary, loaded.data.dim_names);
    write_hyperparameter_table(fit_dir / "hyperparameters.csv", hyper);
    double worst_rhat = 0.0, min_ess = 1e300;
    for (const auto& p : fit.summary.params) {
      if (std::isfinite(p.rhat)) worst_rhat = std::max(worst_rhat, p.rhat);
      if (std::isfinite(p.bulk_ess)) min_ess = std::min(min_ess, p.bulk_ess);
      if (std::isfinite(p.tail_ess)) min_ess = std::min(min_ess, p.tail_ess);
    }
    const bool tables_ok = shifts.size() == 20 && hyper.size() == 12 * 5 &&
                           fs::exists(fit_dir / "summary.json") &&
                           fs::exists(fit_dir / "draws.csv");
    const bool flags_ok = !fit.summary.rhat_flag && !fit.summary.ess_flag;
    all_ok = all_ok && tables_ok && flags_ok;
    double max_shift = 0.0;
    for (const auto& s : shifts) max_shift = std::max(max_shift, std::abs(s.shift_mean));
    d << " " << to_string(family) << " rho~IG(5," << config.priors.rho_scale
      << "): tables " << (tables_ok ? "ok" : "MISSING") << ", flags "
      << (flags_ok ? "clear" : "RAISED") << " (max R-hat " << fmt("%.3f", worst_rhat)
      << ", min ESS " << fmt("%.0f", min_ess) << ", divergences " << fit.summary.divergences
      << "), max |shift| " << fmt("%.4f", max_shift) << ", " << fmt("%.0f", fit.runtime_seconds)
      << " s;";
  }
  Outcome o;
  o.pass = all_ok;
  o.detail = d.str() + " total " + fmt("%.0f", seconds_since(t0)) + " s";
  return o;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome(const Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  Context ctx;
  std::string out = (fs::temp_directory_path() / "dgplvm_acceptance").string();
  ctx.workers = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--out", out, "Working directory for fits")->capture_default_str();
  app.add_option("--workers", ctx.workers, "Concurrent fits in the simulation study");
  app.add_flag("--resume", ctx.resume, "Reuse finished fits in --out instead of starting fresh");
  CLI11_PARSE(app, argc, argv);
  ctx.out = out;

  const std::vector<Criterion> criteria{
      {1, "kernel-derivative suite", kernel_derivatives},
      {2, "scaling-identity suite", scaling_identity},
      {3, "gradient suite", gradient_suite},
      {4, "sampler calibration", sampler_calibration},
      {5, "diagnostics calibration", diagnostics_calibration},
      {6, "desk-scale RMSE ordering", rmse_ordering},
      {7, "convergence rate", convergence_rate},
      {8, "periodic latent recovery", periodic_recovery},
      {9, "case-study pipeline", case_study},
  };
  const std::set<int> selected(only.begin(), only.end());
  bool all_pass = true;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    all_pass = all_pass && o.pass;
    std::ostringstream line;
    line << (o.pass ? "[PASS] " : "[FAIL] ") << c.id << ". " << c.title << ": " << o.detail;
    std::cout << line.str() << std::endl;
    // ctest hides the output of passing tests, so keep a copy per criterion.
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    std::ofstream(ctx.out / ("criterion_" + std::to_string(c.id) + ".txt")) << line.str() << "\n";
  }
  return all_pass ? 0 : 1;
}
