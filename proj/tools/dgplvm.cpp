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

// dgplvm: simulate datasets, fit models, run and summarize the simulation
// experiment, and check draws.
//
// Exit codes: 0 success, 1 fatal error, 2 experiment finished with failed fits.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "dgplvm/dataset_io.hpp"
#include "dgplvm/diagnostics.hpp"
#include "dgplvm/errors.hpp"
#include "dgplvm/harness.hpp"
#include "dgplvm/simgen.hpp"

namespace fs = std::filesystem;
using namespace dgplvm;

namespace {

constexpr const char* kOutputEnv = "DGPLVM_OUTPUT_DIR";
constexpr const char* kDefaultOutput = "dgplvm_out";

// --out beats the environment, which beats the default.
fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputEnv); env != nullptr && *env != '\0') return env;
  return kDefaultOutput;
}

struct SamplerFlags {
  SamplerConfig cfg;
  void add(CLI::App* app) {
    app->add_option("--n_iterations", cfg.n_iterations, "Iterations per chain, warmup included")
        ->capture_default_str();
    app->add_option("--n_warmup", cfg.n_warmup, "Warmup iterations")->capture_default_str();
    app->add_option("--target_accept", cfg.target_accept, "Step size adaptation target")
        ->capture_default_str();
    app->add_option("--max_tree_depth", cfg.max_tree_depth)->capture_default_str();
    app->add_option("--init_jitter", cfg.init_jitter,
                    "Half-width of the uniform perturbation of the starting point")
        ->capture_default_str();
  }
};

void print_fit(const FitResult& fit, const fs::path& dir) {
  const FitSummary& s = fit.summary;
  std::cout << "variant " << s.variant << " (" << s.family << ", " << s.parameterization
            << "), " << s.n_chains << " chain(s) x " << s.n_draws << " draws, "
            << s.divergences << " divergences, " << fit.runtime_seconds << " s\n";
  std::cout << "flags: rhat " << (s.rhat_flag ? "RAISED" : "ok") << ", ess "
            << (s.ess_flag ? "RAISED" : "ok") << "\n";
  std::cout << "wrote " << (dir / "draws.csv").string() << ", "
            << (dir / "summary.json").string() << "\n";
}

int run_simulate(const ScenarioConfig& cfg, const std::string& out_flag) {
  const fs::path dir = output_dir(out_flag);
  const Simulation sim = simulate(cfg);
  write_dataset_csv(dir / "dataset.csv", sim.data, true);
  write_json(dir / "truth.json", truth_to_json(sim.truth, sim.data.dim_names));
  std::cout << "wrote " << (dir / "dataset.csv").string() << " (N=" << sim.data.n_obs()
            << ", D=" << sim.data.n_dims() << ", hash " << dataset_hash(sim.data) << ")\n";
  return 0;
}

struct FitArgs {
  std::string data;
  std::string variant = "1111";
  std::string family = "se";
  std::string parameterization = "marginal";
  bool case_study = false;
  std::optional<double> rho_shape, rho_scale, x_obs_sd, lkj_eta, jitter;
  int chains = 1;
};

int run_fit(const FitArgs& a, SamplerConfig sampler, std::uint64_t seed,
            const std::string& out_flag) {
  const fs::path dir = output_dir(out_flag);
  const LoadedDataset loaded = load_case_study(a.data);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
  const KernelFamily family = kernel_family_from_string(a.family);
  ModelConfig config;
  if (a.case_study) {
    config = case_study_config(family, loaded.data);
  } else {
    config.family = family;
  }
  if (!a.case_study || a.variant != "1111") config.set_variant_code(a.variant);
  config.parameterization = parameterization_from_string(a.parameterization);
  if (a.rho_shape) config.priors.rho_shape = *a.rho_shape;
  if (a.rho_scale) config.priors.rho_scale = *a.rho_scale;
  if (a.x_obs_sd) config.priors.x_obs_sd = *a.x_obs_sd;
  if (a.lkj_eta) config.priors.lkj_eta = *a.lkj_eta;
  if (a.jitter) config.jitter = *a.jitter;
  sampler.seed = seed;
  const FitResult fit = fit_single(config, loaded.data, sampler, dir, a.chains);
  write_shift_table(dir / "shift.csv",
                    shift_table(fit.chains, loaded.data, loaded.ids, config.priors.x_obs_sd));
  std::vector<std::string> dims = loaded.data.dim_names;
  write_hyperparameter_table(dir / "hyperparameters.csv",
                             hyperparameter_table(fit.summary, dims));
  print_fit(fit, dir);
  return 0;
}

int run_experiment_cmd(ExperimentPlan plan, const std::string& profile, bool trials_set,
                       const std::string& out_flag) {
  if (profile == "quickstart") {
    if (!trials_set) plan.n_trials = quickstart_plan().n_trials;
  } else if (profile == "full") {
    if (!trials_set) plan.n_trials = ExperimentPlan{}.n_trials;
  } else {
    throw InvalidArgument("unknown profile '" + profile + "' (expected quickstart or full)");
  }
  plan.output_dir = output_dir(out_flag);
  const ExperimentOutcome o = run_experiment(plan);
  std::cout << o.n_fits << " fits (" << o.n_skipped << " reused, " << o.n_failed
            << " failed); results in " << (plan.output_dir / "results.csv").string() << "\n";
  const ResultSummary s = summarize_results(o.rows, o.benchmarks);
  for (const auto& g : s.by_level) {
    std::cout << "  D=" << g.dims << " " << g.level << ": mean RMSE " << g.mean_rmse
              << " [" << g.q5_rmse << ", " << g.q95_rmse << "], prior " << g.prior_rmse << "\n";
  }
  return o.n_failed > 0 ? 2 : 0;
}

int run_summarize(const std::string& results, const std::string& out_flag) {
  fs::path path = results;
  if (fs::is_directory(path)) path /= "results.csv";
  const auto rows = read_results_csv(path);
  std::vector<PriorBenchmarkRow> bench;
  const fs::path bench_path = path.parent_path() / "prior_benchmarks.csv";
  if (fs::exists(bench_path)) bench = read_prior_benchmarks_csv(bench_path);
  const ResultSummary s = summarize_results(rows, bench);
  const fs::path dir = output_dir(out_flag);
  write_summary_csv(dir / "summary_by_variant.csv", s.by_variant);
  write_summary_csv(dir / "summary_by_level.csv", s.by_level);
  std::cout << "level,dims,variant,n_fits,mean_rmse,q5_rmse,q95_rmse,prior_rmse\n";
  for (const auto& g : s.by_variant) {
    std::cout << g.level << ',' << g.dims << ',' << g.variant << ',' << g.n_fits << ','
              << format_double(g.mean_rmse) << ',' << format_double(g.q5_rmse) << ','
              << format_double(g.q95_rmse) << ',' << format_double(g.prior_rmse) << '\n';
  }
  return 0;
}

int run_diagnose(const std::string& draws, const std::string& out_flag, bool write) {
  fs::path path = draws;
  if (fs::is_directory(path)) path /= "draws.csv";
  const DrawTable t = read_draws_csv(path);
  std::vector<ChainDraws> chains;
  for (const auto& m : t.chains) {
    ChainDraws c;
    c.draws = m;
    c.param_names = t.names;
    chains.push_back(std::move(c));
  }
  const FitSummary s = summarize_draws(chains);
  std::cout << "name,mean,sd,q5,q95,rhat,bulk_ess,tail_ess\n";
  for (const auto& p : s.params) {
    std::cout << csv_field(p.name) << ',' << format_double(p.mean) << ',' << format_double(p.sd) << ','
              << format_double(p.q5) << ',' << format_double(p.q95) << ','
              << format_double(p.rhat) << ',' << format_double(p.bulk_ess) << ','
              << format_double(p.tail_ess) << '\n';
  }
  std::cout << "flags: rhat " << (s.rhat_flag ? "RAISED" : "ok") << ", ess "
            << (s.ess_flag ? "RAISED" : "ok") << "\n";
  if (write) write_json(output_dir(out_flag) / "diagnostics.json", s.to_json());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Derivative Gaussian process latent variable models"};
  app.require_subcommand(1);
  std::string out;
  std::uint64_t seed = 1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", out,
                    std::string("Output directory (default $") + kOutputEnv + " or " +
                        kDefaultOutput + ")");
    sub->add_option("--seed", seed, "Seed for all randomness")->capture_default_str();
  };

  // simulate
  ScenarioConfig scenario;
  std::string scenario_name = "gp", sim_family = "se";
  auto* sim = app.add_subcommand("simulate", "Generate a dataset and its ground truth");
  add_common(sim);
  sim->add_option("--scenario", scenario_name, "gp or periodic")->capture_default_str();
  sim->add_option("--n_obs", scenario.n_obs)->capture_default_str();
  sim->add_option("--n_dims", scenario.n_dims)->capture_default_str();
  sim->add_option("--family", sim_family, "se, matern32 or matern52")->capture_default_str();
  sim->add_option("--lambda", scenario.lambda, "alpha = lambda alpha', sigma = lambda sigma'")
      ->capture_default_str();
  sim->add_option("--corr", scenario.corr, "Correlation between output dimensions")
      ->capture_default_str();
  sim->add_option("--x_obs_sd", scenario.x_obs_sd)->capture_default_str();
  sim->add_option("--jitter", scenario.jitter)->capture_default_str();

  // fit
  FitArgs fit_args;
  SamplerFlags fit_sampler;
  auto* fit = app.add_subcommand("fit", "Fit one model to a dataset CSV");
  add_common(fit);
  fit->add_option("--data", fit_args.data, "Dataset CSV")->required();
  fit->add_option("--variant", fit_args.variant,
                  "Switch code: derivatives, scaled, varying, correlated")
      ->capture_default_str();
  fit->add_option("--family", fit_args.family)->capture_default_str();
  fit->add_option("--parameterization", fit_args.parameterization, "marginal or whitened")
      ->capture_default_str();
  fit->add_flag("--case_study", fit_args.case_study,
                "Case-study defaults: length-scale prior by family and x_obs_sd 0.03");
  fit->add_option("--rho_shape", fit_args.rho_shape);
  fit->add_option("--rho_scale", fit_args.rho_scale);
  fit->add_option("--x_obs_sd", fit_args.x_obs_sd);
  fit->add_option("--lkj_eta", fit_args.lkj_eta);
  fit->add_option("--jitter", fit_args.jitter);
  fit->add_option("--chains", fit_args.chains)->capture_default_str();
  fit_sampler.add(fit);

  // experiment
  ExperimentPlan plan = quickstart_plan();
  std::string plan_scenario = "gp", plan_param = "marginal", plan_family = "se";
  std::string profile = "quickstart";
  SamplerFlags plan_sampler;
  auto* exp = app.add_subcommand("experiment", "Run or resume the simulation experiment");
  add_common(exp);
  exp->add_option("--profile", profile, "quickstart (10 trials) or full (50 trials)")
      ->capture_default_str();
  exp->add_option("--scenario", plan_scenario)->capture_default_str();
  exp->add_option("--dims_list", plan.dims_list)->delimiter(',')->capture_default_str();
  auto* trials_opt = exp->add_option("--n_trials", plan.n_trials, "Overrides the profile");
  exp->add_option("--model_variants", plan.model_variants, "Switch codes (default: all 12)")
      ->delimiter(',');
  exp->add_option("--n_obs", plan.n_obs)->capture_default_str();
  exp->add_option("--family", plan_family)->capture_default_str();
  exp->add_option("--parameterization", plan_param)->capture_default_str();
  exp->add_option("--lambda", plan.lambda)->capture_default_str();
  exp->add_option("--corr", plan.corr)->capture_default_str();
  exp->add_option("--x_obs_sd", plan.x_obs_sd)->capture_default_str();
  exp->add_option("--prior_mc", plan.prior_mc, "Monte Carlo pairs per input for the prior RMSE")
      ->capture_default_str();
  exp->add_option("--workers", plan.workers, "Concurrent fits")->capture_default_str();
  plan_sampler.add(exp);

  // summarize
  std::string results;
  auto* sum = app.add_subcommand("summarize", "Group an experiment's results.csv");
  add_common(sum);
  sum->add_option("--results", results, "results.csv or the experiment directory")->required();

  // diagnose
  std::string draws;
  bool write_diag = false;
  auto* diag = app.add_subcommand("diagnose", "R-hat, ESS and quantiles of a draws CSV");
  add_common(diag);
  diag->add_option("--draws", draws, "draws.csv or a fit directory")->required();
  diag->add_flag("--write", write_diag, "Also write diagnostics.json to the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*sim) {
      scenario.scenario = scenario_from_string(scenario_name);
      scenario.family = kernel_family_from_string(sim_family);
      scenario.seed = seed;
      return run_simulate(scenario, out);
    }
    if (*fit) return run_fit(fit_args, fit_sampler.cfg, seed, out);
    if (*exp) {
      plan.scenario = scenario_from_string(plan_scenario);
      plan.family = kernel_family_from_string(plan_family);
      plan.parameterization = parameterization_from_string(plan_param);
      plan.sampler = plan_sampler.cfg;
      plan.base_seed = seed;
      return run_experiment_cmd(plan, profile, trials_opt->count() > 0, out);
    }
    if (*sum) return run_summarize(results, out);
    if (*diag) return run_diagnose(draws, out, write_diag);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << " (row " << e.row() << ", column " << e.column()
              << ")\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
