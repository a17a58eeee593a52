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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgplvm/dataset_io.hpp"
#include "dgplvm/diagnostics.hpp"
#include "dgplvm/model.hpp"
#include "dgplvm/sampler.hpp"
#include "dgplvm/simgen.hpp"

// Fitting, the simulation experiment and case-study tables.

namespace dgplvm {

/// SplitMix64 step over (base, a, b); used to give every chain and every
/// fit of an experiment its own stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Centers y and sets the config's shape and half-normal prior scales from
/// the centered data. Nothing else in the config is touched.
Dataset prepare_fit(const Dataset& data, ModelConfig& config);

struct ParamSummary {
  std::string name;
  double mean = 0.0, sd = 0.0, q5 = 0.0, q50 = 0.0, q95 = 0.0;
  double rhat = 0.0, bulk_ess = 0.0, tail_ess = 0.0;
};

struct FitSummary {
  std::string variant;
  std::string family;
  std::string parameterization;
  int n_chains = 1;
  int n_draws = 0;  // per chain
  int divergences = 0;
  std::vector<ParamSummary> params;
  bool rhat_flag = false;  // some R-hat above the threshold
  bool ess_flag = false;   // some bulk or tail ESS below 100 per chain
  // Same two checks limited to the latent inputs.
  bool x_rhat_flag = false;
  bool x_ess_flag = false;

  const ParamSummary& at(const std::string& name) const;
  nlohmann::json to_json() const;
};

/// Diagnostics and quantiles of every recorded quantity. NaN R-hat/ESS of
/// constant columns never raise a flag.
FitSummary summarize_draws(const std::vector<ChainDraws>& chains);

struct FitResult {
  std::vector<ChainDraws> chains;
  FitSummary summary;
  double runtime_seconds = 0.0;
};

/// Runs n_chains chains; chain c uses derive_seed(sampler.seed, c) (chain 0
/// keeps sampler.seed). Data must already be prepared.
FitResult fit_model(const ModelConfig& config, const Dataset& prepared,
                    const SamplerConfig& sampler, int n_chains = 1);

/// Writes draws.csv, summary.json and runtime.json into out_dir. The first
/// two depend only on the inputs and seed.
void write_fit(const std::filesystem::path& out_dir, const FitResult& fit);

/// prepare_fit, fit_model and write_fit.
FitResult fit_single(ModelConfig config, const Dataset& data, const SamplerConfig& sampler,
                     const std::filesystem::path& out_dir, int n_chains = 1);

/// Mean RMSE of x when only the measurement model is used: x_obs ~
/// N(x_true, s^2), then x ~ N(x_obs, s^2), n_mc pairs per input. Requires
/// n_mc >= 1000.
double prior_rmse_benchmark(const Eigen::Ref<const Eigen::VectorXd>& x_true, double x_obs_sd,
                            int n_mc, Rng& rng);

// ---------------------------------------------------------------- case study

inline constexpr double kCaseStudyXObsSd = 0.03;

/// Reads a case-study CSV (cell hours as x_obs, expression as y:, velocity
/// as dy:). A file without velocities loads with a warning.
LoadedDataset load_case_study(const std::filesystem::path& path);

/// Full-model config with the case-study length-scale priors:
/// InvGamma(5, 0.5) for SE and Matern 5/2, InvGamma(5, 14) for Matern 3/2.
ModelConfig case_study_config(KernelFamily family, const Dataset& data,
                              double x_obs_sd = kCaseStudyXObsSd);

struct ShiftRow {
  std::string id;
  double x_obs = 0.0;
  double prior_lo = 0.0, prior_hi = 0.0;  // 95% interval of the measurement prior
  double shift_mean = 0.0;                // posterior mean of x minus x_obs
  double shift_lo = 0.0, shift_hi = 0.0;  // 2.5% / 97.5% quantiles of x - x_obs
};

/// Prior-vs-posterior shift of each latent input. Draws columns x[i] are
/// looked up by name.
std::vector<ShiftRow> shift_table(const std::vector<ChainDraws>& chains, const Dataset& data,
                                  const std::vector<std::string>& ids, double x_obs_sd);
void write_shift_table(const std::filesystem::path& path, const std::vector<ShiftRow>& rows);

struct HyperRow {
  std::string dim;
  std::string parameter;  // rho, alpha, alpha_prime, sigma, sigma_prime
  double mean = 0.0, sd = 0.0, q5 = 0.0, q50 = 0.0, q95 = 0.0;
  double rhat = 0.0, bulk_ess = 0.0;
};

/// Per-dimension hyperparameter posteriors (shared parameters are repeated
/// for every dimension).
std::vector<HyperRow> hyperparameter_table(const FitSummary& summary,
                                           const std::vector<std::string>& dim_names);
void write_hyperparameter_table(const std::filesystem::path& path,
                                const std::vector<HyperRow>& rows);

// ---------------------------------------------------------------- experiment

struct ExperimentPlan {
  Scenario scenario = Scenario::Gp;
  std::vector<int> dims_list{5, 10, 20};
  int n_trials = 50;
  std::vector<std::string> model_variants = all_variant_codes();
  SamplerConfig sampler;
  std::filesystem::path output_dir = "dgplvm_out";
  std::uint64_t base_seed = 1;

  int n_obs = 20;
  KernelFamily family = KernelFamily::SquaredExponential;
  GpParameterization parameterization = GpParameterization::Marginal;
  double lambda = 3.0;
  double corr = 0.5;
  double x_obs_sd = 0.3;
  int prior_mc = 100000;
  int workers = 1;

  void validate() const;
  /// Fields that determine results (workers excluded).
  nlohmann::json to_json() const;
};

/// Ten trials instead of fifty; everything else as the default plan.
ExperimentPlan quickstart_plan();

struct ResultRow {
  int trial = 0;
  std::string scenario;
  int dims = 0;
  std::string variant;  // switch code, e.g. "1111"
  int input_index = 0;  // 1-based
  double rmse = 0.0, bias = 0.0, sd = 0.0;
  double rhat_x = 0.0, bulk_ess_x = 0.0, tail_ess_x = 0.0;
  double runtime_seconds = 0.0;
  bool failed = false;
  std::string message;

  bool use_derivatives() const { return variant[0] == '1'; }
  bool scaled_derivatives() const { return variant[1] == '1'; }
  bool varying_hyperparams() const { return variant[2] == '1'; }
  bool correlated_outputs() const { return variant[3] == '1'; }
};

struct PriorBenchmarkRow {
  int trial = 0;
  int dims = 0;
  double prior_rmse = 0.0;
};

struct ExperimentOutcome {
  std::vector<ResultRow> rows;  // sorted by trial, dims, variant, input
  std::vector<PriorBenchmarkRow> benchmarks;
  int n_fits = 0;
  int n_failed = 0;
  int n_skipped = 0;  // cells already complete on entry
};

/// Runs (or resumes) the plan. Each (trial, dims) simulates one dataset with
/// seed base_seed + trial, fits every variant to it and evaluates against
/// the truth only afterwards. Completed cells recorded in the manifest are
/// not refitted; rerunning a finished plan rewrites identical bytes. Fit
/// failures become rows with failed set.
ExperimentOutcome run_experiment(const ExperimentPlan& plan);

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);
void write_prior_benchmarks_csv(const std::filesystem::path& path,
                                const std::vector<PriorBenchmarkRow>& rows);
std::vector<PriorBenchmarkRow> read_prior_benchmarks_csv(const std::filesystem::path& path);

/// "none", "unscaled" or "scaled" for a switch code.
std::string derivative_level(const std::string& variant);

struct SummaryGroup {
  std::string level;
  int dims = 0;
  std::string variant;  // empty in the by-level table
  int n_fits = 0;
  int n_rows = 0;
  double mean_rmse = 0.0, q5_rmse = 0.0, q95_rmse = 0.0;
  double prior_rmse = 0.0;  // NaN without benchmarks for those datasets
};

struct ResultSummary {
  std::vector<SummaryGroup> by_variant;  // level x dims x variant
  std::vector<SummaryGroup> by_level;    // level x dims
};

/// Mean and 90% interval of RMSE per group over non-failed rows. Throws
/// InvalidArgument when there is nothing to summarize.
ResultSummary summarize_results(const std::vector<ResultRow>& rows,
                                const std::vector<PriorBenchmarkRow>& benchmarks = {});
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryGroup>& rows);

}  // namespace dgplvm
