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

#include "dgplvm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "dgplvm/errors.hpp"
#include "dgplvm/model_target.hpp"

namespace dgplvm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

// Write to a sibling temporary and rename, so a crash never leaves half a file.
void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out = open_out(tmp);
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

double json_number(const nlohmann::json& j) {
  return j.is_null() ? kNaN : j.get<double>();
}

nlohmann::json number_json(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double parse_cell(const std::string& s) {
  if (s == "NA" || s.empty()) return kNaN;
  return std::stod(s);
}

DiagnosticValue safe(DiagnosticValue (*fn)(const ScalarDrawSet&), const ScalarDrawSet& s) {
  try {
    return fn(s);
  } catch (const InvalidArgument&) {
    return {kNaN, true};
  }
}

std::string clean_message(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

int level_rank(const std::string& level) {
  return level == "none" ? 0 : level == "unscaled" ? 1 : 2;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

Dataset prepare_fit(const Dataset& data, ModelConfig& config) {
  Dataset centered = center_outputs(data);
  const auto [sy, syp] = empirical_prior_scales(centered);
  config.n_obs = static_cast<int>(centered.n_obs());
  config.n_dims = static_cast<int>(centered.n_dims());
  config.priors.sd_scale_y = sy;
  config.priors.sd_scale_yprime = syp;
  return centered;
}

// ------------------------------------------------------------------ fitting

const ParamSummary& FitSummary::at(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p;
  }
  throw InvalidArgument("no parameter named '" + name + "' in the summary");
}

nlohmann::json FitSummary::to_json() const {
  nlohmann::json j;
  j["variant"] = variant;
  j["family"] = family;
  j["parameterization"] = parameterization;
  j["n_chains"] = n_chains;
  j["n_draws"] = n_draws;
  j["divergences"] = divergences;
  j["flags"] = {{"rhat", rhat_flag},
                {"ess", ess_flag},
                {"rhat_x", x_rhat_flag},
                {"ess_x", x_ess_flag}};
  nlohmann::json ps = nlohmann::json::array();
  for (const auto& p : params) {
    ps.push_back({{"name", p.name},
                  {"mean", number_json(p.mean)},
                  {"sd", number_json(p.sd)},
                  {"q5", number_json(p.q5)},
                  {"q50", number_json(p.q50)},
                  {"q95", number_json(p.q95)},
                  {"rhat", number_json(p.rhat)},
                  {"bulk_ess", number_json(p.bulk_ess)},
                  {"tail_ess", number_json(p.tail_ess)}});
  }
  j["params"] = ps;
  return j;
}

FitSummary summarize_draws(const std::vector<ChainDraws>& chains) {
  if (chains.empty()) throw InvalidArgument("summarize_draws: no chains");
  const auto& names = chains[0].param_names;
  const Eigen::Index s = chains[0].draws.rows();
  for (const auto& c : chains) {
    if (c.draws.rows() != s || c.draws.cols() != static_cast<Eigen::Index>(names.size())) {
      throw InvalidArgument("summarize_draws: chains differ in shape");
    }
  }
  FitSummary out;
  out.n_chains = static_cast<int>(chains.size());
  out.n_draws = static_cast<int>(s);
  for (const auto& c : chains) out.divergences += c.divergences;
  const double ess_min = kEssPerChain * static_cast<double>(chains.size());
  const auto nc = static_cast<Eigen::Index>(chains.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    ScalarDrawSet set(nc, s);
    for (Eigen::Index c = 0; c < nc; ++c) {
      set.row(c) = chains[static_cast<std::size_t>(c)].draws.col(static_cast<Eigen::Index>(k));
    }
    ParamSummary p;
    p.name = names[k];
    std::vector<double> all(set.data(), set.data() + set.size());
    p.mean = set.mean();
    p.sd = all.size() > 1 ? std::sqrt((set.array() - p.mean).square().sum() /
                                      static_cast<double>(all.size() - 1))
                          : 0.0;
    p.q5 = quantile(all, 0.05);
    p.q50 = quantile(all, 0.5);
    p.q95 = quantile(all, 0.95);
    const DiagnosticValue r = safe(split_rhat, set);
    const DiagnosticValue b = safe(bulk_ess, set);
    const DiagnosticValue t = safe(tail_ess, set);
    p.rhat = r.degenerate ? kNaN : r.value;
    p.bulk_ess = b.degenerate ? kNaN : b.value;
    p.tail_ess = t.degenerate ? kNaN : t.value;
    const bool bad_rhat = std::isfinite(p.rhat) && p.rhat > kRhatThreshold;
    const bool bad_ess = (std::isfinite(p.bulk_ess) && p.bulk_ess < ess_min) ||
                         (std::isfinite(p.tail_ess) && p.tail_ess < ess_min);
    out.rhat_flag |= bad_rhat;
    out.ess_flag |= bad_ess;
    if (p.name.rfind("x[", 0) == 0) {
      out.x_rhat_flag |= bad_rhat;
      out.x_ess_flag |= bad_ess;
    }
    out.params.push_back(std::move(p));
  }
  return out;
}

FitResult fit_model(const ModelConfig& config, const Dataset& prepared,
                    const SamplerConfig& sampler, int n_chains) {
  if (n_chains < 1) throw InvalidArgument("n_chains must be at least 1");
  sampler.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const ModelTarget target(config, prepared, sampler.init_jitter);
  FitResult fit;
  for (int c = 0; c < n_chains; ++c) {
    SamplerConfig sc = sampler;
    if (c > 0) sc.seed = derive_seed(sampler.seed, static_cast<std::uint64_t>(c));
    fit.chains.push_back(sample(target, sc));
  }
  fit.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  fit.summary = summarize_draws(fit.chains);
  fit.summary.variant = config.variant_code();
  fit.summary.family = to_string(config.family);
  fit.summary.parameterization = to_string(config.parameterization);
  return fit;
}

void write_fit(const std::filesystem::path& out_dir, const FitResult& fit) {
  std::filesystem::create_directories(out_dir);
  write_draws_csv(out_dir / "draws.csv", fit.chains);
  write_json(out_dir / "summary.json", fit.summary.to_json());
  nlohmann::json rt;
  rt["runtime_seconds"] = fit.runtime_seconds;
  nlohmann::json chains = nlohmann::json::array();
  for (const auto& c : fit.chains) {
    chains.push_back({{"seed", c.seed},
                      {"step_size", c.step_size},
                      {"divergences", c.divergences},
                      {"warmup_divergences", c.warmup_divergences}});
  }
  rt["chains"] = chains;
  write_json(out_dir / "runtime.json", rt);
}

FitResult fit_single(ModelConfig config, const Dataset& data, const SamplerConfig& sampler,
                     const std::filesystem::path& out_dir, int n_chains) {
  const Dataset prepared = prepare_fit(data, config);
  config.validate();
  FitResult fit = fit_model(config, prepared, sampler, n_chains);
  write_fit(out_dir, fit);
  return fit;
}

double prior_rmse_benchmark(const Eigen::Ref<const Eigen::VectorXd>& x_true, double x_obs_sd,
                            int n_mc, Rng& rng) {
  if (n_mc < 1000) throw InvalidArgument("prior_rmse_benchmark needs n_mc >= 1000");
  if (!(x_obs_sd >= 0.0) || !std::isfinite(x_obs_sd)) {
    throw InvalidArgument("x_obs_sd must be finite and non-negative");
  }
  if (x_true.size() == 0) throw InvalidArgument("x_true is empty");
  std::normal_distribution<double> normal(0.0, 1.0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < x_true.size(); ++i) {
    double sq = 0.0;
    for (int m = 0; m < n_mc; ++m) {
      const double x_obs = x_true[i] + x_obs_sd * normal(rng);
      const double x = x_obs + x_obs_sd * normal(rng);
      sq += (x - x_true[i]) * (x - x_true[i]);
    }
    total += std::sqrt(sq / n_mc);
  }
  return total / static_cast<double>(x_true.size());
}

// --------------------------------------------------------------- case study

LoadedDataset load_case_study(const std::filesystem::path& path) {
  return read_dataset_csv(path);
}

ModelConfig case_study_config(KernelFamily family, const Dataset& data, double x_obs_sd) {
  ModelConfig c;
  c.set_variant_code(data.y_prime ? "1111" : "0011");
  c.family = family;
  c.priors.rho_shape = 5.0;
  c.priors.rho_scale = family == KernelFamily::Matern32 ? 14.0 : 0.5;
  c.priors.x_obs_sd = x_obs_sd;
  c.n_obs = static_cast<int>(data.n_obs());
  c.n_dims = static_cast<int>(data.n_dims());
  c.parameterization = GpParameterization::Marginal;
  return c;
}

std::vector<ShiftRow> shift_table(const std::vector<ChainDraws>& chains, const Dataset& data,
                                  const std::vector<std::string>& ids, double x_obs_sd) {
  if (chains.empty()) throw InvalidArgument("shift_table: no chains");
  const auto& names = chains[0].param_names;
  std::vector<ShiftRow> rows;
  for (Eigen::Index i = 0; i < data.n_obs(); ++i) {
    const std::string key = "x[" + std::to_string(i + 1) + "]";
    const auto it = std::find(names.begin(), names.end(), key);
    if (it == names.end()) throw InvalidArgument("draws have no column " + key);
    const auto col = static_cast<Eigen::Index>(it - names.begin());
    std::vector<double> shifts;
    for (const auto& c : chains) {
      for (Eigen::Index s = 0; s < c.draws.rows(); ++s) {
        shifts.push_back(c.draws(s, col) - data.x_obs[i]);
      }
    }
    ShiftRow r;
    r.id = ids.empty() ? std::to_string(i + 1) : ids[static_cast<std::size_t>(i)];
    r.x_obs = data.x_obs[i];
    r.prior_lo = data.x_obs[i] - 1.959963984540054 * x_obs_sd;
    r.prior_hi = data.x_obs[i] + 1.959963984540054 * x_obs_sd;
    r.shift_mean = std::accumulate(shifts.begin(), shifts.end(), 0.0) /
                   static_cast<double>(shifts.size());
    r.shift_lo = quantile(shifts, 0.025);
    r.shift_hi = quantile(shifts, 0.975);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_shift_table(const std::filesystem::path& path, const std::vector<ShiftRow>& rows) {
  std::ofstream out = open_out(path);
  out << "id,x_obs,prior_lo,prior_hi,shift_mean,shift_lo,shift_hi\n";
  for (const auto& r : rows) {
    out << r.id << ',' << format_double(r.x_obs) << ',' << format_double(r.prior_lo) << ','
        << format_double(r.prior_hi) << ',' << format_double(r.shift_mean) << ','
        << format_double(r.shift_lo) << ',' << format_double(r.shift_hi) << '\n';
  }
}

std::vector<HyperRow> hyperparameter_table(const FitSummary& summary,
                                           const std::vector<std::string>& dim_names) {
  std::vector<HyperRow> rows;
  const std::size_t dims = dim_names.size();
  for (std::size_t d = 0; d < dims; ++d) {
    for (const char* base : {"rho", "alpha", "alpha_prime", "sigma", "sigma_prime"}) {
      const std::string indexed = std::string(base) + "[" + std::to_string(d + 1) + "]";
      const ParamSummary* p = nullptr;
      for (const auto& s : summary.params) {
        if (s.name == indexed || s.name == base) p = &s;
      }
      if (p == nullptr) continue;
      rows.push_back({dim_names[d], base, p->mean, p->sd, p->q5, p->q50, p->q95, p->rhat,
                      p->bulk_ess});
    }
  }
  return rows;
}

void write_hyperparameter_table(const std::filesystem::path& path,
                                const std::vector<HyperRow>& rows) {
  std::ofstream out = open_out(path);
  out << "dim,parameter,mean,sd,q5,q50,q95,rhat,bulk_ess\n";
  for (const auto& r : rows) {
    out << r.dim << ',' << r.parameter << ',' << format_double(r.mean) << ','
        << format_double(r.sd) << ',' << format_double(r.q5) << ',' << format_double(r.q50)
        << ',' << format_double(r.q95) << ',' << format_double(r.rhat) << ','
        << format_double(r.bulk_ess) << '\n';
  }
}

// --------------------------------------------------------------- experiment

void ExperimentPlan::validate() const {
  if (dims_list.empty()) throw InvalidArgument("dims_list is empty");
  for (int d : dims_list) {
    if (d < 1) throw InvalidArgument("dims_list entries must be positive");
  }
  if (std::set<int>(dims_list.begin(), dims_list.end()).size() != dims_list.size()) {
    throw InvalidArgument("dims_list has duplicates");
  }
  if (n_trials < 1) throw InvalidArgument("n_trials must be at least 1");
  if (model_variants.empty()) throw InvalidArgument("model_variants is empty");
  const auto all = all_variant_codes();
  for (const auto& v : model_variants) {
    if (std::find(all.begin(), all.end(), v) == all.end()) {
      throw InvalidArgument("unknown or non-sensible model variant '" + v + "'");
    }
  }
  if (std::set<std::string>(model_variants.begin(), model_variants.end()).size() !=
      model_variants.size()) {
    throw InvalidArgument("model_variants has duplicates");
  }
  if (n_obs < 2) throw InvalidArgument("n_obs must be at least 2");
  if (prior_mc < 1000) throw InvalidArgument("prior_mc must be at least 1000");
  if (workers < 1) throw InvalidArgument("workers must be at least 1");
  if (output_dir.empty()) throw InvalidArgument("output_dir is empty");
  sampler.validate();
}

nlohmann::json ExperimentPlan::to_json() const {
  nlohmann::json j;
  j["scenario"] = to_string(scenario);
  j["dims_list"] = dims_list;
  j["n_trials"] = n_trials;
  j["model_variants"] = model_variants;
  j["sampler"] = {{"n_iterations", sampler.n_iterations},
                  {"n_warmup", sampler.n_warmup},
                  {"target_accept", sampler.target_accept},
                  {"max_tree_depth", sampler.max_tree_depth},
                  {"init_jitter", sampler.init_jitter}};
  j["base_seed"] = base_seed;
  j["n_obs"] = n_obs;
  j["family"] = to_string(family);
  j["parameterization"] = to_string(parameterization);
  j["lambda"] = lambda;
  j["corr"] = corr;
  j["x_obs_sd"] = x_obs_sd;
  j["prior_mc"] = prior_mc;
  return j;
}

ExperimentPlan quickstart_plan() {
  ExperimentPlan p;
  p.n_trials = 10;
  return p;
}

std::string derivative_level(const std::string& variant) {
  if (variant.size() != 4) throw InvalidArgument("variant codes have four characters");
  if (variant[0] == '0') return "none";
  return variant[1] == '1' ? "scaled" : "unscaled";
}

namespace {

struct Cell {
  int trial;
  int dims;
  std::string variant;
  std::string key() const {
    return "trial" + std::to_string(trial) + "_D" + std::to_string(dims) + "_" + variant;
  }
};

std::string dataset_stem(int trial, int dims) {
  return "trial" + std::to_string(trial) + "_D" + std::to_string(dims);
}

// The manifest's plan minus the fields that only choose which cells exist,
// so a plan can be extended with more trials, dims or variants and resumed.
nlohmann::json cell_defining(nlohmann::json plan) {
  plan.erase("n_trials");
  plan.erase("dims_list");
  plan.erase("model_variants");
  return plan;
}

nlohmann::json row_json(const ResultRow& r) {
  return {{"trial", r.trial},
          {"scenario", r.scenario},
          {"dims", r.dims},
          {"variant", r.variant},
          {"input_index", r.input_index},
          {"rmse", number_json(r.rmse)},
          {"bias", number_json(r.bias)},
          {"sd", number_json(r.sd)},
          {"rhat_x", number_json(r.rhat_x)},
          {"bulk_ess_x", number_json(r.bulk_ess_x)},
          {"tail_ess_x", number_json(r.tail_ess_x)},
          {"runtime_seconds", number_json(r.runtime_seconds)},
          {"failed", r.failed},
          {"message", r.message}};
}

ResultRow row_from_json(const nlohmann::json& j) {
  ResultRow r;
  r.trial = j.at("trial").get<int>();
  r.scenario = j.at("scenario").get<std::string>();
  r.dims = j.at("dims").get<int>();
  r.variant = j.at("variant").get<std::string>();
  r.input_index = j.at("input_index").get<int>();
  r.rmse = json_number(j.at("rmse"));
  r.bias = json_number(j.at("bias"));
  r.sd = json_number(j.at("sd"));
  r.rhat_x = json_number(j.at("rhat_x"));
  r.bulk_ess_x = json_number(j.at("bulk_ess_x"));
  r.tail_ess_x = json_number(j.at("tail_ess_x"));
  r.runtime_seconds = json_number(j.at("runtime_seconds"));
  r.failed = j.at("failed").get<bool>();
  r.message = j.at("message").get<std::string>();
  return r;
}

bool row_less(const ResultRow& a, const ResultRow& b) {
  return std::tie(a.trial, a.dims, a.variant, a.input_index) <
         std::tie(b.trial, b.dims, b.variant, b.input_index);
}

struct SimulatedCell {
  Simulation sim;
  std::string hash;
};

// One fit of one variant to one dataset, evaluated against the truth after
// sampling has finished.
nlohmann::json run_cell(const ExperimentPlan& plan, const Cell& cell, const SimulatedCell& sc) {
  const auto all = all_variant_codes();
  const auto vi = static_cast<std::uint64_t>(
      std::find(all.begin(), all.end(), cell.variant) - all.begin());
  const std::uint64_t data_seed = plan.base_seed + static_cast<std::uint64_t>(cell.trial);
  SamplerConfig sampler = plan.sampler;
  sampler.seed = derive_seed(data_seed, static_cast<std::uint64_t>(cell.dims), vi + 1);

  nlohmann::json out;
  out["trial"] = cell.trial;
  out["dims"] = cell.dims;
  out["variant"] = cell.variant;
  out["dataset_hash"] = sc.hash;
  out["fit_seed"] = sampler.seed;

  const Eigen::Index n = sc.sim.data.n_obs();
  std::vector<ResultRow> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    ResultRow& r = rows[static_cast<std::size_t>(i)];
    r.trial = cell.trial;
    r.scenario = to_string(plan.scenario);
    r.dims = cell.dims;
    r.variant = cell.variant;
    r.input_index = static_cast<int>(i + 1);
  }
  try {
    ModelConfig config;
    config.set_variant_code(cell.variant);
    config.family = plan.family;
    config.parameterization = plan.parameterization;
    config.priors.x_obs_sd = plan.x_obs_sd;
    // Only the model-visible part of the simulation reaches the fit.
    Dataset visible = sc.sim.data;
    visible.x_true.reset();
    const Dataset prepared = prepare_fit(visible, config);
    config.validate();
    const FitResult fit = fit_model(config, prepared, sampler, 1);

    const Eigen::MatrixXd x_draws = fit.chains[0].draws.leftCols(n);
    const RmseReport rep = rmse_latent(x_draws, sc.sim.truth.x_true);
    for (Eigen::Index i = 0; i < n; ++i) {
      ResultRow& r = rows[static_cast<std::size_t>(i)];
      const ParamSummary& p = fit.summary.params[static_cast<std::size_t>(i)];
      r.rmse = rep.per_input[static_cast<std::size_t>(i)].rmse;
      r.bias = rep.per_input[static_cast<std::size_t>(i)].bias;
      r.sd = rep.per_input[static_cast<std::size_t>(i)].sd;
      r.rhat_x = p.rhat;
      r.bulk_ess_x = p.bulk_ess;
      r.tail_ess_x = p.tail_ess;
      r.runtime_seconds = fit.runtime_seconds;
    }
    out["failed"] = false;
    out["divergences"] = fit.summary.divergences;
    out["step_size"] = fit.chains[0].step_size;
    out["runtime_seconds"] = fit.runtime_seconds;
    out["flags"] = {{"rhat_x", fit.summary.x_rhat_flag}, {"ess_x", fit.summary.x_ess_flag}};
  } catch (const std::exception& e) {
    for (auto& r : rows) {
      r.rmse = r.bias = r.sd = r.rhat_x = r.bulk_ess_x = r.tail_ess_x = kNaN;
      r.runtime_seconds = kNaN;
      r.failed = true;
      r.message = clean_message(e.what());
    }
    out["failed"] = true;
    out["message"] = e.what();
  }
  nlohmann::json jr = nlohmann::json::array();
  for (const auto& r : rows) jr.push_back(row_json(r));
  out["rows"] = jr;
  return out;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  const auto& dir = plan.output_dir;
  std::filesystem::create_directories(dir / "cells");
  std::filesystem::create_directories(dir / "datasets");

  // Manifest: the plan and the completed cells.
  const auto manifest_path = dir / "manifest.json";
  std::set<std::string> completed;
  if (std::filesystem::exists(manifest_path)) {
    const nlohmann::json m = read_json(manifest_path);
    if (!m.contains("plan") || cell_defining(m["plan"]) != cell_defining(plan.to_json())) {
      throw InvalidArgument("'" + dir.string() +
                            "' holds results of a different plan; choose another output "
                            "directory");
    }
    for (const auto& k : m.value("completed", nlohmann::json::array())) {
      completed.insert(k.get<std::string>());
    }
  }

  // Datasets and prior benchmarks, one per (trial, dims).
  std::map<std::pair<int, int>, SimulatedCell> sims;
  ExperimentOutcome outcome;
  for (int t = 1; t <= plan.n_trials; ++t) {
    for (int d : plan.dims_list) {
      ScenarioConfig sc;
      sc.scenario = plan.scenario;
      sc.n_obs = plan.n_obs;
      sc.n_dims = d;
      sc.family = plan.family;
      sc.lambda = plan.lambda;
      sc.corr = plan.corr;
      sc.x_obs_sd = plan.x_obs_sd;
      sc.seed = plan.base_seed + static_cast<std::uint64_t>(t);
      SimulatedCell cell{simulate(sc), ""};
      cell.hash = dataset_hash(cell.sim.data);
      const std::string stem = dataset_stem(t, d);
      {
        std::ostringstream csv;
        write_dataset_csv(csv, cell.sim.data, true);
        write_text_atomic(dir / "datasets" / (stem + ".csv"), csv.str());
        write_text_atomic(dir / "datasets" / (stem + "_truth.json"),
                          truth_to_json(cell.sim.truth, cell.sim.data.dim_names).dump(2) + "\n");
      }
      Rng rng(derive_seed(sc.seed, static_cast<std::uint64_t>(d), 0xbe11c4a5ULL));
      outcome.benchmarks.push_back(
          {t, d, prior_rmse_benchmark(cell.sim.truth.x_true, plan.x_obs_sd, plan.prior_mc, rng)});
      sims.emplace(std::make_pair(t, d), std::move(cell));
    }
  }
  write_prior_benchmarks_csv(dir / "prior_benchmarks.csv", outcome.benchmarks);

  std::vector<Cell> all_cells, todo;
  for (int t = 1; t <= plan.n_trials; ++t) {
    for (int d : plan.dims_list) {
      for (const auto& v : plan.model_variants) all_cells.push_back({t, d, v});
    }
  }
  for (const auto& c : all_cells) {
    if (completed.count(c.key()) && std::filesystem::exists(dir / "cells" / (c.key() + ".json"))) {
      ++outcome.n_skipped;
    } else {
      todo.push_back(c);
    }
  }

  std::mutex writer;
  auto record = [&](const Cell& c, const nlohmann::json& j) {
    const std::lock_guard<std::mutex> lock(writer);
    write_text_atomic(dir / "cells" / (c.key() + ".json"), j.dump(2) + "\n");
    completed.insert(c.key());
    nlohmann::json m;
    m["plan"] = plan.to_json();
    m["completed"] = std::vector<std::string>(completed.begin(), completed.end());
    write_text_atomic(manifest_path, m.dump(2) + "\n");
  };

  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      try {
        const Cell& c = todo[i];
        record(c, run_cell(plan, c, sims.at({c.trial, c.dims})));
      } catch (...) {
        const std::lock_guard<std::mutex> lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        next = todo.size();
        return;
      }
    }
  };
  const int n_workers = std::min<int>(plan.workers, static_cast<int>(std::max<std::size_t>(todo.size(), 1)));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  // Finalize from the cell files so the table never depends on run order.
  for (const auto& c : all_cells) {
    const nlohmann::json j = read_json(dir / "cells" / (c.key() + ".json"));
    ++outcome.n_fits;
    if (j.at("failed").get<bool>()) ++outcome.n_failed;
    for (const auto& r : j.at("rows")) outcome.rows.push_back(row_from_json(r));
  }
  std::sort(outcome.rows.begin(), outcome.rows.end(), row_less);
  write_results_csv(dir / "results.csv", outcome.rows);
  const ResultSummary s = summarize_results(outcome.rows, outcome.benchmarks);
  write_summary_csv(dir / "summary_by_variant.csv", s.by_variant);
  write_summary_csv(dir / "summary_by_level.csv", s.by_level);
  return outcome;
}

namespace {

const char* kResultsHeader =
    "trial,scenario,dims,variant,use_derivatives,scaled_derivatives,varying_hyperparams,"
    "correlated_outputs,input_index,rmse,bias,sd,rhat_x,bulk_ess_x,tail_ess_x,"
    "runtime_seconds,failed,message";

std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path,
                                                 const std::string& header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw ParseError(1, 1, "'" + path.string() + "' does not start with the expected header");
  }
  const std::size_t width = split_csv_line(header).size();
  std::vector<std::vector<std::string>> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != width) {
      throw ParseError(row, std::min(cells.size(), width) + 1,
                       "row " + std::to_string(row) + " of '" + path.string() +
                           "' has the wrong number of cells");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << r.trial << ',' << r.scenario << ',' << r.dims << ',' << r.variant << ','
        << r.use_derivatives() << ',' << r.scaled_derivatives() << ','
        << r.varying_hyperparams() << ',' << r.correlated_outputs() << ',' << r.input_index
        << ',' << format_double(r.rmse) << ',' << format_double(r.bias) << ','
        << format_double(r.sd) << ',' << format_double(r.rhat_x) << ','
        << format_double(r.bulk_ess_x) << ',' << format_double(r.tail_ess_x) << ','
        << format_double(r.runtime_seconds) << ',' << r.failed << ','
        << clean_message(r.message) << '\n';
  }
  write_text_atomic(path, out.str());
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::vector<ResultRow> rows;
  for (const auto& c : read_table(path, kResultsHeader)) {
    ResultRow r;
    r.trial = std::stoi(c[0]);
    r.scenario = c[1];
    r.dims = std::stoi(c[2]);
    r.variant = c[3];
    if (r.variant.size() != 4) throw SchemaError("bad variant code '" + r.variant + "'");
    r.input_index = std::stoi(c[8]);
    r.rmse = parse_cell(c[9]);
    r.bias = parse_cell(c[10]);
    r.sd = parse_cell(c[11]);
    r.rhat_x = parse_cell(c[12]);
    r.bulk_ess_x = parse_cell(c[13]);
    r.tail_ess_x = parse_cell(c[14]);
    r.runtime_seconds = parse_cell(c[15]);
    r.failed = c[16] == "1";
    r.message = c[17];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_prior_benchmarks_csv(const std::filesystem::path& path,
                                const std::vector<PriorBenchmarkRow>& rows) {
  std::ostringstream out;
  out << "trial,dims,prior_rmse\n";
  for (const auto& r : rows) {
    out << r.trial << ',' << r.dims << ',' << format_double(r.prior_rmse) << '\n';
  }
  write_text_atomic(path, out.str());
}

std::vector<PriorBenchmarkRow> read_prior_benchmarks_csv(const std::filesystem::path& path) {
  std::vector<PriorBenchmarkRow> rows;
  for (const auto& c : read_table(path, "trial,dims,prior_rmse")) {
    rows.push_back({std::stoi(c[0]), std::stoi(c[1]), parse_cell(c[2])});
  }
  return rows;
}

ResultSummary summarize_results(const std::vector<ResultRow>& rows,
                                const std::vector<PriorBenchmarkRow>& benchmarks) {
  struct Acc {
    std::vector<double> rmse;
    std::set<int> trials;
  };
  // Keys sort by level rank, dims, variant.
  std::map<std::tuple<int, int, std::string>, Acc> by_variant, by_level;
  for (const auto& r : rows) {
    if (r.failed || !std::isfinite(r.rmse)) continue;
    const int lr = level_rank(derivative_level(r.variant));
    for (auto* m : {&by_variant, &by_level}) {
      Acc& a = (*m)[{lr, r.dims, m == &by_variant ? r.variant : std::string()}];
      a.rmse.push_back(r.rmse);
      a.trials.insert(r.trial);
    }
  }
  if (by_variant.empty()) {
    throw InvalidArgument("summarize_results: no completed result rows to summarize");
  }
  std::map<std::pair<int, int>, double> prior;
  for (const auto& b : benchmarks) prior[{b.trial, b.dims}] = b.prior_rmse;
  const char* levels[] = {"none", "unscaled", "scaled"};

  auto build = [&](const auto& groups, bool count_variants) {
    std::vector<SummaryGroup> out;
    for (const auto& [key, a] : groups) {
      SummaryGroup g;
      g.level = levels[std::get<0>(key)];
      g.dims = std::get<1>(key);
      g.variant = std::get<2>(key);
      g.n_rows = static_cast<int>(a.rmse.size());
      g.n_fits = count_variants ? 0 : static_cast<int>(a.trials.size());
      g.mean_rmse = std::accumulate(a.rmse.begin(), a.rmse.end(), 0.0) /
                    static_cast<double>(a.rmse.size());
      g.q5_rmse = quantile(a.rmse, 0.05);
      g.q95_rmse = quantile(a.rmse, 0.95);
      double psum = 0.0;
      int pn = 0;
      for (int t : a.trials) {
        const auto it = prior.find({t, g.dims});
        if (it != prior.end()) {
          psum += it->second;
          ++pn;
        }
      }
      g.prior_rmse = pn == static_cast<int>(a.trials.size()) && pn > 0 ? psum / pn : kNaN;
      out.push_back(std::move(g));
    }
    return out;
  };
  ResultSummary s;
  s.by_variant = build(by_variant, false);
  s.by_level = build(by_level, true);
  // Fits in a by-level group: distinct (trial, variant) pairs.
  for (auto& g : s.by_level) {
    std::set<std::pair<int, std::string>> fits;
    for (const auto& r : rows) {
      if (!r.failed && std::isfinite(r.rmse) && r.dims == g.dims &&
          derivative_level(r.variant) == g.level) {
        fits.insert({r.trial, r.variant});
      }
    }
    g.n_fits = static_cast<int>(fits.size());
  }
  return s;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryGroup>& rows) {
  std::ostringstream out;
  out << "level,dims,variant,n_fits,n_rows,mean_rmse,q5_rmse,q95_rmse,prior_rmse\n";
  for (const auto& g : rows) {
    out << g.level << ',' << g.dims << ',' << g.variant << ',' << g.n_fits << ',' << g.n_rows
        << ',' << format_double(g.mean_rmse) << ',' << format_double(g.q5_rmse) << ','
        << format_double(g.q95_rmse) << ',' << format_double(g.prior_rmse) << '\n';
  }
  write_text_atomic(path, out.str());
}

}  // namespace dgplvm
