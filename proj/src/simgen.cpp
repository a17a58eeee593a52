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

#include "dgplvm/simgen.hpp"

#include <cmath>

#include "dgplvm/errors.hpp"

namespace dgplvm {

namespace {

std::vector<std::string> default_dim_names(int d) {
  std::vector<std::string> names;
  for (int i = 0; i < d; ++i) names.push_back("d" + std::to_string(i + 1));
  return names;
}

// x_obs ~ Normal(x_true, s), then y = f + sigma eps, y' = f' + sigma' eps.
Dataset observe(const ScenarioConfig& cfg, const GroundTruth& truth,
                const Eigen::MatrixXd& f, const Eigen::MatrixXd& fp, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index n = f.rows();
  const Eigen::Index dims = f.cols();
  Dataset data;
  data.y.resize(n, dims);
  Eigen::MatrixXd yp(n, dims);
  for (Eigen::Index d = 0; d < dims; ++d) {
    for (Eigen::Index i = 0; i < n; ++i) {
      data.y(i, d) = f(i, d) + truth.sigma[d] * normal(rng);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      yp(i, d) = fp(i, d) + truth.sigma_prime[d] * normal(rng);
    }
  }
  data.y_prime = std::move(yp);
  data.x_obs.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.x_obs[i] = truth.x_true[i] + cfg.x_obs_sd * normal(rng);
  }
  data.x_true = truth.x_true;
  data.dim_names = default_dim_names(static_cast<int>(dims));
  return data;
}

}  // namespace

std::string to_string(Scenario s) { return s == Scenario::Gp ? "gp" : "periodic"; }

Scenario scenario_from_string(const std::string& name) {
  if (name == "gp") return Scenario::Gp;
  if (name == "periodic") return Scenario::Periodic;
  throw InvalidArgument("unknown scenario '" + name + "' (expected gp or periodic)");
}

void ScenarioConfig::validate() const {
  if (n_obs < 2) throw InvalidArgument("simulation needs n_obs >= 2");
  if (n_dims < 1) throw InvalidArgument("simulation needs n_dims >= 1");
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  if (!(corr >= 0.0 && corr < 1.0)) throw InvalidArgument("corr must lie in [0, 1)");
  if (!(x_obs_sd >= 0.0)) throw InvalidArgument("x_obs_sd must be nonnegative");
  if (!(jitter >= 0.0)) throw InvalidArgument("jitter must be nonnegative");
}

Eigen::VectorXd truth_grid(int n_obs) {
  return Eigen::VectorXd::LinSpaced(n_obs, 0.5, 10.0);
}

GroundTruth sample_truth_hyperparams(const ScenarioConfig& cfg, Rng& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> u_alpha(0.4, 0.6);
  std::uniform_real_distribution<double> u_sigma(0.05, 0.15);
  std::uniform_real_distribution<double> u_rho(0.5, 1.0);
  const int dims = cfg.n_dims;
  GroundTruth t;
  t.x_true = truth_grid(cfg.n_obs);
  t.rho.resize(dims);
  t.alpha.resize(dims);
  t.alpha_prime.resize(dims);
  t.sigma.resize(dims);
  t.sigma_prime.resize(dims);
  for (int d = 0; d < dims; ++d) {
    t.alpha_prime[d] = u_alpha(rng);
    t.sigma_prime[d] = u_sigma(rng);
    t.rho[d] = u_rho(rng);
    t.alpha[d] = cfg.lambda * t.alpha_prime[d];
    t.sigma[d] = cfg.lambda * t.sigma_prime[d];
  }
  t.corr_matrix = Eigen::MatrixXd::Constant(dims, dims, cfg.corr);
  t.corr_matrix.diagonal().setOnes();
  return t;
}

void draw_mixed_gp(KernelFamily family, const GroundTruth& t,
                   const Eigen::Ref<const Eigen::VectorXd>& x, double jitter, Rng& rng,
                   Eigen::MatrixXd& f_out, Eigen::MatrixXd& fp_out) {
  const Eigen::Index n = x.size();
  const Eigen::Index dims = t.rho.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd f(n, dims), fp(n, dims);
  for (Eigen::Index d = 0; d < dims; ++d) {
    const KernelSpec spec{family, t.rho[d], t.alpha[d], t.alpha_prime[d]};
    Eigen::MatrixXd l;
    double jit = jitter;
    for (int attempt = 0;; ++attempt) {
      try {
        l = cholesky_psd(build_joint_cov(spec, x, true, jit));
        break;
      } catch (const NotPositiveDefinite&) {
        if (attempt == 3) throw;
        jit = jit > 0.0 ? 10.0 * jit : 1e-9;
      }
    }
    Eigen::VectorXd eps(2 * n);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = normal(rng);
    const Eigen::VectorXd g = l.triangularView<Eigen::Lower>() * eps;
    f.col(d) = g.head(n);
    fp.col(d) = g.tail(n);
  }
  const Eigen::MatrixXd lc = cholesky_psd(t.corr_matrix);
  f_out = f * lc.transpose();
  fp_out = fp * lc.transpose();
}

void periodic_values(const GroundTruth& t, const Eigen::Ref<const Eigen::VectorXd>& x,
                     Eigen::MatrixXd& f, Eigen::MatrixXd& fp) {
  const Eigen::Index n = x.size();
  const Eigen::Index dims = t.rho.size();
  f.resize(n, dims);
  fp.resize(n, dims);
  for (Eigen::Index d = 0; d < dims; ++d) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = x[i] / t.rho[d];
      f(i, d) = t.alpha[d] * std::sin(s);
      fp(i, d) = t.alpha_prime[d] / t.rho[d] * std::cos(s);
    }
  }
}

Simulation simulate_gp_scenario(const ScenarioConfig& cfg, Rng& rng) {
  Simulation sim;
  sim.truth = sample_truth_hyperparams(cfg, rng);
  draw_mixed_gp(cfg.family, sim.truth, sim.truth.x_true, cfg.jitter, rng, sim.f, sim.f_prime);
  sim.data = observe(cfg, sim.truth, sim.f, sim.f_prime, rng);
  return sim;
}

Simulation simulate_periodic_scenario(const ScenarioConfig& cfg, Rng& rng) {
  Simulation sim;
  sim.truth = sample_truth_hyperparams(cfg, rng);
  periodic_values(sim.truth, sim.truth.x_true, sim.f, sim.f_prime);
  sim.data = observe(cfg, sim.truth, sim.f, sim.f_prime, rng);
  return sim;
}

Simulation simulate(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  return cfg.scenario == Scenario::Gp ? simulate_gp_scenario(cfg, rng)
                                      : simulate_periodic_scenario(cfg, rng);
}

}  // namespace dgplvm
