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

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "dgplvm/kernels.hpp"
#include "dgplvm/model.hpp"
#include "dgplvm/sampler.hpp"

namespace dgplvm {

enum class Scenario { Gp, Periodic };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

struct ScenarioConfig {
  Scenario scenario = Scenario::Gp;
  int n_obs = 20;
  int n_dims = 5;
  KernelFamily family = KernelFamily::SquaredExponential;
  double lambda = 3.0;     // alpha = lambda alpha', sigma = lambda sigma'
  double corr = 0.5;       // uniform between-dimension correlation
  double x_obs_sd = 0.3;   // measurement SD of x_obs around x_true
  double jitter = kDefaultJitter;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GroundTruth {
  Eigen::VectorXd x_true;
  Eigen::VectorXd rho, alpha, alpha_prime, sigma, sigma_prime;
  Eigen::MatrixXd corr_matrix;
};

/// Generated data plus the noise-free function values (kept out of the
/// model-visible Dataset).
struct Simulation {
  Dataset data;
  GroundTruth truth;
  Eigen::MatrixXd f;        // N x D, noise-free (mixed for the GP scenario)
  Eigen::MatrixXd f_prime;  // N x D
};

/// Equally spaced inputs from 0.5 to 10 (step 0.5 when n = 20).
Eigen::VectorXd truth_grid(int n_obs);

/// Per dimension: alpha' ~ U(0.4, 0.6), sigma' ~ U(0.05, 0.15),
/// rho ~ U(0.5, 1); alpha = lambda alpha', sigma = lambda sigma'.
GroundTruth sample_truth_hyperparams(const ScenarioConfig& cfg, Rng& rng);

/// Draws (f, f') from per-dimension scaled-derivative GPs at inputs x and
/// mixes them across dimensions with the Cholesky factor of
/// truth.corr_matrix. Jitter is escalated tenfold up to three times when a
/// kernel matrix does not factorize.
void draw_mixed_gp(KernelFamily family, const GroundTruth& truth,
                   const Eigen::Ref<const Eigen::VectorXd>& x, double jitter, Rng& rng,
                   Eigen::MatrixXd& f, Eigen::MatrixXd& f_prime);

/// Noise-free periodic values at inputs x.
void periodic_values(const GroundTruth& truth, const Eigen::Ref<const Eigen::VectorXd>& x,
                     Eigen::MatrixXd& f, Eigen::MatrixXd& f_prime);

/// Multi-output scaled-derivative GP draw at x_true, mixed with the
/// Cholesky factor of the correlation matrix, plus Gaussian noise.
Simulation simulate_gp_scenario(const ScenarioConfig& cfg, Rng& rng);

/// f = alpha sin(x / rho), f' = (alpha' / rho) cos(x / rho) per dimension,
/// plus Gaussian noise; dimensions are independent.
Simulation simulate_periodic_scenario(const ScenarioConfig& cfg, Rng& rng);

/// Dispatches on cfg.scenario with an Rng seeded from cfg.seed.
Simulation simulate(const ScenarioConfig& cfg);

}  // namespace dgplvm
