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

// Helpers shared by the unit tests and the acceptance runner.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

#include "dgplvm/model.hpp"
#include "dgplvm/simgen.hpp"

namespace dgplvm::testing {

/// Central differences with step h in every coordinate.
inline Eigen::VectorXd central_difference(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& q,
    double h = 1e-5) {
  Eigen::VectorXd g(q.size());
  Eigen::VectorXd work = q;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    work[i] = q[i] + h;
    const double hi = f(work);
    work[i] = q[i] - h;
    const double lo = f(work);
    work[i] = q[i];
    g[i] = (hi - lo) / (2.0 * h);
  }
  return g;
}

/// Worst coordinate of |a - b| measured against max(rel * |b|, abs_tol).
/// Values <= 1 mean every coordinate is within tolerance.
inline double gradient_mismatch(const Eigen::VectorXd& got, const Eigen::VectorXd& want,
                                double rel = 1e-5, double abs_tol = 1e-7) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < got.size(); ++i) {
    const double bound = std::max(rel * std::abs(want[i]), abs_tol);
    worst = std::max(worst, std::abs(got[i] - want[i]) / bound);
  }
  return worst;
}

/// Centered simulated GP data of the requested shape.
inline Dataset simulated_data(int n_dims, int n_obs, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.n_dims = n_dims;
  cfg.n_obs = n_obs;
  cfg.seed = seed;
  return center_outputs(simulate(cfg).data);
}

inline ModelConfig model_config(const std::string& code, const Dataset& data) {
  ModelConfig config;
  config.set_variant_code(code);
  config.n_obs = static_cast<int>(data.n_obs());
  config.n_dims = static_cast<int>(data.n_dims());
  const auto [sy, syp] = empirical_prior_scales(data);
  config.priors.sd_scale_y = sy;
  config.priors.sd_scale_yprime = syp;
  return config;
}

/// A random point in a plausible region of the unconstrained space.
inline ParamVector random_point(const ModelConfig& config, const Dataset& data,
                                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::normal_distribution<double> normal;
  ParamVector p(config);
  for (Eigen::Index i = 0; i < p.x_latent().size(); ++i) {
    p.x_latent()[i] = data.x_obs[i] + 0.5 * u(rng);
  }
  for (auto& v : p.log_rho()) v = std::log(0.8) + u(rng);
  for (auto& v : p.log_alpha()) v = std::log(1.0) + u(rng);
  for (auto& v : p.log_alpha_prime()) v = std::log(0.5) + u(rng);
  for (auto& v : p.log_sigma()) v = std::log(0.3) + u(rng);
  for (auto& v : p.log_sigma_prime()) v = std::log(0.1) + u(rng);
  for (auto& v : p.corr_coords()) v = u(rng);
  for (auto& v : p.z_white().reshaped()) v = normal(rng);
  return p;
}

}  // namespace dgplvm::testing
