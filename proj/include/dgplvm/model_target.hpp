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

#include <string>
#include <vector>

#include "dgplvm/model.hpp"
#include "dgplvm/sampler.hpp"

// The DGP-LVM posterior as a sampler target, reporting constrained values.

namespace dgplvm {

/// Median of the inverse-gamma(shape, scale) distribution.
double inv_gamma_median(double shape, double scale);
/// Median of the half-normal distribution with the given scale.
double half_normal_median(double scale);

/// Starting point: x at x_obs, log scales at the log prior medians,
/// correlation coordinates and whitened values at 0, all perturbed by
/// Uniform(-init_jitter, init_jitter).
ParamVector initial_params(const ModelConfig& config, const Dataset& data, double init_jitter,
                           Rng& rng);
/// As above with a generator seeded from sampler.seed.
ParamVector initialize(const ModelConfig& config, const Dataset& data,
                       const SamplerConfig& sampler);

class ModelTarget : public DensityTarget {
 public:
  ModelTarget(ModelConfig config, Dataset data, double init_jitter);

  const DgpLvmModel& model() const { return model_; }
  Eigen::Index dimension() const override { return model_.layout().size(); }
  double log_density_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& grad) const override {
    return model_.log_density_gradient(q, grad);
  }
  /// x[i], then rho, alpha, alpha_prime, sigma, sigma_prime as estimated
  /// (one per dimension, or one shared), then C[i,j] for i < j. Whitened
  /// values are not reported.
  std::vector<std::string> output_names() const override;
  Eigen::VectorXd output_values(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd initial_point(Rng& rng) const override;

 private:
  DgpLvmModel model_;
  double init_jitter_;
};

}  // namespace dgplvm
