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
#include <functional>
#include <random>
#include <string>
#include <vector>

// Hamiltonian Monte Carlo with multinomial dynamic-path-length trajectories
// (doubling until a generalized U-turn), dual-averaging step size
// adaptation and a windowed diagonal metric estimate.
//
// REFERENCE: Hoffman, M.D. and Gelman, A., 2014. The No-U-Turn sampler:
// adaptively setting path lengths in Hamiltonian Monte Carlo. JMLR 15.
// Betancourt, M., 2017. A conceptual introduction to Hamiltonian Monte Carlo.

namespace dgplvm {

using Rng = std::mt19937_64;

/// Log density with gradient; writes the gradient into the second argument.
using GradientFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Interface the sampler draws from.
class DensityTarget {
 public:
  virtual ~DensityTarget() = default;
  virtual Eigen::Index dimension() const = 0;
  /// Returns the log density (-inf or NaN for invalid points) and fills grad.
  virtual double log_density_gradient(const Eigen::VectorXd& q,
                                      Eigen::VectorXd& grad) const = 0;
  /// Names and values of the quantities recorded per draw.
  virtual std::vector<std::string> output_names() const;
  virtual Eigen::VectorXd output_values(const Eigen::VectorXd& q) const { return q; }
  /// Starting point for one initialization attempt. Default: Uniform(-2, 2).
  virtual Eigen::VectorXd initial_point(Rng& rng) const;
};

/// Adapts a plain gradient function to DensityTarget.
class FunctionTarget : public DensityTarget {
 public:
  FunctionTarget(Eigen::Index dim, GradientFn fn) : dim_(dim), fn_(std::move(fn)) {}
  Eigen::Index dimension() const override { return dim_; }
  double log_density_gradient(const Eigen::VectorXd& q,
                              Eigen::VectorXd& grad) const override {
    return fn_(q, grad);
  }

 private:
  Eigen::Index dim_;
  GradientFn fn_;
};

struct SamplerConfig {
  int n_iterations = 3000;  // warmup included
  int n_warmup = 1000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 1;
  double init_jitter = 0.1;

  void validate() const;
};

struct ChainDraws {
  Eigen::MatrixXd draws;  // (n_iterations - n_warmup) x P, output scale
  std::vector<std::string> param_names;
  std::vector<double> accept_stats;
  std::vector<int> tree_depths;
  std::vector<int> n_leapfrog;
  std::vector<bool> divergent;
  std::vector<double> log_density;
  int divergences = 0;           // post-warmup
  int warmup_divergences = 0;
  bool high_divergence = false;  // more than half of post-warmup iterations
  double step_size = 0.0;
  Eigen::VectorXd inv_metric;
  std::uint64_t seed = 0;
};

/// Position, momentum and cached density/gradient at the position.
struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;
  double log_density = 0.0;
};

/// One leapfrog step (half momentum, full position, half momentum). The
/// point must enter with grad/log_density evaluated at q. Returns false
/// when the density or gradient at the new position is not finite.
bool leapfrog(const GradientFn& fn, PhasePoint& z, double step,
              const Eigen::VectorXd& inv_mass);

ChainDraws sample(const DensityTarget& target, const SamplerConfig& config);

}  // namespace dgplvm
