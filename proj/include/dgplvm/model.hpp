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

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dgplvm/kernels.hpp"

namespace dgplvm {

/// Prior hyperparameters. rho ~ InvGamma(rho_shape, rho_scale);
/// alpha, sigma ~ Normal+(0, sd_scale_y); alpha', sigma' ~
/// Normal+(0, sd_scale_yprime); C ~ LKJ(lkj_eta); x_obs ~ Normal(x, x_obs_sd).
struct PriorSpec {
  double rho_shape = 5.0;
  double rho_scale = 5.0;
  double sd_scale_y = 1.0;
  double sd_scale_yprime = 1.0;
  double lkj_eta = 3.0;
  double x_obs_sd = 0.3;

  void validate() const;
};

/// How the latent GP values enter the posterior. Whitened keeps them as
/// explicit standard-normal coordinates mapped through the kernel Cholesky
/// factors; Marginal integrates them out analytically, leaving a Gaussian
/// likelihood with the (coregionalized) joint covariance. Both define the
/// same posterior over x, hyperparameters and C.
enum class GpParameterization { Whitened, Marginal };

std::string to_string(GpParameterization p);
GpParameterization parameterization_from_string(const std::string& name);

/// The four model switches plus everything else a fit needs.
struct ModelConfig {
  bool use_derivatives = true;
  bool scaled_derivatives = true;
  bool varying_hyperparams = true;
  bool correlated_outputs = true;
  KernelFamily family = KernelFamily::SquaredExponential;
  int n_obs = 20;
  int n_dims = 1;
  double jitter = kDefaultJitter;
  PriorSpec priors;
  GpParameterization parameterization = GpParameterization::Whitened;

  /// Rejects scaled_derivatives without use_derivatives and bad sizes.
  void validate() const;

  /// Four-character switch code in the order derivatives, scaled,
  /// varying, correlated; e.g. "1111" for the full model.
  std::string variant_code() const;
  void set_variant_code(const std::string& code);
};

/// The twelve sensible combinations of the four switches, full model first.
std::vector<std::string> all_variant_codes();

struct Dataset {
  Eigen::VectorXd x_obs;
  Eigen::MatrixXd y;                      // N x D
  std::optional<Eigen::MatrixXd> y_prime;  // N x D
  std::optional<Eigen::VectorXd> x_true;
  std::vector<std::string> dim_names;

  Eigen::Index n_obs() const { return x_obs.size(); }
  Eigen::Index n_dims() const { return y.cols(); }
  void validate() const;
};

/// Subtracts each output column's mean from y. y' is left alone: shifting y
/// by a constant does not change its derivative.
Dataset center_outputs(Dataset data);

/// Pooled sample SD over all entries of y, and of y' when present (s_y is
/// returned for both when y' is absent). Throws DegenerateData on zero
/// spread and InvalidArgument when N < 2.
std::pair<double, double> empirical_prior_scales(const Dataset& data);

/// Offsets of each parameter block inside the flat unconstrained vector.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& config);

  Eigen::Index size() const { return size_; }
  Eigen::Index n_obs() const { return n_; }
  Eigen::Index n_dims() const { return d_; }
  /// Rows of the joint covariance per dimension: 2N with derivatives, else N.
  Eigen::Index n_latent_rows() const { return m_; }
  /// Rows of the whitened block per dimension (0 when marginalized).
  Eigen::Index n_white_rows() const { return white_rows_; }
  Eigen::Index n_hyper() const { return h_; }
  bool has_alpha_prime() const { return n_alpha_prime > 0; }

  // Block offsets and lengths.
  Eigen::Index x_offset = 0;
  Eigen::Index rho_offset = 0, n_rho = 0;
  Eigen::Index alpha_offset = 0, n_alpha = 0;
  Eigen::Index alpha_prime_offset = 0, n_alpha_prime = 0;
  Eigen::Index sigma_offset = 0, n_sigma = 0;
  Eigen::Index sigma_prime_offset = 0, n_sigma_prime = 0;
  Eigen::Index corr_offset = 0, n_corr = 0;
  Eigen::Index z_offset = 0;  // column-major (rows x D)

  std::vector<std::string> names() const;

 private:
  Eigen::Index n_ = 0, d_ = 0, m_ = 0, h_ = 0, white_rows_ = 0, size_ = 0;
};

/// Unconstrained parameter state: latent x (identity), log scales, tanh
/// correlation coordinates, whitened GP values.
class ParamVector {
 public:
  explicit ParamVector(const ModelConfig& config);
  ParamVector(const ModelConfig& config, Eigen::VectorXd values);

  const ParamLayout& layout() const { return layout_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  Eigen::Index size() const { return values_.size(); }

  auto x_latent() { return values_.segment(layout_.x_offset, layout_.n_obs()); }
  auto log_rho() { return values_.segment(layout_.rho_offset, layout_.n_rho); }
  auto log_alpha() { return values_.segment(layout_.alpha_offset, layout_.n_alpha); }
  auto log_alpha_prime() {
    return values_.segment(layout_.alpha_prime_offset, layout_.n_alpha_prime);
  }
  auto log_sigma() { return values_.segment(layout_.sigma_offset, layout_.n_sigma); }
  auto log_sigma_prime() {
    return values_.segment(layout_.sigma_prime_offset, layout_.n_sigma_prime);
  }
  auto corr_coords() { return values_.segment(layout_.corr_offset, layout_.n_corr); }
  auto z_white() {
    return Eigen::Map<Eigen::MatrixXd>(values_.data() + layout_.z_offset,
                                       layout_.n_white_rows(), layout_.n_dims());
  }

 private:
  ParamLayout layout_;
  Eigen::VectorXd values_;
};

/// Parameters on their natural scales, broadcast to all D dimensions, plus
/// the implied mixed GP values.
struct ConstrainedParams {
  Eigen::VectorXd x;
  Eigen::VectorXd rho, alpha, alpha_prime, sigma, sigma_prime;  // length D
  Eigen::MatrixXd corr_chol;      // D x D lower, unit-norm rows
  Eigen::MatrixXd z_white;        // rows x D
  // Mixed GP values; empty when the latent values are marginalized.
  Eigen::MatrixXd f_tilde;        // N x D
  Eigen::MatrixXd f_tilde_prime;  // N x D (empty without derivatives)
};

ConstrainedParams constrain(const ModelConfig& config, const ParamVector& p);
ParamVector unconstrain(const ModelConfig& config, const ConstrainedParams& c);

/// Log density of the DGP-LVM on the unconstrained scale, with its exact
/// gradient. Build once per (config, data); evaluation is const and
/// thread-safe.
class DgpLvmModel {
 public:
  DgpLvmModel(ModelConfig config, Dataset data);

  const ModelConfig& config() const { return config_; }
  const Dataset& data() const { return data_; }
  const ParamLayout& layout() const { return layout_; }

  /// -infinity when any kernel matrix fails to factorize.
  double log_density(const Eigen::Ref<const Eigen::VectorXd>& q) const;
  double log_density_gradient(const Eigen::Ref<const Eigen::VectorXd>& q,
                              Eigen::VectorXd& grad) const;

 private:
  double evaluate(const Eigen::Ref<const Eigen::VectorXd>& q,
                  Eigen::VectorXd* grad) const;
  double marginal_likelihood(const Eigen::Ref<const Eigen::VectorXd>& q,
                             const Eigen::MatrixXd& lc, double* g,
                             Eigen::MatrixXd* lc_adjoint) const;

  ModelConfig config_;
  Dataset data_;
  ParamLayout layout_;
};

double log_joint(const ModelConfig& config, const Dataset& data, const ParamVector& p);
Eigen::VectorXd log_joint_grad(const ModelConfig& config, const Dataset& data,
                               const ParamVector& p);

}  // namespace dgplvm
