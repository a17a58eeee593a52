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

#include "dgplvm/model_target.hpp"

#include <boost/math/distributions/inverse_gamma.hpp>

#include <cmath>

#include "dgplvm/transforms.hpp"

namespace dgplvm {

double inv_gamma_median(double shape, double scale) {
  return boost::math::median(boost::math::inverse_gamma_distribution<double>(shape, scale));
}

double half_normal_median(double scale) {
  // Phi^-1(3/4)
  return 0.67448975019608174320 * scale;
}

ParamVector initial_params(const ModelConfig& config, const Dataset& data, double init_jitter,
                           Rng& rng) {
  std::uniform_real_distribution<double> u(-init_jitter, init_jitter);
  // u(rng) with init_jitter == 0 would be an invalid distribution range.
  auto noise = [&] { return init_jitter > 0.0 ? u(rng) : 0.0; };
  const PriorSpec& pr = config.priors;
  ParamVector p(config);
  for (Eigen::Index i = 0; i < p.x_latent().size(); ++i) p.x_latent()[i] = data.x_obs[i] + noise();
  for (auto& v : p.log_rho()) v = std::log(inv_gamma_median(pr.rho_shape, pr.rho_scale)) + noise();
  for (auto& v : p.log_alpha()) v = std::log(half_normal_median(pr.sd_scale_y)) + noise();
  for (auto& v : p.log_alpha_prime()) v = std::log(half_normal_median(pr.sd_scale_yprime)) + noise();
  for (auto& v : p.log_sigma()) v = std::log(half_normal_median(pr.sd_scale_y)) + noise();
  for (auto& v : p.log_sigma_prime()) v = std::log(half_normal_median(pr.sd_scale_yprime)) + noise();
  for (auto& v : p.corr_coords()) v = noise();
  for (auto& v : p.z_white().reshaped()) v = noise();
  return p;
}

ParamVector initialize(const ModelConfig& config, const Dataset& data,
                       const SamplerConfig& sampler) {
  Rng rng(sampler.seed);
  return initial_params(config, data, sampler.init_jitter, rng);
}

ModelTarget::ModelTarget(ModelConfig config, Dataset data, double init_jitter)
    : model_(std::move(config), std::move(data)), init_jitter_(init_jitter) {}

std::vector<std::string> ModelTarget::output_names() const {
  const ParamLayout& lay = model_.layout();
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < lay.n_obs(); ++i) out.push_back("x[" + std::to_string(i + 1) + "]");
  auto block = [&](const std::string& base, Eigen::Index count) {
    for (Eigen::Index i = 0; i < count; ++i) {
      out.push_back(count == 1 && lay.n_dims() > 1 ? base
                                                   : base + "[" + std::to_string(i + 1) + "]");
    }
  };
  block("rho", lay.n_rho);
  block("alpha", lay.n_alpha);
  block("alpha_prime", lay.n_alpha_prime);
  block("sigma", lay.n_sigma);
  block("sigma_prime", lay.n_sigma_prime);
  if (lay.n_corr > 0) {
    for (Eigen::Index i = 0; i < lay.n_dims(); ++i)
      for (Eigen::Index j = i + 1; j < lay.n_dims(); ++j)
        out.push_back("C[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
  }
  return out;
}

Eigen::VectorXd ModelTarget::output_values(const Eigen::VectorXd& q) const {
  const ParamLayout& lay = model_.layout();
  const Eigen::Index n_hyper = lay.n_rho + lay.n_alpha + lay.n_alpha_prime + lay.n_sigma +
                               lay.n_sigma_prime;
  const Eigen::Index d = lay.n_dims();
  Eigen::VectorXd out(lay.n_obs() + n_hyper + (lay.n_corr > 0 ? d * (d - 1) / 2 : 0));
  out.head(lay.n_obs()) = q.segment(lay.x_offset, lay.n_obs());
  // The log-scale blocks are contiguous from rho to sigma_prime.
  out.segment(lay.n_obs(), n_hyper) = q.segment(lay.rho_offset, n_hyper).array().exp();
  if (lay.n_corr > 0) {
    const Eigen::MatrixXd l =
        transforms::corr_cholesky_constrain(q.segment(lay.corr_offset, lay.n_corr), d);
    const Eigen::MatrixXd c = l * l.transpose();
    Eigen::Index k = lay.n_obs() + n_hyper;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i + 1; j < d; ++j) out[k++] = c(i, j);
  }
  return out;
}

Eigen::VectorXd ModelTarget::initial_point(Rng& rng) const {
  return initial_params(model_.config(), model_.data(), init_jitter_, rng).values();
}

}  // namespace dgplvm
