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

#include "dgplvm/transforms.hpp"

#include <cmath>
#include <vector>

#include "dgplvm/errors.hpp"

namespace dgplvm::transforms {

Eigen::MatrixXd corr_cholesky_constrain(const Eigen::Ref<const Eigen::VectorXd>& y,
                                        Eigen::Index d, double* log_jacobian) {
  if (y.size() != corr_free_size(d)) {
    throw InvalidArgument("correlation coordinate vector has the wrong size");
  }
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
  if (d == 0) return l;
  l(0, 0) = 1.0;
  double lj = 0.0;
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < d; ++i) {
    double sum_sqs = 0.0;
    for (Eigen::Index j = 0; j < i; ++j, ++k) {
      const double z = std::tanh(y[k]);
      lj += std::log1p(-z * z);
      const double c = std::sqrt(1.0 - sum_sqs);
      lj += std::log(c);
      l(i, j) = z * c;
      sum_sqs += l(i, j) * l(i, j);
    }
    l(i, i) = std::sqrt(std::max(0.0, 1.0 - sum_sqs));
  }
  if (log_jacobian != nullptr) *log_jacobian += lj;
  return l;
}

Eigen::VectorXd corr_cholesky_unconstrain(const Eigen::Ref<const Eigen::MatrixXd>& l) {
  const Eigen::Index d = l.rows();
  Eigen::VectorXd y(corr_free_size(d));
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < d; ++i) {
    double sum_sqs = 0.0;
    for (Eigen::Index j = 0; j < i; ++j, ++k) {
      const double z = l(i, j) / std::sqrt(1.0 - sum_sqs);
      y[k] = std::atanh(z);
      sum_sqs += l(i, j) * l(i, j);
    }
  }
  return y;
}

double lkj_log_normalizer(Eigen::Index d, double eta) {
  if (!(eta > 0.0)) throw InvalidArgument("LKJ shape eta must be positive");
  double out = 0.0;
  for (Eigen::Index k = 1; k < d; ++k) {
    const double dk = static_cast<double>(d - k);
    const double b = eta + (dk - 1.0) / 2.0;
    const double log_beta = 2.0 * std::lgamma(b) - std::lgamma(2.0 * b);
    out += (2.0 * eta - 2.0 + dk) * dk * std::log(2.0) + dk * log_beta;
  }
  return out;
}

double lkj_corr_cholesky_lpdf(const Eigen::Ref<const Eigen::MatrixXd>& l, double eta) {
  const Eigen::Index d = l.rows();
  double lp = -lkj_log_normalizer(d, eta);
  for (Eigen::Index i = 1; i < d; ++i) {
    const double w = static_cast<double>(d - i - 1) + 2.0 * eta - 2.0;
    lp += w * std::log(l(i, i));
  }
  return lp;
}

double corr_cholesky_prior_backward(const Eigen::Ref<const Eigen::VectorXd>& y,
                                    Eigen::Index d, double eta,
                                    const Eigen::Ref<const Eigen::MatrixXd>& l_adjoint,
                                    Eigen::Ref<Eigen::VectorXd> grad) {
  double value = -lkj_log_normalizer(d, eta);
  std::vector<double> z(static_cast<std::size_t>(d));
  std::vector<double> c(static_cast<std::size_t>(d));
  std::vector<double> lij(static_cast<std::size_t>(d));
  Eigen::Index row_start = 0;
  for (Eigen::Index i = 1; i < d; ++i) {
    // Forward over row i, keeping what the reverse sweep needs.
    double sum_sqs = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const Eigen::Index k = row_start + j;
      z[j] = std::tanh(y[k]);
      c[j] = std::sqrt(1.0 - sum_sqs);
      lij[j] = z[j] * c[j];
      value += std::log1p(-z[j] * z[j]) + std::log(c[j]);
      sum_sqs += lij[j] * lij[j];
    }
    const double one_minus = std::max(1.0 - sum_sqs, 1e-300);
    const double lii = std::sqrt(one_minus);
    const double w = static_cast<double>(d - i - 1) + 2.0 * eta - 2.0;
    value += w * std::log(lii);

    // Reverse: s_bar is the adjoint of the running sum of squares.
    double s_bar = -l_adjoint(i, i) / (2.0 * lii) - 0.5 * w / one_minus;
    for (Eigen::Index j = i - 1; j >= 0; --j) {
      const Eigen::Index k = row_start + j;
      const double l_bar = l_adjoint(i, j) + 2.0 * s_bar * lij[j];
      const double z_bar = l_bar * c[j];
      const double c_bar = l_bar * z[j] + 1.0 / c[j];
      s_bar += -c_bar / (2.0 * c[j]);
      grad[k] += z_bar * (1.0 - z[j] * z[j]) - 2.0 * z[j];
    }
    row_start += i;
  }
  return value;
}

}  // namespace dgplvm::transforms
