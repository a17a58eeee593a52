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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dgplvm/transforms.hpp"
#include "support.hpp"

using namespace dgplvm;
using namespace dgplvm::transforms;

namespace {

Eigen::MatrixXd chol_from_r(double r) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(2, 2);
  l(0, 0) = 1.0;
  l(1, 0) = r;
  l(1, 1) = std::sqrt(1.0 - r * r);
  return l;
}

}  // namespace

TEST_CASE("zero coordinates give the identity factor") {
  for (Eigen::Index d : {1, 2, 3, 5}) {
    double lj = 0.0;
    const Eigen::MatrixXd l = corr_cholesky_constrain(Eigen::VectorXd::Zero(corr_free_size(d)), d, &lj);
    CHECK(l.isApprox(Eigen::MatrixXd::Identity(d, d)));
    CHECK(lj == doctest::Approx(0.0));
  }
}

TEST_CASE("factor rows have unit norm and round trip") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.5);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index d = 2 + rep % 5;
    Eigen::VectorXd y(corr_free_size(d));
    for (auto& v : y) v = normal(rng);
    const Eigen::MatrixXd l = corr_cholesky_constrain(y, d);
    CHECK((l.rowwise().norm().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().isZero());
    CHECK((corr_cholesky_unconstrain(l) - y).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("log Jacobian matches a numerical determinant") {
  // Map y to the strictly lower entries of L; those determine L completely.
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 0.7);
  const Eigen::Index d = 4;
  const Eigen::Index k = corr_free_size(d);
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::VectorXd y(k);
    for (auto& v : y) v = normal(rng);
    auto lower = [&](const Eigen::VectorXd& yy) {
      const Eigen::MatrixXd l = corr_cholesky_constrain(yy, d);
      Eigen::VectorXd out(k);
      Eigen::Index n = 0;
      for (Eigen::Index i = 1; i < d; ++i)
        for (Eigen::Index j = 0; j < i; ++j) out[n++] = l(i, j);
      return out;
    };
    Eigen::MatrixXd jac(k, k);
    const double h = 1e-6;
    for (Eigen::Index c = 0; c < k; ++c) {
      Eigen::VectorXd hi = y, lo = y;
      hi[c] += h;
      lo[c] -= h;
      jac.col(c) = (lower(hi) - lower(lo)) / (2 * h);
    }
    double lj = 0.0;
    corr_cholesky_constrain(y, d, &lj);
    CHECK(lj == doctest::Approx(std::log(std::abs(jac.determinant()))).epsilon(1e-6));
  }
}

TEST_CASE("LKJ density integrates to one") {
  for (double eta : {1.0, 3.0, 7.5}) {
    // D = 2: the density on L10 = r is the density of the correlation.
    const int n = 200000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = -1.0 + (i + 0.5) * 2.0 / n;
      sum += std::exp(lkj_corr_cholesky_lpdf(chol_from_r(r), eta));
    }
    CHECK(sum * 2.0 / n == doctest::Approx(1.0).epsilon(1e-6));
  }

  // D = 3 on the unconstrained coordinates, including the Jacobian.
  const double eta = 3.0;
  const int n = 90;
  const double lim = 5.0, step = 2 * lim / n;
  double sum = 0.0;
  Eigen::VectorXd y(3);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        y << -lim + (a + 0.5) * step, -lim + (b + 0.5) * step, -lim + (c + 0.5) * step;
        double lj = 0.0;
        const Eigen::MatrixXd l = corr_cholesky_constrain(y, 3, &lj);
        sum += std::exp(lj + lkj_corr_cholesky_lpdf(l, eta));
      }
  CHECK(sum * step * step * step == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("LKJ at the identity is minus the log normalizer") {
  for (Eigen::Index d : {2, 3, 5}) {
    CHECK(lkj_corr_cholesky_lpdf(Eigen::MatrixXd::Identity(d, d), 3.0) ==
          doctest::Approx(-lkj_log_normalizer(d, 3.0)));
  }
  // Uniform over 2 x 2 correlations: the volume is 2.
  CHECK(lkj_log_normalizer(2, 1.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("prior backward pass matches finite differences") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 0.8);
  for (Eigen::Index d : {2, 3, 5}) {
    const Eigen::Index k = corr_free_size(d);
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::VectorXd y(k);
      for (auto& v : y) v = normal(rng);
      Eigen::MatrixXd adj(d, d);
      for (auto& v : adj.reshaped()) v = normal(rng);
      auto objective = [&](const Eigen::VectorXd& yy) {
        double lj = 0.0;
        const Eigen::MatrixXd l = corr_cholesky_constrain(yy, d, &lj);
        return lj + lkj_corr_cholesky_lpdf(l, 2.5) +
               (adj.triangularView<Eigen::Lower>().toDenseMatrix().array() * l.array()).sum();
      };
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
      const double v = corr_cholesky_prior_backward(
          y, d, 2.5, adj.triangularView<Eigen::Lower>().toDenseMatrix(), grad);
      double lj = 0.0;
      const Eigen::MatrixXd l = corr_cholesky_constrain(y, d, &lj);
      CHECK(v == doctest::Approx(lj + lkj_corr_cholesky_lpdf(l, 2.5)));
      const Eigen::VectorXd fd = testing::central_difference(objective, y);
      CHECK(testing::gradient_mismatch(grad, fd) <= 1.0);
    }
  }
}
