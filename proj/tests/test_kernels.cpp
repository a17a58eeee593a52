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

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "dgplvm/errors.hpp"
#include "dgplvm/kernels.hpp"

using namespace dgplvm;

namespace {

constexpr KernelFamily kFamilies[] = {KernelFamily::SquaredExponential,
                                      KernelFamily::Matern32, KernelFamily::Matern52};

double rel_err(double got, double want, double floor) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

struct Tuple {
  KernelSpec spec;
  double xi;
  double xj;
};

Tuple random_tuple(KernelFamily family, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u_rho(0.3, 3.0), u_sd(0.2, 3.0), u_x(-2.0, 2.0);
  Tuple t;
  t.spec = {family, u_rho(rng), u_sd(rng), u_sd(rng)};
  do {
    t.xi = u_x(rng);
    t.xj = u_x(rng);
  } while (std::abs(t.xi - t.xj) < 1e-2 * t.spec.rho);
  return t;
}

}  // namespace

TEST_CASE("kernel_block values at zero distance") {
  const KernelSpec se{KernelFamily::SquaredExponential, 1.0, 2.0, 1.0};
  CHECK(kernel_block(se, 0.3, 0.3, Block::K00) == doctest::Approx(4.0));
  CHECK(kernel_block(se, 0.3, 0.3, Block::K01) == 0.0);
  CHECK(kernel_block(se, 0.3, 0.3, Block::K10) == 0.0);

  const KernelSpec se_short{KernelFamily::SquaredExponential, 0.5, 1.7, 1.0};
  CHECK(kernel_block(se_short, 1.0, 1.0, Block::K11) == doctest::Approx(4.0));

  const KernelSpec m32{KernelFamily::Matern32, 1.0, 1.0, 2.0};
  CHECK(kernel_block(m32, -0.4, -0.4, Block::K11) == doctest::Approx(12.0));
  CHECK(kernel_block(m32, -0.4, -0.4, Block::K01) == 0.0);

  const KernelSpec m52{KernelFamily::Matern52, 0.7, 1.3, 0.9};
  CHECK(kernel_block(m52, 2.0, 2.0, Block::K11) ==
        doctest::Approx(5.0 / 3.0 * 0.81 / 0.49).epsilon(1e-14));
  CHECK(kernel_block(m52, 2.0, 2.0, Block::K00) == doctest::Approx(1.69));
}

TEST_CASE("kernel_block K01 matches a finite difference of K00") {
  const KernelSpec se{KernelFamily::SquaredExponential, 1.0, 1.0, 1.0};
  const double h = 1e-5;
  const double fd = (kernel_block(se, 1.0, 0.5 + h, Block::K00) -
                     kernel_block(se, 1.0, 0.5 - h, Block::K00)) /
                    (2.0 * h);
  CHECK(rel_err(kernel_block(se, 1.0, 0.5, Block::K01), fd, 0.0) <= 1e-6);
  // Closed form: (xi - xj) / rho^2 exp(-(xi - xj)^2 / 2).
  CHECK(kernel_block(se, 1.0, 0.5, Block::K01) ==
        doctest::Approx(0.5 * std::exp(-0.125)).epsilon(1e-14));
}

TEST_CASE("kernel_block rejects invalid arguments") {
  const KernelSpec ok{KernelFamily::SquaredExponential, 1.0, 1.0, 1.0};
  CHECK_THROWS_AS(kernel_block(ok, NAN, 0.0, Block::K00), InvalidArgument);
  CHECK_THROWS_AS(kernel_block(ok, 0.0, INFINITY, Block::K11), InvalidArgument);
  KernelSpec bad = ok;
  bad.rho = 0.0;
  CHECK_THROWS_AS(kernel_block(bad, 0.0, 1.0, Block::K00), InvalidArgument);
  bad = ok;
  bad.alpha_prime = -1.0;
  CHECK_THROWS_AS(kernel_block(bad, 0.0, 1.0, Block::K01), InvalidArgument);
  CHECK_THROWS_AS(kernel_family_from_string("matern12"), InvalidArgument);
}

TEST_CASE("derivative blocks match finite differences (all families)") {
  std::mt19937_64 rng(20240501);
  for (KernelFamily family : kFamilies) {
    CAPTURE(to_string(family));
    for (int rep = 0; rep < 100; ++rep) {
      const Tuple t = random_tuple(family, rng);
      KernelSpec tied = t.spec;
      tied.alpha_prime = tied.alpha;
      const double ratio = t.spec.alpha_prime / t.spec.alpha;
      const double scale = t.spec.alpha * t.spec.alpha_prime / t.spec.rho;
      auto k00 = [&](double a, double b) { return kernel_block(tied, a, b, Block::K00); };

      const double h = 1e-5;
      const double fd01 = ratio * (k00(t.xi, t.xj + h) - k00(t.xi, t.xj - h)) / (2 * h);
      const double fd10 = ratio * (k00(t.xi + h, t.xj) - k00(t.xi - h, t.xj)) / (2 * h);
      CHECK(rel_err(kernel_block(t.spec, t.xi, t.xj, Block::K01), fd01, 1e-3 * scale) <= 1e-5);
      CHECK(rel_err(kernel_block(t.spec, t.xi, t.xj, Block::K10), fd10, 1e-3 * scale) <= 1e-5);

      const double h2 = 1e-4;
      const double fd11 = ratio * ratio *
                          (k00(t.xi + h2, t.xj + h2) - k00(t.xi + h2, t.xj - h2) -
                           k00(t.xi - h2, t.xj + h2) + k00(t.xi - h2, t.xj - h2)) /
                          (4 * h2 * h2);
      const double scale11 = t.spec.alpha_prime * t.spec.alpha_prime / (t.spec.rho * t.spec.rho);
      CHECK(rel_err(kernel_block(t.spec, t.xi, t.xj, Block::K11), fd11, 1e-3 * scale11) <= 1e-4);
    }
  }
}

TEST_CASE("cross blocks are antisymmetric and K10 is K01 transposed") {
  std::mt19937_64 rng(7);
  for (KernelFamily family : kFamilies) {
    for (int rep = 0; rep < 50; ++rep) {
      const Tuple t = random_tuple(family, rng);
      const double k01 = kernel_block(t.spec, t.xi, t.xj, Block::K01);
      CHECK(kernel_block(t.spec, t.xj, t.xi, Block::K01) == doctest::Approx(-k01).epsilon(1e-13));
      CHECK(kernel_block(t.spec, t.xi, t.xj, Block::K10) == doctest::Approx(-k01).epsilon(1e-13));
      CHECK(kernel_block(t.spec, t.xi, t.xj, Block::K10) ==
            kernel_block(t.spec, t.xj, t.xi, Block::K01));
      // Pure: identical inputs give identical bits.
      CHECK(kernel_block(t.spec, t.xi, t.xj, Block::K11) ==
            kernel_block(t.spec, t.xi, t.xj, Block::K11));
    }
  }
}

TEST_CASE("kernel_profile derivatives are consistent") {
  // Check phi', phi'', phi''' by central differences of the profile itself.
  for (KernelFamily family : kFamilies) {
    for (double t : {-2.3, -0.7, 0.05, 0.4, 1.9}) {
      const double h = 1e-6;
      const KernelProfile p = kernel_profile(family, t);
      const KernelProfile lo = kernel_profile(family, t - h);
      const KernelProfile hi = kernel_profile(family, t + h);
      CHECK(p.d1 == doctest::Approx((hi.value - lo.value) / (2 * h)).epsilon(1e-6));
      CHECK(p.d2 == doctest::Approx((hi.d1 - lo.d1) / (2 * h)).epsilon(1e-6));
      CHECK(p.d3 == doctest::Approx((hi.d2 - lo.d2) / (2 * h)).epsilon(1e-6));
    }
  }
}

TEST_CASE("build_joint_cov small cases") {
  const KernelSpec se{KernelFamily::SquaredExponential, 1.0, 1.0, 1.0};
  const Eigen::VectorXd one = Eigen::VectorXd::Zero(1);
  const JointCovMatrix k = build_joint_cov(se, one, true, 0.0);
  REQUIRE(k.entries.rows() == 2);
  CHECK(k.entries.isApprox(Eigen::MatrixXd::Identity(2, 2)));

  for (KernelFamily family : kFamilies) {
    const KernelSpec spec{family, 0.8, 1.5, 0.4};
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(5, 0.0, 2.0);
    const JointCovMatrix m = build_joint_cov(spec, x, false, 1e-6);
    REQUIRE(m.entries.rows() == 5);
    for (int i = 0; i < 5; ++i) CHECK(m.entries(i, i) == doctest::Approx(2.25 + 1e-6));
  }

  CHECK_THROWS_AS(build_joint_cov(se, Eigen::VectorXd(0), true), InvalidArgument);
  CHECK_THROWS_AS(build_joint_cov(se, one, true, -1.0), InvalidArgument);
}

TEST_CASE("joint covariance on the simulation grid is symmetric and factorizes") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(20, 0.5, 10.0);
  for (KernelFamily family : kFamilies) {
    const KernelSpec spec{family, 0.75, 1.5, 0.5};
    const JointCovMatrix k = build_joint_cov(spec, x, true, 1e-6);
    const double max_abs = k.entries.cwiseAbs().maxCoeff();
    CHECK((k.entries - k.entries.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * max_abs);
    CHECK_NOTHROW(cholesky_psd(k));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k.entries);
    CHECK(eig.eigenvalues().minCoeff() >= 0.0);
  }
}

TEST_CASE("modified kernel equals a diagonal rescaling of the tied kernel") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u_rho(0.3, 2.0), u_sd(0.1, 3.0), u_x(0.0, 10.0);
  for (KernelFamily family : kFamilies) {
    for (int rep = 0; rep < 20; ++rep) {
      const KernelSpec spec{family, u_rho(rng), u_sd(rng), u_sd(rng)};
      KernelSpec tied = spec;
      tied.alpha_prime = spec.alpha;
      Eigen::VectorXd x(12);
      for (auto& v : x) v = u_x(rng);
      const Eigen::MatrixXd s = build_joint_cov(tied, x, true, 0.0).entries;
      const Eigen::MatrixXd k = build_joint_cov(spec, x, true, 0.0).entries;
      Eigen::VectorXd dvec = Eigen::VectorXd::Ones(24);
      dvec.tail(12).setConstant(spec.alpha_prime / spec.alpha);
      const Eigen::MatrixXd dsd = dvec.asDiagonal() * s * dvec.asDiagonal();
      const double denom = k.cwiseAbs().maxCoeff();
      CHECK((k - dsd).cwiseAbs().maxCoeff() <= 1e-12 * denom);
    }
  }
}

TEST_CASE("cholesky_psd") {
  CHECK(cholesky_psd(Eigen::MatrixXd::Identity(4, 4)).isApprox(Eigen::MatrixXd::Identity(4, 4)));
  Eigen::MatrixXd d(2, 2);
  d << 4, 0, 0, 9;
  Eigen::MatrixXd want(2, 2);
  want << 2, 0, 0, 3;
  CHECK(cholesky_psd(d).isApprox(want));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::MatrixXd b(15, 15);
    for (auto& v : b.reshaped()) v = normal(rng);
    const Eigen::MatrixXd a = b * b.transpose() + 1e-3 * Eigen::MatrixXd::Identity(15, 15);
    const Eigen::MatrixXd l = cholesky_psd(a);
    CHECK((l * l.transpose() - a).norm() / a.norm() <= 1e-8);
    CHECK(l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().isZero());
    CHECK(cholesky_psd(a) == l);
  }

  Eigen::MatrixXd bad(3, 3);
  bad << 1, 0, 0, 0, 1, 2, 0, 2, 1;
  try {
    cholesky_psd(bad);
    FAIL("expected NotPositiveDefinite");
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.pivot() == 2);
  }
}
