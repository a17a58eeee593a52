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

#include <cstddef>
#include <string>
#include <string_view>

namespace dgplvm {

/// Stationary covariance families with a second derivative. Matern 1/2 is
/// deliberately absent: it is not mean-square differentiable.
enum class KernelFamily { SquaredExponential, Matern32, Matern52 };

std::string to_string(KernelFamily family);

/// Accepts "se", "squared-exponential", "matern32", "matern-3/2",
/// "matern52", "matern-5/2".
KernelFamily kernel_family_from_string(std::string_view name);

inline constexpr double kDefaultJitter = 1e-6;

/// Hyperparameters of one output dimension. `alpha` scales the function
/// values, `alpha_prime` the derivative values, `rho` is in input units.
struct KernelSpec {
  KernelFamily family = KernelFamily::SquaredExponential;
  double rho = 1.0;
  double alpha = 1.0;
  double alpha_prime = 1.0;

  void validate() const;
};

/// K00 = K, K01 = dK/dx_j, K10 = dK/dx_i, K11 = d2K/dx_i dx_j.
enum class Block { K00, K01, K10, K11 };

/// Unit-amplitude profile phi(t) of the family and its first three
/// derivatives in the signed scaled distance t = (x_i - x_j) / rho.
///
/// The blocks follow from k(u) = phi(u / rho):
///   K00 = alpha^2 phi,  K01 = -alpha alpha' phi' / rho,
///   K10 = alpha alpha' phi' / rho,  K11 = -alpha'^2 phi'' / rho^2.
/// For Matern 3/2 the third derivative jumps at t = 0; the value returned
/// there is 0, the mean of the one-sided limits.
struct KernelProfile {
  double value;
  double d1;
  double d2;
  double d3;
};

KernelProfile kernel_profile(KernelFamily family, double t) noexcept;

/// Formula value of one covariance block between inputs xi and xj.
/// Throws InvalidArgument for non-finite inputs or non-positive scales.
double kernel_block(const KernelSpec& spec, double xi, double xj, Block block);

/// Joint covariance of (f(x), f'(x)) over a grid: [[K00, K01], [K10, K11]]
/// with jitter on the diagonal, or K00 + jitter I without derivatives.
struct JointCovMatrix {
  Eigen::MatrixXd entries;
  double jitter = 0.0;
  bool include_derivatives = false;
};

JointCovMatrix build_joint_cov(const KernelSpec& spec,
                               const Eigen::Ref<const Eigen::VectorXd>& x,
                               bool include_derivatives,
                               double jitter = kDefaultJitter);

/// In-place lower Cholesky factorization. On success the lower triangle
/// holds L, the strict upper triangle is zeroed and -1 is returned. On
/// failure the index of the first non-positive pivot is returned and the
/// contents of `m` are unspecified.
std::ptrdiff_t cholesky_in_place(Eigen::MatrixXd& m) noexcept;

/// Lower Cholesky factor of a symmetric matrix. Throws NotPositiveDefinite
/// carrying the failing pivot.
Eigen::MatrixXd cholesky_psd(const Eigen::Ref<const Eigen::MatrixXd>& m);
Eigen::MatrixXd cholesky_psd(const JointCovMatrix& m);

}  // namespace dgplvm
