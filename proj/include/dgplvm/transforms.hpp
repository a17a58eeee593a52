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

// Unconstraining transforms shared by the model and its tests: the
// tanh-based row-filling map onto Cholesky factors of correlation matrices
// and the LKJ density on those factors.

namespace dgplvm::transforms {

/// Number of free coordinates of a d x d correlation Cholesky factor.
constexpr Eigen::Index corr_free_size(Eigen::Index d) { return d * (d - 1) / 2; }

/// Maps d(d-1)/2 unconstrained reals (row-major over the strict lower
/// triangle) to a lower-triangular factor with unit-norm rows. Adds the log
/// absolute Jacobian determinant to `log_jacobian` when non-null.
Eigen::MatrixXd corr_cholesky_constrain(const Eigen::Ref<const Eigen::VectorXd>& y,
                                        Eigen::Index d,
                                        double* log_jacobian = nullptr);

/// Inverse of corr_cholesky_constrain.
Eigen::VectorXd corr_cholesky_unconstrain(const Eigen::Ref<const Eigen::MatrixXd>& l);

/// log of the integral of det(C)^(eta - 1) over d x d correlation matrices
/// (subtracted by the density below).
double lkj_log_normalizer(Eigen::Index d, double eta);

/// LKJ(eta) log density of C = L L^T expressed on the factor L
/// (includes the C -> L change of variables and the normalizer).
double lkj_corr_cholesky_lpdf(const Eigen::Ref<const Eigen::MatrixXd>& l, double eta);

/// Returns log|J| + lkj_corr_cholesky_lpdf(L(y)) and adds to `grad` its
/// gradient in y plus the pullback of `l_adjoint` (d objective / d L)
/// through the transform.
double corr_cholesky_prior_backward(const Eigen::Ref<const Eigen::VectorXd>& y,
                                    Eigen::Index d, double eta,
                                    const Eigen::Ref<const Eigen::MatrixXd>& l_adjoint,
                                    Eigen::Ref<Eigen::VectorXd> grad);

}  // namespace dgplvm::transforms
