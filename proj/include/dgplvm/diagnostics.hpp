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

#include <vector>

// Convergence diagnostics on rank-normalized split chains and accuracy of
// latent input recovery.
//
// REFERENCE: Vehtari, A., Gelman, A., Simpson, D., Carpenter, B. and
// Buerkner, P.-C., 2021. Rank-normalization, folding, and localization: an
// improved R-hat for assessing convergence of MCMC. Bayesian Analysis 16(2).

namespace dgplvm {

/// C x S matrix: one row per chain, one column per draw.
using ScalarDrawSet = Eigen::MatrixXd;

/// A diagnostic value; `degenerate` is set (and value is NaN) when the
/// draws carry no variation to measure.
struct DiagnosticValue {
  double value = 0.0;
  bool degenerate = false;
};

/// Rank-normalized split R-hat. With one chain the two halves of that chain
/// are compared.
DiagnosticValue split_rhat(const ScalarDrawSet& draws);

/// ESS of the rank-normalized split chains.
DiagnosticValue bulk_ess(const ScalarDrawSet& draws);

/// Minimum ESS of the 5% and 95% quantile indicators over split chains.
DiagnosticValue tail_ess(const ScalarDrawSet& draws);

/// ESS of the draws as given (no splitting, no rank normalization), by
/// Geyer's initial monotone sequence over the averaged autocorrelations.
DiagnosticValue ess_basic(const ScalarDrawSet& draws);

/// Rank-normalized z-scores of all draws jointly (average ranks for ties,
/// offset (r - 3/8) / (S C + 1/4)).
ScalarDrawSet rank_normalize(const ScalarDrawSet& draws);

/// Each chain cut into its first and second half (odd middle draw dropped).
ScalarDrawSet split_chains(const ScalarDrawSet& draws);

/// Sample quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double prob);

struct RmseRecord {
  double rmse = 0.0;
  double bias = 0.0;
  double sd = 0.0;  // sample SD of the draws (S - 1 denominator)
};

struct RmseReport {
  std::vector<RmseRecord> per_input;
  double mean_rmse = 0.0;
};

/// RMSE of posterior draws of x (S x N) against the truth, per input.
RmseReport rmse_latent(const Eigen::Ref<const Eigen::MatrixXd>& draws_of_x,
                       const Eigen::Ref<const Eigen::VectorXd>& x_true);

/// Convergence thresholds: R-hat above 1.1 or ESS below 100 per chain.
inline constexpr double kRhatThreshold = 1.1;
inline constexpr double kEssPerChain = 100.0;

}  // namespace dgplvm
