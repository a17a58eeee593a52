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

#include "dgplvm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "dgplvm/errors.hpp"

namespace dgplvm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_draws(const ScalarDrawSet& draws, Eigen::Index min_draws) {
  if (draws.rows() < 1 || draws.cols() < min_draws) {
    throw InvalidArgument("diagnostics need at least " + std::to_string(min_draws) +
                          " draws per chain");
  }
  if (!draws.allFinite()) throw InvalidArgument("diagnostics need finite draws");
}

bool is_constant(const ScalarDrawSet& draws) {
  return (draws.array() == draws(0, 0)).all();
}

// Biased autocovariance of one chain at lag t.
double autocov(const Eigen::Ref<const Eigen::RowVectorXd>& chain, double mean,
               Eigen::Index lag) {
  const Eigen::Index n = chain.size();
  double acc = 0.0;
  for (Eigen::Index i = 0; i + lag < n; ++i) {
    acc += (chain[i] - mean) * (chain[i + lag] - mean);
  }
  return acc / static_cast<double>(n);
}

double classic_rhat(const ScalarDrawSet& chains) {
  const Eigen::Index c = chains.rows();
  const double n = static_cast<double>(chains.cols());
  const Eigen::VectorXd means = chains.rowwise().mean();
  Eigen::VectorXd vars(c);
  for (Eigen::Index k = 0; k < c; ++k) {
    vars[k] = (chains.row(k).array() - means[k]).square().sum() / (n - 1.0);
  }
  const double w = vars.mean();
  const double grand = means.mean();
  const double b = n * (means.array() - grand).square().sum() / static_cast<double>(c - 1);
  return std::sqrt(((n - 1.0) / n * w + b / n) / w);
}

}  // namespace

ScalarDrawSet split_chains(const ScalarDrawSet& draws) {
  const Eigen::Index half = draws.cols() / 2;
  const Eigen::Index c = draws.rows();
  ScalarDrawSet out(2 * c, half);
  for (Eigen::Index k = 0; k < c; ++k) {
    out.row(2 * k) = draws.row(k).head(half);
    out.row(2 * k + 1) = draws.row(k).tail(half);
  }
  return out;
}

ScalarDrawSet rank_normalize(const ScalarDrawSet& draws) {
  const Eigen::Index total = draws.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  const double* data = draws.data();
  std::stable_sort(order.begin(), order.end(),
                   [data](Eigen::Index a, Eigen::Index b) { return data[a] < data[b]; });
  ScalarDrawSet out(draws.rows(), draws.cols());
  double* dst = out.data();
  const boost::math::normal_distribution<double> std_normal;
  const double denom = static_cast<double>(total) + 0.25;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && data[order[j + 1]] == data[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    const double z = boost::math::quantile(std_normal, (avg_rank - 0.375) / denom);
    for (std::size_t k = i; k <= j; ++k) dst[order[k]] = z;
    i = j + 1;
  }
  return out;
}

DiagnosticValue ess_basic(const ScalarDrawSet& draws) {
  check_draws(draws, 4);
  if (is_constant(draws)) return {kNaN, true};
  const Eigen::Index chains = draws.rows();
  const Eigen::Index n = draws.cols();
  const double nd = static_cast<double>(n);
  const Eigen::VectorXd means = draws.rowwise().mean();

  auto mean_acov = [&](Eigen::Index lag) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < chains; ++k) acc += autocov(draws.row(k), means[k], lag);
    return acc / static_cast<double>(chains);
  };

  const double mean_var = mean_acov(0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (chains > 1) {
    const double grand = means.mean();
    var_plus += (means.array() - grand).square().sum() / static_cast<double>(chains - 1);
  }

  // Geyer's initial positive sequence over paired autocorrelations, then
  // the initial monotone sequence.
  std::vector<double> rho_hat(static_cast<std::size_t>(n), 0.0);
  Eigen::Index t = 0;
  double rho_even = 1.0;
  rho_hat[0] = rho_even;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho_hat[1] = rho_odd;
  while (t < n - 5 && !std::isnan(rho_even + rho_odd) && rho_even + rho_odd > 0) {
    t += 2;
    rho_even = 1.0 - (mean_var - mean_acov(t)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    if (rho_even + rho_odd >= 0) {
      rho_hat[static_cast<std::size_t>(t)] = rho_even;
      rho_hat[static_cast<std::size_t>(t + 1)] = rho_odd;
    }
  }
  const Eigen::Index max_t = t;
  if (rho_even > 0) rho_hat[static_cast<std::size_t>(max_t)] = rho_even;

  t = 0;
  while (t <= max_t - 4) {
    t += 2;
    const auto ut = static_cast<std::size_t>(t);
    if (rho_hat[ut] + rho_hat[ut + 1] > rho_hat[ut - 2] + rho_hat[ut - 1]) {
      rho_hat[ut] = 0.5 * (rho_hat[ut - 2] + rho_hat[ut - 1]);
      rho_hat[ut + 1] = rho_hat[ut];
    }
  }

  const double s_total = static_cast<double>(chains) * nd;
  double tau = -1.0 + rho_hat[static_cast<std::size_t>(max_t)];
  for (Eigen::Index k = 0; k < max_t; ++k) tau += 2.0 * rho_hat[static_cast<std::size_t>(k)];
  tau = std::max(tau, 1.0 / std::log10(s_total));
  return {s_total / tau, false};
}

DiagnosticValue split_rhat(const ScalarDrawSet& draws) {
  check_draws(draws, 4);
  if (is_constant(draws)) return {kNaN, true};
  return {classic_rhat(split_chains(rank_normalize(draws))), false};
}

DiagnosticValue bulk_ess(const ScalarDrawSet& draws) {
  check_draws(draws, 4);
  if (is_constant(draws)) return {kNaN, true};
  return ess_basic(rank_normalize(split_chains(draws)));
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw InvalidArgument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

DiagnosticValue tail_ess(const ScalarDrawSet& draws) {
  check_draws(draws, 4);
  if (is_constant(draws)) return {kNaN, true};
  const std::vector<double> all(draws.data(), draws.data() + draws.size());
  double best = std::numeric_limits<double>::infinity();
  for (const double prob : {0.05, 0.95}) {
    const double q = quantile(all, prob);
    const ScalarDrawSet indicator = (draws.array() <= q).cast<double>().matrix();
    const DiagnosticValue e = ess_basic(split_chains(indicator));
    if (e.degenerate) return {kNaN, true};
    best = std::min(best, e.value);
  }
  return {best, false};
}

RmseReport rmse_latent(const Eigen::Ref<const Eigen::MatrixXd>& draws_of_x,
                       const Eigen::Ref<const Eigen::VectorXd>& x_true) {
  if (draws_of_x.cols() != x_true.size()) {
    throw InvalidArgument("rmse_latent: draws have " + std::to_string(draws_of_x.cols()) +
                          " inputs but x_true has " + std::to_string(x_true.size()));
  }
  if (draws_of_x.rows() < 2) throw InvalidArgument("rmse_latent needs at least two draws");
  if (!x_true.allFinite()) throw InvalidArgument("rmse_latent: x_true must be finite");
  const double s = static_cast<double>(draws_of_x.rows());
  RmseReport report;
  report.per_input.reserve(static_cast<std::size_t>(x_true.size()));
  for (Eigen::Index i = 0; i < x_true.size(); ++i) {
    const auto col = draws_of_x.col(i);
    const double mean = col.mean();
    RmseRecord rec;
    rec.rmse = std::sqrt((col.array() - x_true[i]).square().mean());
    rec.bias = mean - x_true[i];
    rec.sd = std::sqrt((col.array() - mean).square().sum() / (s - 1.0));
    report.per_input.push_back(rec);
    report.mean_rmse += rec.rmse;
  }
  report.mean_rmse /= static_cast<double>(x_true.size());
  return report;
}

}  // namespace dgplvm
