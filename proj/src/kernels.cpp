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

#include "dgplvm/kernels.hpp"

#include <cmath>
#include <sstream>

#include "dgplvm/errors.hpp"

namespace dgplvm {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.2360679774997898;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw InvalidArgument(std::string(what) + " must be finite");
  }
}

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential:
      return "se";
    case KernelFamily::Matern32:
      return "matern32";
    case KernelFamily::Matern52:
      return "matern52";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(std::string_view name) {
  if (name == "se" || name == "squared-exponential" || name == "SE") {
    return KernelFamily::SquaredExponential;
  }
  if (name == "matern32" || name == "matern-3/2" || name == "m32") {
    return KernelFamily::Matern32;
  }
  if (name == "matern52" || name == "matern-5/2" || name == "m52") {
    return KernelFamily::Matern52;
  }
  throw InvalidArgument("unknown kernel family '" + std::string(name) +
                        "' (expected se, matern32 or matern52)");
}

void KernelSpec::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw InvalidArgument("kernel length scale rho must be positive");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("kernel marginal SD alpha must be positive");
  }
  if (!(alpha_prime > 0.0) || !std::isfinite(alpha_prime)) {
    throw InvalidArgument("kernel marginal SD alpha_prime must be positive");
  }
}

KernelProfile kernel_profile(KernelFamily family, double t) noexcept {
  switch (family) {
    case KernelFamily::SquaredExponential: {
      const double t2 = t * t;
      const double e = std::exp(-0.5 * t2);
      return {e, -t * e, (t2 - 1.0) * e, (3.0 - t2) * t * e};
    }
    case KernelFamily::Matern32: {
      const double a = kSqrt3 * std::abs(t);
      const double e = std::exp(-a);
      const double sgn = (t > 0.0) - (t < 0.0);
      return {(1.0 + a) * e, -3.0 * t * e, -3.0 * (1.0 - a) * e,
              3.0 * kSqrt3 * sgn * (2.0 - a) * e};
    }
    case KernelFamily::Matern52: {
      const double a = kSqrt5 * std::abs(t);
      const double e = std::exp(-a);
      return {(1.0 + a + a * a / 3.0) * e, -(5.0 / 3.0) * t * (1.0 + a) * e,
              -(5.0 / 3.0) * (1.0 + a - a * a) * e,
              (25.0 / 3.0) * t * (3.0 - a) * e};
    }
  }
  return {0.0, 0.0, 0.0, 0.0};
}

double kernel_block(const KernelSpec& spec, double xi, double xj, Block block) {
  spec.validate();
  require_finite(xi, "kernel input xi");
  require_finite(xj, "kernel input xj");
  if (block == Block::K10) {
    return kernel_block(spec, xj, xi, Block::K01);
  }
  const double t = (xi - xj) / spec.rho;
  const KernelProfile p = kernel_profile(spec.family, t);
  switch (block) {
    case Block::K00:
      return spec.alpha * spec.alpha * p.value;
    case Block::K01:
      return -spec.alpha * spec.alpha_prime * p.d1 / spec.rho;
    case Block::K11:
      return -spec.alpha_prime * spec.alpha_prime * p.d2 /
             (spec.rho * spec.rho);
    case Block::K10:
      break;
  }
  return 0.0;
}

JointCovMatrix build_joint_cov(const KernelSpec& spec,
                               const Eigen::Ref<const Eigen::VectorXd>& x,
                               bool include_derivatives, double jitter) {
  spec.validate();
  const Eigen::Index n = x.size();
  if (n < 1) {
    throw InvalidArgument("build_joint_cov needs at least one input");
  }
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) {
    throw InvalidArgument("jitter must be finite and nonnegative");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    require_finite(x[i], "kernel input");
  }

  const double a2 = spec.alpha * spec.alpha;
  const double aap = spec.alpha * spec.alpha_prime / spec.rho;
  const double ap2 = spec.alpha_prime * spec.alpha_prime / (spec.rho * spec.rho);

  JointCovMatrix out;
  out.jitter = jitter;
  out.include_derivatives = include_derivatives;
  const Eigen::Index m = include_derivatives ? 2 * n : n;
  out.entries.resize(m, m);
  auto& k = out.entries;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const KernelProfile p =
          kernel_profile(spec.family, (x[i] - x[j]) / spec.rho);
      k(i, j) = k(j, i) = a2 * p.value;
      if (!include_derivatives) continue;
      // K01(x_i, x_j) = -aap phi'(t_ij); K10(x_i, x_j) = K01(x_j, x_i).
      k(i, n + j) = k(n + j, i) = -aap * p.d1;
      k(j, n + i) = k(n + i, j) = aap * p.d1;
      k(n + i, n + j) = k(n + j, n + i) = -ap2 * p.d2;
    }
  }
  k.diagonal().array() += jitter;
  return out;
}

std::ptrdiff_t cholesky_in_place(Eigen::MatrixXd& m) noexcept {
  const Eigen::Index n = m.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = m(j, j) - m.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) {
      return j;
    }
    const double ljj = std::sqrt(d);
    m(j, j) = ljj;
    const Eigen::Index rest = n - j - 1;
    if (rest > 0) {
      m.col(j).tail(rest) -=
          m.block(j + 1, 0, rest, j) * m.row(j).head(j).transpose();
      m.col(j).tail(rest) /= ljj;
    }
  }
  m.triangularView<Eigen::StrictlyUpper>().setZero();
  return -1;
}

Eigen::MatrixXd cholesky_psd(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  if (m.rows() != m.cols()) {
    throw InvalidArgument("cholesky_psd needs a square matrix");
  }
  Eigen::MatrixXd l = m;
  const std::ptrdiff_t pivot = cholesky_in_place(l);
  if (pivot >= 0) {
    std::ostringstream msg;
    msg << "matrix is not positive definite (pivot " << pivot << " of "
        << m.rows() << ")";
    throw NotPositiveDefinite(pivot, msg.str());
  }
  return l;
}

Eigen::MatrixXd cholesky_psd(const JointCovMatrix& m) {
  return cholesky_psd(m.entries);
}

}  // namespace dgplvm
