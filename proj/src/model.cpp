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

#include "dgplvm/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "dgplvm/errors.hpp"
#include "dgplvm/transforms.hpp"

namespace dgplvm {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kLog2 = std::numbers::ln2;

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

// Half-normal log density of exp(lv) plus the log-Jacobian lv.
inline double half_normal_log_scale(double lv, double scale, double* grad) {
  const double v = std::exp(lv);
  const double r = v / scale;
  if (grad != nullptr) *grad += 1.0 - r * r;
  return kLog2 - kHalfLog2Pi - std::log(scale) - 0.5 * r * r + lv;
}

// Inverse-gamma log density of exp(lr) plus the log-Jacobian lr.
inline double inv_gamma_log_scale(double lr, double shape, double scale,
                                  double* grad) {
  const double rho = std::exp(lr);
  if (grad != nullptr) *grad += -shape + scale / rho;
  return shape * std::log(scale) - std::lgamma(shape) - shape * lr - scale / rho;
}

}  // namespace

void PriorSpec::validate() const {
  if (!positive_finite(rho_shape) || !positive_finite(rho_scale)) {
    throw InvalidArgument("inverse-gamma prior parameters must be positive");
  }
  if (!positive_finite(sd_scale_y) || !positive_finite(sd_scale_yprime)) {
    throw InvalidArgument("half-normal prior scales must be positive");
  }
  if (!positive_finite(lkj_eta)) throw InvalidArgument("LKJ eta must be positive");
  if (!positive_finite(x_obs_sd)) {
    throw InvalidArgument("measurement SD x_obs_sd must be positive");
  }
}

void ModelConfig::validate() const {
  if (scaled_derivatives && !use_derivatives) {
    throw InvalidArgument(
        "scaled_derivatives requires use_derivatives (variant not sensible)");
  }
  if (n_obs < 1 || n_dims < 1) {
    throw InvalidArgument("model needs n_obs >= 1 and n_dims >= 1");
  }
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) {
    throw InvalidArgument("jitter must be finite and nonnegative");
  }
  priors.validate();
}

std::string to_string(GpParameterization p) {
  return p == GpParameterization::Whitened ? "whitened" : "marginal";
}

GpParameterization parameterization_from_string(const std::string& name) {
  if (name == "whitened") return GpParameterization::Whitened;
  if (name == "marginal") return GpParameterization::Marginal;
  throw InvalidArgument("unknown GP parameterization '" + name +
                        "' (expected whitened or marginal)");
}

std::string ModelConfig::variant_code() const {
  std::string code(4, '0');
  code[0] = use_derivatives ? '1' : '0';
  code[1] = scaled_derivatives ? '1' : '0';
  code[2] = varying_hyperparams ? '1' : '0';
  code[3] = correlated_outputs ? '1' : '0';
  return code;
}

void ModelConfig::set_variant_code(const std::string& code) {
  if (code.size() != 4 || code.find_first_not_of("01") != std::string::npos) {
    throw InvalidArgument("variant code must be four 0/1 characters, got '" +
                          code + "'");
  }
  use_derivatives = code[0] == '1';
  scaled_derivatives = code[1] == '1';
  varying_hyperparams = code[2] == '1';
  correlated_outputs = code[3] == '1';
  if (scaled_derivatives && !use_derivatives) {
    throw InvalidArgument("variant " + code +
                          " scales derivatives without using them");
  }
}

std::vector<std::string> all_variant_codes() {
  return {"1111", "1110", "1101", "1011", "1100", "1001",
          "1010", "1000", "0011", "0010", "0001", "0000"};
}

void Dataset::validate() const {
  const Eigen::Index n = n_obs();
  if (n < 1) throw InvalidArgument("dataset has no observations");
  if (y.rows() != n || y.cols() < 1) {
    throw InvalidArgument("output matrix y must be N x D with D >= 1");
  }
  if (y_prime && (y_prime->rows() != n || y_prime->cols() != y.cols())) {
    throw InvalidArgument("derivative outputs y_prime must match the shape of y");
  }
  if (x_true && x_true->size() != n) {
    throw InvalidArgument("x_true must have one entry per observation");
  }
  if (!dim_names.empty() && static_cast<Eigen::Index>(dim_names.size()) != y.cols()) {
    throw InvalidArgument("dim_names must have one label per output dimension");
  }
  if (!x_obs.allFinite() || !y.allFinite() || (y_prime && !y_prime->allFinite())) {
    throw InvalidArgument("dataset contains non-finite values");
  }
}

Dataset center_outputs(Dataset data) {
  data.y.rowwise() -= data.y.colwise().mean();
  return data;
}

std::pair<double, double> empirical_prior_scales(const Dataset& data) {
  if (data.n_obs() < 2) {
    throw InvalidArgument("empirical prior scales need at least two observations");
  }
  auto pooled_sd = [](const Eigen::MatrixXd& m) {
    const double mean = m.mean();
    const double ss = (m.array() - mean).square().sum();
    return std::sqrt(ss / static_cast<double>(m.size() - 1));
  };
  const double s_y = pooled_sd(data.y);
  if (!(s_y > 0.0)) {
    throw DegenerateData("outputs y have zero spread; prior scale s_y is 0");
  }
  double s_yp = s_y;
  if (data.y_prime) {
    s_yp = pooled_sd(*data.y_prime);
    if (!(s_yp > 0.0)) {
      throw DegenerateData("derivative outputs have zero spread; s_y' is 0");
    }
  }
  return {s_y, s_yp};
}

ParamLayout::ParamLayout(const ModelConfig& config) {
  config.validate();
  n_ = config.n_obs;
  d_ = config.n_dims;
  m_ = config.use_derivatives ? 2 * n_ : n_;
  h_ = config.varying_hyperparams ? d_ : 1;
  Eigen::Index off = 0;
  x_offset = off;
  off += n_;
  rho_offset = off;
  n_rho = h_;
  off += n_rho;
  alpha_offset = off;
  n_alpha = h_;
  off += n_alpha;
  alpha_prime_offset = off;
  n_alpha_prime = config.scaled_derivatives ? h_ : 0;
  off += n_alpha_prime;
  sigma_offset = off;
  n_sigma = h_;
  off += n_sigma;
  sigma_prime_offset = off;
  n_sigma_prime = config.scaled_derivatives ? h_ : 0;
  off += n_sigma_prime;
  corr_offset = off;
  n_corr = config.correlated_outputs ? transforms::corr_free_size(d_) : 0;
  off += n_corr;
  z_offset = off;
  white_rows_ = config.parameterization == GpParameterization::Whitened ? m_ : 0;
  off += white_rows_ * d_;
  size_ = off;
}

std::vector<std::string> ParamLayout::names() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(size_));
  auto push_block = [&](const std::string& base, Eigen::Index count) {
    for (Eigen::Index i = 0; i < count; ++i) {
      out.push_back(base + "[" + std::to_string(i + 1) + "]");
    }
  };
  push_block("x", n_);
  push_block("log_rho", n_rho);
  push_block("log_alpha", n_alpha);
  push_block("log_alpha_prime", n_alpha_prime);
  push_block("log_sigma", n_sigma);
  push_block("log_sigma_prime", n_sigma_prime);
  push_block("corr_coord", n_corr);
  for (Eigen::Index d = 0; d < d_; ++d) {
    for (Eigen::Index r = 0; r < white_rows_; ++r) {
      out.push_back("z[" + std::to_string(r + 1) + "," + std::to_string(d + 1) + "]");
    }
  }
  return out;
}

ParamVector::ParamVector(const ModelConfig& config)
    : layout_(config), values_(Eigen::VectorXd::Zero(layout_.size())) {}

ParamVector::ParamVector(const ModelConfig& config, Eigen::VectorXd values)
    : layout_(config), values_(std::move(values)) {
  if (values_.size() != layout_.size()) {
    throw InvalidArgument("parameter vector has " + std::to_string(values_.size()) +
                          " entries, layout expects " +
                          std::to_string(layout_.size()));
  }
}

namespace {

struct Hyper {
  double rho, alpha, alpha_prime, sigma, sigma_prime;
};

Hyper hyper_for_dim(const ParamLayout& lay, const Eigen::Ref<const Eigen::VectorXd>& q,
                    Eigen::Index d) {
  const Eigen::Index h = lay.n_rho == 1 ? 0 : d;
  Hyper out{};
  out.rho = std::exp(q[lay.rho_offset + h]);
  out.alpha = std::exp(q[lay.alpha_offset + h]);
  out.sigma = std::exp(q[lay.sigma_offset + h]);
  out.alpha_prime =
      lay.n_alpha_prime > 0 ? std::exp(q[lay.alpha_prime_offset + h]) : out.alpha;
  out.sigma_prime =
      lay.n_sigma_prime > 0 ? std::exp(q[lay.sigma_prime_offset + h]) : out.sigma;
  return out;
}

// Fills the joint covariance for one dimension and records the kernel
// profile of every ordered input pair (row-major p * n + q) for reuse in
// the reverse sweep.
void fill_joint_cov(KernelFamily family, const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Hyper& hp, bool derivs, double jitter, Eigen::MatrixXd& k,
                    std::vector<KernelProfile>* profiles) {
  const Eigen::Index n = x.size();
  const double a2 = hp.alpha * hp.alpha;
  const double aap = hp.alpha * hp.alpha_prime / hp.rho;
  const double ap2 = hp.alpha_prime * hp.alpha_prime / (hp.rho * hp.rho);
  const Eigen::Index m = derivs ? 2 * n : n;
  k.resize(m, m);
  if (profiles != nullptr) profiles->resize(static_cast<std::size_t>(n * n));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const KernelProfile p = kernel_profile(family, (x[i] - x[j]) / hp.rho);
      if (profiles != nullptr) {
        (*profiles)[static_cast<std::size_t>(i * n + j)] = p;
        (*profiles)[static_cast<std::size_t>(j * n + i)] = {p.value, -p.d1, p.d2, -p.d3};
      }
      k(i, j) = k(j, i) = a2 * p.value;
      if (!derivs) continue;
      k(i, n + j) = k(n + j, i) = -aap * p.d1;
      k(j, n + i) = k(n + i, j) = aap * p.d1;
      k(n + i, n + j) = k(n + j, n + i) = -ap2 * p.d2;
    }
  }
  k.diagonal().array() += jitter;
}

// Pulls the adjoint kbar of one joint covariance (symmetric, d lp / d K for
// every entry) back to the latent inputs and the log hyperparameters of
// that dimension. Input gradients are added to gx.
void pull_back_kernel(const Eigen::MatrixXd& kbar, const std::vector<KernelProfile>& prof,
                      const Eigen::Ref<const Eigen::VectorXd>& x, const Hyper& hp,
                      bool derivs, const ParamLayout& lay, Eigen::Index h, double* g) {
  const Eigen::Index n = x.size();
  const double rho = hp.rho;
  const double aa = hp.alpha * hp.alpha;
  const double ab = hp.alpha * hp.alpha_prime;
  const double bb = hp.alpha_prime * hp.alpha_prime;
  double* gx = g + lay.x_offset;
  double g_rho = 0.0, g_alpha = 0.0, g_alpha_p = 0.0;
  for (Eigen::Index p = 0; p < n; ++p) {
    double gx_p = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const KernelProfile& k = prof[static_cast<std::size_t>(p * n + r)];
      const double t = (x[p] - x[r]) / rho;
      const double ku = k.d1 / rho;
      const double w00 = kbar(p, r);
      double s_u = w00 * aa * ku;
      g_rho += w00 * aa * (-t * k.d1);
      g_alpha += 2.0 * w00 * aa * k.value;
      if (derivs) {
        const double kuu = k.d2 / (rho * rho);
        const double kuuu = k.d3 / (rho * rho * rho);
        const double ku_r = -(t * k.d2 + k.d1) / rho;
        const double kuu_r = -(t * k.d3 + 2.0 * k.d2) / (rho * rho);
        const double wx = kbar(n + p, r) - kbar(p, n + r);
        const double w11 = kbar(n + p, n + r);
        s_u += wx * ab * kuu - w11 * bb * kuuu;
        g_rho += wx * ab * ku_r - w11 * bb * kuu_r;
        g_alpha += wx * ab * ku;
        g_alpha_p += wx * ab * ku - 2.0 * w11 * bb * kuu;
      }
      gx_p += s_u;
      gx[r] -= s_u;
    }
    gx[p] += gx_p;
  }
  g[lay.rho_offset + h] += g_rho;
  g[lay.alpha_offset + h] += g_alpha;
  if (lay.n_alpha_prime > 0) {
    g[lay.alpha_prime_offset + h] += g_alpha_p;
  } else {
    g[lay.alpha_offset + h] += g_alpha_p;
  }
}

// Inverse of a matrix from its Cholesky factor. L^-1 is built block column
// by block column so the solves skip the known zeros above the diagonal.
Eigen::MatrixXd inverse_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::MatrixXd& l = llt.matrixLLT();
  const Eigen::Index n = l.rows();
  constexpr Eigen::Index kBlock = 48;
  Eigen::MatrixXd linv = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; j += kBlock) {
    const Eigen::Index w = std::min(kBlock, n - j);
    auto cols = linv.block(j, j, n - j, w);
    cols.topRows(w).setIdentity();
    l.bottomRightCorner(n - j, n - j).triangularView<Eigen::Lower>().solveInPlace(cols);
  }
  Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(n, n);
  inv.selfadjointView<Eigen::Lower>().rankUpdate(linv.transpose());
  inv.triangularView<Eigen::StrictlyUpper>() = inv.transpose();
  return inv;
}

// Gradient slot of log sigma' for hyperparameter index h (tied to sigma
// when the derivative scales are not modelled separately).
Eigen::Index sigma_prime_slot(const ParamLayout& lay, Eigen::Index h) {
  return lay.n_sigma_prime > 0 ? lay.sigma_prime_offset + h : lay.sigma_offset + h;
}

}  // namespace

DgpLvmModel::DgpLvmModel(ModelConfig config, Dataset data)
    : config_(std::move(config)), data_(std::move(data)), layout_(config_) {
  data_.validate();
  if (data_.n_obs() != config_.n_obs || data_.n_dims() != config_.n_dims) {
    throw InvalidArgument("dataset shape does not match the model configuration");
  }
  if (config_.use_derivatives && !data_.y_prime) {
    throw InvalidArgument("model uses derivatives but the dataset has no y_prime");
  }
}

double DgpLvmModel::log_density(const Eigen::Ref<const Eigen::VectorXd>& q) const {
  return evaluate(q, nullptr);
}

double DgpLvmModel::log_density_gradient(const Eigen::Ref<const Eigen::VectorXd>& q,
                                         Eigen::VectorXd& grad) const {
  grad.setZero(layout_.size());
  return evaluate(q, &grad);
}

double DgpLvmModel::evaluate(const Eigen::Ref<const Eigen::VectorXd>& q,
                             Eigen::VectorXd* grad) const {
  const ParamLayout& lay = layout_;
  if (q.size() != lay.size()) {
    throw InvalidArgument("parameter vector size does not match the model layout");
  }
  const Eigen::Index n = lay.n_obs();
  const Eigen::Index dims = lay.n_dims();
  const Eigen::Index m = lay.n_latent_rows();
  const bool derivs = config_.use_derivatives;
  const PriorSpec& pr = config_.priors;
  double* g = grad != nullptr ? grad->data() : nullptr;
  auto gslot = [&](Eigen::Index i) -> double* { return g != nullptr ? g + i : nullptr; };

  double lp = 0.0;

  // Measurement model for the latent inputs.
  const auto x = q.segment(lay.x_offset, n);
  {
    const double inv_var = 1.0 / (pr.x_obs_sd * pr.x_obs_sd);
    const double norm = -kHalfLog2Pi - std::log(pr.x_obs_sd);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = data_.x_obs[i] - x[i];
      lp += norm - 0.5 * r * r * inv_var;
      if (g != nullptr) g[lay.x_offset + i] += r * inv_var;
    }
  }

  // Hyperparameter priors (each already includes its log-Jacobian).
  for (Eigen::Index h = 0; h < lay.n_rho; ++h) {
    lp += inv_gamma_log_scale(q[lay.rho_offset + h], pr.rho_shape, pr.rho_scale,
                              gslot(lay.rho_offset + h));
  }
  for (Eigen::Index h = 0; h < lay.n_alpha; ++h) {
    lp += half_normal_log_scale(q[lay.alpha_offset + h], pr.sd_scale_y,
                                gslot(lay.alpha_offset + h));
  }
  for (Eigen::Index h = 0; h < lay.n_alpha_prime; ++h) {
    lp += half_normal_log_scale(q[lay.alpha_prime_offset + h], pr.sd_scale_yprime,
                                gslot(lay.alpha_prime_offset + h));
  }
  for (Eigen::Index h = 0; h < lay.n_sigma; ++h) {
    lp += half_normal_log_scale(q[lay.sigma_offset + h], pr.sd_scale_y,
                                gslot(lay.sigma_offset + h));
  }
  for (Eigen::Index h = 0; h < lay.n_sigma_prime; ++h) {
    lp += half_normal_log_scale(q[lay.sigma_prime_offset + h], pr.sd_scale_yprime,
                                gslot(lay.sigma_prime_offset + h));
  }

  // Cross-dimension mixing factor.
  Eigen::MatrixXd lc = Eigen::MatrixXd::Identity(dims, dims);
  const auto corr = q.segment(lay.corr_offset, lay.n_corr);
  if (config_.correlated_outputs && g == nullptr) {
    double lj = 0.0;
    lc = transforms::corr_cholesky_constrain(corr, dims, &lj);
    lp += lj + transforms::lkj_corr_cholesky_lpdf(lc, pr.lkj_eta);
  } else if (config_.correlated_outputs) {
    lc = transforms::corr_cholesky_constrain(corr, dims, nullptr);
  }

  Eigen::MatrixXd dlc;
  if (config_.parameterization == GpParameterization::Marginal) {
    lp += marginal_likelihood(q, lc, g, config_.correlated_outputs ? &dlc : nullptr);
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    if (g != nullptr && config_.correlated_outputs) {
      Eigen::Map<Eigen::VectorXd> gcorr(g + lay.corr_offset, lay.n_corr);
      lp += transforms::corr_cholesky_prior_backward(corr, dims, pr.lkj_eta, dlc, gcorr);
    }
    return lp;
  }

  // Whitened latent values.
  const Eigen::Map<const Eigen::MatrixXd> z(q.data() + lay.z_offset, m, dims);
  lp += -0.5 * z.squaredNorm() - kHalfLog2Pi * static_cast<double>(m * dims);
  if (g != nullptr) {
    Eigen::Map<Eigen::MatrixXd>(g + lay.z_offset, m, dims) -= z;
  }

  // Per-dimension GP values through the kernel Cholesky factors.
  std::vector<Eigen::MatrixXd> chol(static_cast<std::size_t>(dims));
  std::vector<std::vector<KernelProfile>> profiles(
      g != nullptr ? static_cast<std::size_t>(dims) : 0);
  std::vector<Hyper> hyper(static_cast<std::size_t>(dims));
  Eigen::MatrixXd f(n, dims);
  Eigen::MatrixXd fp(derivs ? n : 0, dims);
  for (Eigen::Index d = 0; d < dims; ++d) {
    const auto du = static_cast<std::size_t>(d);
    hyper[du] = hyper_for_dim(lay, q, d);
    Eigen::MatrixXd& l = chol[du];
    fill_joint_cov(config_.family, x, hyper[du], derivs, config_.jitter, l,
                   g != nullptr ? &profiles[du] : nullptr);
    if (cholesky_in_place(l) >= 0) {
      return -std::numeric_limits<double>::infinity();
    }
    const Eigen::VectorXd gv = l.triangularView<Eigen::Lower>() * z.col(d);
    f.col(d) = gv.head(n);
    if (derivs) fp.col(d) = gv.tail(n);
  }

  // Likelihood of y (and y') given the mixed values.
  const Eigen::MatrixXd ft = f * lc.transpose();
  Eigen::MatrixXd resid = data_.y - ft;
  Eigen::MatrixXd resid_p;
  if (derivs) resid_p = *data_.y_prime - fp * lc.transpose();
  for (Eigen::Index d = 0; d < dims; ++d) {
    const Hyper& hp = hyper[static_cast<std::size_t>(d)];
    const Eigen::Index h = lay.n_rho == 1 ? 0 : d;
    const double ss = resid.col(d).squaredNorm();
    const double inv_var = 1.0 / (hp.sigma * hp.sigma);
    lp += -static_cast<double>(n) * (kHalfLog2Pi + std::log(hp.sigma)) - 0.5 * ss * inv_var;
    if (g != nullptr) {
      g[lay.sigma_offset + h] += -static_cast<double>(n) + ss * inv_var;
      resid.col(d) *= inv_var;
    }
    if (derivs) {
      const double ssp = resid_p.col(d).squaredNorm();
      const double inv_var_p = 1.0 / (hp.sigma_prime * hp.sigma_prime);
      lp += -static_cast<double>(n) * (kHalfLog2Pi + std::log(hp.sigma_prime)) -
            0.5 * ssp * inv_var_p;
      if (g != nullptr) {
        g[sigma_prime_slot(lay, h)] += -static_cast<double>(n) + ssp * inv_var_p;
        resid_p.col(d) *= inv_var_p;
      }
    }
  }
  if (g == nullptr) return lp;

  // Reverse sweep. resid / resid_p now hold d lp / d f_tilde (and f_tilde').
  const Eigen::MatrixXd df = resid * lc;
  Eigen::MatrixXd dfp;
  if (derivs) dfp = resid_p * lc;
  if (config_.correlated_outputs) {
    dlc = resid.transpose() * f;
    if (derivs) dlc.noalias() += resid_p.transpose() * fp;
    Eigen::Map<Eigen::VectorXd> gcorr(g + lay.corr_offset, lay.n_corr);
    lp += transforms::corr_cholesky_prior_backward(corr, dims, pr.lkj_eta, dlc, gcorr);
  }

  Eigen::VectorXd gbar(m);
  Eigen::MatrixXd w(m, m);
  for (Eigen::Index d = 0; d < dims; ++d) {
    const auto du = static_cast<std::size_t>(d);
    const Eigen::MatrixXd& l = chol[du];
    gbar.head(n) = df.col(d);
    if (derivs) gbar.tail(n) = dfp.col(d);

    // g = L z: z gets L^T gbar; L gets tril(gbar z^T), pulled back to the
    // symmetric kernel adjoint Kbar = L^-T W L^-1.
    const Eigen::VectorXd a = l.triangularView<Eigen::Lower>().transpose() * gbar;
    Eigen::Map<Eigen::MatrixXd>(g + lay.z_offset, m, dims).col(d) += a;
    const auto zd = z.col(d);
    for (Eigen::Index j = 0; j < m; ++j) {
      w(j, j) = 0.5 * a[j] * zd[j];
      for (Eigen::Index i = j + 1; i < m; ++i) {
        w(i, j) = w(j, i) = 0.5 * a[i] * zd[j];
      }
    }
    l.triangularView<Eigen::Lower>().transpose().solveInPlace(w);
    w.transposeInPlace();
    l.triangularView<Eigen::Lower>().transpose().solveInPlace(w);
    pull_back_kernel(w, profiles[du], x, hyper[du], derivs, lay, lay.n_rho == 1 ? 0 : d, g);
  }
  return lp;
}

// Gaussian likelihood of the stacked observations v_d = (y_d, y'_d) with f
// integrated out: Cov(v_d, v_e) = sum_k Lc(d,k) Lc(e,k) K_k + [d == e] S_d,
// S_d the noise variances. Without correlation the blocks decouple. With g,
// adds the gradient through G = (b b^T - Sigma^-1) / 2, b = Sigma^-1 v, and
// returns d lp / d Lc in lc_adjoint when requested.
double DgpLvmModel::marginal_likelihood(const Eigen::Ref<const Eigen::VectorXd>& q,
                                        const Eigen::MatrixXd& lc, double* g,
                                        Eigen::MatrixXd* lc_adjoint) const {
  const ParamLayout& lay = layout_;
  const Eigen::Index n = lay.n_obs();
  const Eigen::Index dims = lay.n_dims();
  const Eigen::Index m = lay.n_latent_rows();
  const bool derivs = config_.use_derivatives;
  const auto x = q.segment(lay.x_offset, n);
  constexpr double kMinusInf = -std::numeric_limits<double>::infinity();

  std::vector<Eigen::MatrixXd> kmat(static_cast<std::size_t>(dims));
  std::vector<std::vector<KernelProfile>> profiles(
      g != nullptr ? static_cast<std::size_t>(dims) : 0);
  std::vector<Hyper> hyper(static_cast<std::size_t>(dims));
  Eigen::MatrixXd noise(m, dims);
  Eigen::MatrixXd v(m, dims);
  for (Eigen::Index d = 0; d < dims; ++d) {
    const auto du = static_cast<std::size_t>(d);
    hyper[du] = hyper_for_dim(lay, q, d);
    fill_joint_cov(config_.family, x, hyper[du], derivs, config_.jitter, kmat[du],
                   g != nullptr ? &profiles[du] : nullptr);
    noise.col(d).head(n).setConstant(hyper[du].sigma * hyper[du].sigma);
    v.col(d).head(n) = data_.y.col(d);
    if (derivs) {
      noise.col(d).tail(n).setConstant(hyper[du].sigma_prime * hyper[du].sigma_prime);
      v.col(d).tail(n) = data_.y_prime->col(d);
    }
  }

  // Solves one Gaussian block; fills beta and, with g, Sigma^-1.
  auto gaussian = [&](const Eigen::MatrixXd& sigma, const Eigen::VectorXd& obs,
                      Eigen::VectorXd& beta, Eigen::MatrixXd* inv) {
    const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) return kMinusInf;
    beta = llt.solve(obs);
    if (inv != nullptr) *inv = inverse_from_llt(llt);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * obs.dot(beta) - 0.5 * logdet -
           kHalfLog2Pi * static_cast<double>(sigma.rows());
  };

  // Noise-variance gradient on the log scale from the diagonal of G.
  auto noise_grad = [&](Eigen::Index d, const Eigen::Ref<const Eigen::VectorXd>& gdiag) {
    const Eigen::Index h = lay.n_rho == 1 ? 0 : d;
    const Hyper& hp = hyper[static_cast<std::size_t>(d)];
    g[lay.sigma_offset + h] += 2.0 * hp.sigma * hp.sigma * gdiag.head(n).sum();
    if (derivs) {
      g[sigma_prime_slot(lay, h)] += 2.0 * hp.sigma_prime * hp.sigma_prime * gdiag.tail(n).sum();
    }
  };

  double lp = 0.0;
  Eigen::VectorXd beta;
  Eigen::MatrixXd inv;
  if (!config_.correlated_outputs) {
    for (Eigen::Index d = 0; d < dims; ++d) {
      const auto du = static_cast<std::size_t>(d);
      Eigen::MatrixXd sigma = kmat[du];
      sigma.diagonal() += noise.col(d);
      const double part = gaussian(sigma, v.col(d), beta, g != nullptr ? &inv : nullptr);
      if (!std::isfinite(part)) return kMinusInf;
      lp += part;
      if (g == nullptr) continue;
      const Eigen::MatrixXd gm = 0.5 * (beta * beta.transpose() - inv);
      noise_grad(d, gm.diagonal());
      pull_back_kernel(gm, profiles[du], x, hyper[du], derivs, lay, lay.n_rho == 1 ? 0 : d, g);
    }
    return lp;
  }

  const Eigen::Index total = m * dims;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(total, total);
  for (Eigen::Index d = 0; d < dims; ++d) {
    for (Eigen::Index e = 0; e <= d; ++e) {
      auto block = sigma.block(d * m, e * m, m, m);
      for (Eigen::Index k = 0; k <= e; ++k) {
        block += (lc(d, k) * lc(e, k)) * kmat[static_cast<std::size_t>(k)];
      }
      if (e < d) sigma.block(e * m, d * m, m, m) = block.transpose();
    }
    sigma.block(d * m, d * m, m, m).diagonal() += noise.col(d);
  }
  const Eigen::VectorXd obs = v.reshaped();
  lp = gaussian(sigma, obs, beta, g != nullptr ? &inv : nullptr);
  if (!std::isfinite(lp) || g == nullptr) return lp;

  Eigen::MatrixXd gm = 0.5 * (beta * beta.transpose() - inv);
  for (Eigen::Index d = 0; d < dims; ++d) noise_grad(d, gm.diagonal().segment(d * m, m));

  // <G_de, K_k> for the Lc adjoint, and Kbar_k = sum_de Lc(d,k) Lc(e,k) G_de.
  Eigen::MatrixXd& dl = *lc_adjoint;
  dl = Eigen::MatrixXd::Zero(dims, dims);
  Eigen::MatrixXd kbar(m, m);
  for (Eigen::Index k = 0; k < dims; ++k) {
    const Eigen::MatrixXd& kk = kmat[static_cast<std::size_t>(k)];
    kbar.setZero();
    for (Eigen::Index d = k; d < dims; ++d) {
      for (Eigen::Index e = k; e < dims; ++e) {
        const auto gde = gm.block(d * m, e * m, m, m);
        kbar += (lc(d, k) * lc(e, k)) * gde;
        dl(d, k) += 2.0 * lc(e, k) * (gde.array() * kk.array()).sum();
      }
    }
    pull_back_kernel(kbar, profiles[static_cast<std::size_t>(k)], x,
                     hyper[static_cast<std::size_t>(k)], derivs, lay,
                     lay.n_rho == 1 ? 0 : k, g);
  }
  return lp;
}

ConstrainedParams constrain(const ModelConfig& config, const ParamVector& p) {
  const ParamLayout& lay = p.layout();
  const Eigen::VectorXd& q = p.values();
  const Eigen::Index n = lay.n_obs();
  const Eigen::Index dims = lay.n_dims();
  ConstrainedParams c;
  c.x = q.segment(lay.x_offset, n);
  c.rho.resize(dims);
  c.alpha.resize(dims);
  c.alpha_prime.resize(dims);
  c.sigma.resize(dims);
  c.sigma_prime.resize(dims);
  for (Eigen::Index d = 0; d < dims; ++d) {
    const Hyper hp = hyper_for_dim(lay, q, d);
    c.rho[d] = hp.rho;
    c.alpha[d] = hp.alpha;
    c.alpha_prime[d] = hp.alpha_prime;
    c.sigma[d] = hp.sigma;
    c.sigma_prime[d] = hp.sigma_prime;
  }
  c.corr_chol = config.correlated_outputs
                    ? transforms::corr_cholesky_constrain(
                          q.segment(lay.corr_offset, lay.n_corr), dims)
                    : Eigen::MatrixXd::Identity(dims, dims);
  const Eigen::Index m = lay.n_white_rows();
  c.z_white = Eigen::Map<const Eigen::MatrixXd>(q.data() + lay.z_offset, m, dims);
  if (config.parameterization == GpParameterization::Marginal) return c;

  Eigen::MatrixXd f(n, dims);
  Eigen::MatrixXd fp(config.use_derivatives ? n : 0, dims);
  for (Eigen::Index d = 0; d < dims; ++d) {
    KernelSpec spec{config.family, c.rho[d], c.alpha[d], c.alpha_prime[d]};
    const JointCovMatrix k =
        build_joint_cov(spec, c.x, config.use_derivatives, config.jitter);
    const Eigen::MatrixXd l = cholesky_psd(k);
    const Eigen::VectorXd gv = l.triangularView<Eigen::Lower>() * c.z_white.col(d);
    f.col(d) = gv.head(n);
    if (config.use_derivatives) fp.col(d) = gv.tail(n);
  }
  c.f_tilde = f * c.corr_chol.transpose();
  if (config.use_derivatives) c.f_tilde_prime = fp * c.corr_chol.transpose();
  return c;
}

ParamVector unconstrain(const ModelConfig& config, const ConstrainedParams& c) {
  ParamVector p(config);
  const ParamLayout& lay = p.layout();
  p.x_latent() = c.x;
  for (Eigen::Index h = 0; h < lay.n_rho; ++h) {
    p.log_rho()[h] = std::log(c.rho[h]);
    p.log_alpha()[h] = std::log(c.alpha[h]);
    p.log_sigma()[h] = std::log(c.sigma[h]);
    if (lay.n_alpha_prime > 0) p.log_alpha_prime()[h] = std::log(c.alpha_prime[h]);
    if (lay.n_sigma_prime > 0) p.log_sigma_prime()[h] = std::log(c.sigma_prime[h]);
  }
  if (lay.n_corr > 0) p.corr_coords() = transforms::corr_cholesky_unconstrain(c.corr_chol);
  if (lay.n_white_rows() > 0) {
    if (c.z_white.rows() != lay.n_white_rows() || c.z_white.cols() != lay.n_dims()) {
      throw InvalidArgument("whitened values do not match the model layout");
    }
    p.z_white() = c.z_white;
  }
  return p;
}

double log_joint(const ModelConfig& config, const Dataset& data, const ParamVector& p) {
  const DgpLvmModel model(config, data);
  return model.log_density(p.values());
}

Eigen::VectorXd log_joint_grad(const ModelConfig& config, const Dataset& data,
                               const ParamVector& p) {
  const DgpLvmModel model(config, data);
  Eigen::VectorXd grad;
  model.log_density_gradient(p.values(), grad);
  return grad;
}

}  // namespace dgplvm
