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

#include "dgplvm/sampler.hpp"

#include <cmath>
#include <limits>

#include "dgplvm/errors.hpp"

namespace dgplvm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxDeltaH = 1000.0;
constexpr int kMaxInitAttempts = 100;

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

template <typename Eval>
bool leapfrog_impl(const Eval& eval, PhasePoint& z, double step,
                   const Eigen::VectorXd& inv_mass) {
  z.p.noalias() += 0.5 * step * z.grad;
  z.q.array() += step * inv_mass.array() * z.p.array();
  z.log_density = eval(z.q, z.grad);
  if (!std::isfinite(z.log_density) || !z.grad.allFinite()) {
    z.log_density = -kInf;
    return false;
  }
  z.p.noalias() += 0.5 * step * z.grad;
  return true;
}

// Dual averaging of log step size toward a target acceptance statistic.
class StepSizeAdaptation {
 public:
  explicit StepSizeAdaptation(double delta) : delta_(delta) {}

  void set_mu(double mu) { mu_ = mu; }
  void restart() {
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }
  double learn(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double c = static_cast<double>(counter_);
    const double eta = 1.0 / (c + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(c) / kGamma;
    const double x_eta = std::pow(c, -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kKappa = 0.75;
  static constexpr double kT0 = 10.0;
  double delta_;
  double mu_ = std::log(10.0);
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
  long counter_ = 0;
};

class WelfordVariance {
 public:
  explicit WelfordVariance(Eigen::Index dim)
      : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)) {}
  void restart() {
    n_ = 0;
    mean_.setZero();
    m2_.setZero();
  }
  void add(const Eigen::VectorXd& q) {
    ++n_;
    const Eigen::VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_.array() += delta.array() * (q - mean_).array();
  }
  long count() const { return n_; }
  Eigen::VectorXd variance() const {
    return n_ > 1 ? Eigen::VectorXd(m2_ / static_cast<double>(n_ - 1))
                  : Eigen::VectorXd::Ones(m2_.size());
  }

 private:
  long n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

// Fast initial buffer, doubling slow windows, fast terminal buffer.
class MetricWindows {
 public:
  MetricWindows(int num_warmup, Eigen::Index dim) : warmup_(num_warmup), est_(dim) {
    if (num_warmup < 20) {
      active_ = false;
      return;
    }
    if (init_buffer_ + base_window_ + term_buffer_ > num_warmup) {
      init_buffer_ = static_cast<int>(0.15 * num_warmup);
      term_buffer_ = static_cast<int>(0.1 * num_warmup);
      base_window_ = num_warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  /// Returns true when a window closed and `inv_metric` was updated.
  bool learn(Eigen::VectorXd& inv_metric, const Eigen::VectorXd& q) {
    if (!active_) return false;
    if (in_window()) est_.add(q);
    if (end_of_window()) {
      compute_next_window();
      const double n = static_cast<double>(est_.count());
      inv_metric = (n / (n + 5.0)) * est_.variance().array() + 1e-3 * (5.0 / (n + 5.0));
      est_.restart();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ &&
           counter_ != warmup_;
  }
  bool end_of_window() const { return counter_ == next_window_ && counter_ != warmup_; }
  void compute_next_window() {
    const int last = warmup_ - term_buffer_ - 1;
    if (next_window_ == last) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != last) {
      const int boundary = next_window_ + 2 * window_size_;
      if (boundary >= warmup_ - term_buffer_) next_window_ = last;
    }
  }

  bool active_ = true;
  int warmup_;
  int init_buffer_ = 75;
  int term_buffer_ = 50;
  int base_window_ = 25;
  int window_size_ = 25;
  int next_window_ = 0;
  int counter_ = 0;
  WelfordVariance est_;
};

struct Transition {
  double accept_stat = 0.0;
  int depth = 0;
  int n_leapfrog = 0;
  bool divergent = false;
};

class NutsKernel {
 public:
  NutsKernel(const DensityTarget& target, Rng& rng, int max_depth)
      : inv_mass(Eigen::VectorXd::Ones(target.dimension())),
        target_(target),
        rng_(rng),
        max_depth_(max_depth) {}

  double step = 1.0;
  Eigen::VectorXd inv_mass;

  double hamiltonian(const PhasePoint& z) const {
    return -z.log_density + 0.5 * (z.p.array().square() * inv_mass.array()).sum();
  }

  void sample_momentum(PhasePoint& z) {
    for (Eigen::Index i = 0; i < z.p.size(); ++i) {
      z.p[i] = normal_(rng_) / std::sqrt(inv_mass[i]);
    }
  }

  bool evolve(PhasePoint& z, double eps) {
    auto eval = [this](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
      return target_.log_density_gradient(q, g);
    };
    return leapfrog_impl(eval, z, eps, inv_mass);
  }

  // Doubles or halves the step until a single leapfrog step crosses an
  // acceptance probability of 0.8.
  void init_stepsize(PhasePoint& z) {
    const PhasePoint z_init = z;
    sample_momentum(z);
    double h0 = hamiltonian(z);
    evolve(z, step);
    double h = hamiltonian(z);
    if (std::isnan(h)) h = kInf;
    double delta_h = h0 - h;
    const int direction = delta_h > std::log(0.8) ? 1 : -1;
    while (true) {
      z = z_init;
      sample_momentum(z);
      h0 = hamiltonian(z);
      evolve(z, step);
      h = hamiltonian(z);
      if (std::isnan(h)) h = kInf;
      delta_h = h0 - h;
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      step = direction == 1 ? 2.0 * step : 0.5 * step;
      if (step > 1e7) {
        throw InitializationError(
            "step size search diverged; posterior is likely improper");
      }
      if (step == 0.0) {
        throw InitializationError("step size search collapsed to zero");
      }
    }
    z = z_init;
  }

  Transition transition(PhasePoint& z) {
    sample_momentum(z);
    PhasePoint z_fwd = z;
    PhasePoint z_bck = z;
    PhasePoint z_sample = z;
    PhasePoint z_propose = z;

    const Eigen::VectorXd p_sharp0 = inv_mass.cwiseProduct(z.p);
    Eigen::VectorXd p_fwd_fwd = z.p, p_sharp_fwd_fwd = p_sharp0;
    Eigen::VectorXd p_fwd_bck = z.p, p_sharp_fwd_bck = p_sharp0;
    Eigen::VectorXd p_bck_fwd = z.p, p_sharp_bck_fwd = p_sharp0;
    Eigen::VectorXd p_bck_bck = z.p, p_sharp_bck_bck = p_sharp0;
    Eigen::VectorXd rho = z.p;

    double log_sum_weight = 0.0;
    const double h0 = hamiltonian(z);
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    int depth = 0;
    divergent_ = false;
    const Eigen::Index dim = z.q.size();

    while (depth < max_depth_) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(dim);
      Eigen::VectorXd rho_bck = Eigen::VectorXd::Zero(dim);
      bool valid_subtree = false;
      double log_sum_weight_subtree = -kInf;

      if (uniform_(rng_) > 0.5) {
        z = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid_subtree = build_tree(depth, z, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd,
                                   rho_fwd, p_fwd_bck, p_fwd_fwd, h0, 1.0, n_leapfrog,
                                   log_sum_weight_subtree, sum_metro_prob);
        z_fwd = z;
      } else {
        z = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid_subtree = build_tree(depth, z, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck,
                                   rho_bck, p_bck_fwd, p_bck_bck, h0, -1.0, n_leapfrog,
                                   log_sum_weight_subtree, sum_metro_prob);
        z_bck = z;
      }
      if (!valid_subtree) break;
      ++depth;

      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform_(rng_) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = compute_criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      Eigen::VectorXd rho_extended = rho_bck + p_fwd_bck;
      persist = persist && compute_criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_extended);
      rho_extended = rho_fwd + p_bck_fwd;
      persist = persist && compute_criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_extended);
      if (!persist) break;
    }

    z = z_sample;
    Transition t;
    t.n_leapfrog = n_leapfrog;
    t.depth = depth;
    t.divergent = divergent_;
    t.accept_stat = n_leapfrog > 0 ? sum_metro_prob / n_leapfrog : 0.0;
    return t;
  }

 private:
  static bool compute_criterion(const Eigen::VectorXd& p_sharp_minus,
                                const Eigen::VectorXd& p_sharp_plus,
                                const Eigen::VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
  }

  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose,
                  Eigen::VectorXd& p_sharp_beg, Eigen::VectorXd& p_sharp_end,
                  Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end,
                  double h0, double sign, int& n_leapfrog, double& log_sum_weight,
                  double& sum_metro_prob) {
    if (depth == 0) {
      evolve(z, sign * step);
      ++n_leapfrog;
      double h = hamiltonian(z);
      if (std::isnan(h)) h = kInf;
      if (h - h0 > kMaxDeltaH) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob += h0 - h > 0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      p_sharp_beg = inv_mass.cwiseProduct(z.p);
      p_sharp_end = p_sharp_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = p_beg;
      return !divergent_;
    }

    const Eigen::Index dim = z.q.size();

    // Initial subtree.
    double log_sum_weight_init = -kInf;
    Eigen::VectorXd p_init_end(dim), p_sharp_init_end(dim);
    Eigen::VectorXd rho_init = Eigen::VectorXd::Zero(dim);
    if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init,
                    p_beg, p_init_end, h0, sign, n_leapfrog, log_sum_weight_init,
                    sum_metro_prob)) {
      return false;
    }

    // Final subtree.
    PhasePoint z_propose_final = z;
    double log_sum_weight_final = -kInf;
    Eigen::VectorXd p_final_beg(dim), p_sharp_final_beg(dim);
    Eigen::VectorXd rho_final = Eigen::VectorXd::Zero(dim);
    if (!build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end,
                    rho_final, p_final_beg, p_end, h0, sign, n_leapfrog,
                    log_sum_weight_final, sum_metro_prob)) {
      return false;
    }

    // Multinomial sample from the right subtree.
    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else if (uniform_(rng_) < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = z_propose_final;
    }

    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;

    bool persist = compute_criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    Eigen::VectorXd rho_extended = rho_init + p_final_beg;
    persist = persist && compute_criterion(p_sharp_beg, p_sharp_final_beg, rho_extended);
    rho_extended = rho_final + p_init_end;
    persist = persist && compute_criterion(p_sharp_init_end, p_sharp_end, rho_extended);
    return persist;
  }

  const DensityTarget& target_;
  Rng& rng_;
  int max_depth_;
  bool divergent_ = false;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace

std::vector<std::string> DensityTarget::output_names() const {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < dimension(); ++i) {
    names.push_back("q[" + std::to_string(i + 1) + "]");
  }
  return names;
}

Eigen::VectorXd DensityTarget::initial_point(Rng& rng) const {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Eigen::VectorXd q(dimension());
  for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = u(rng);
  return q;
}

void SamplerConfig::validate() const {
  if (n_iterations < 1 || n_warmup < 1) {
    throw InvalidArgument("sampler needs positive n_iterations and n_warmup");
  }
  if (n_warmup >= n_iterations) {
    throw InvalidArgument("n_warmup must be smaller than n_iterations");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw InvalidArgument("target_accept must lie in (0, 1)");
  }
  if (max_tree_depth < 1) throw InvalidArgument("max_tree_depth must be positive");
  if (!(init_jitter >= 0.0)) throw InvalidArgument("init_jitter must be nonnegative");
}

bool leapfrog(const GradientFn& fn, PhasePoint& z, double step,
              const Eigen::VectorXd& inv_mass) {
  if (!(step > 0.0)) throw InvalidArgument("leapfrog step must be positive");
  if (inv_mass.size() != z.q.size() || !(inv_mass.array() > 0.0).all()) {
    throw InvalidArgument("inverse mass must be positive and match the position size");
  }
  return leapfrog_impl(fn, z, step, inv_mass);
}

ChainDraws sample(const DensityTarget& target, const SamplerConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const Eigen::Index dim = target.dimension();

  PhasePoint z;
  z.p = Eigen::VectorXd::Zero(dim);
  bool found = false;
  for (int attempt = 0; attempt < kMaxInitAttempts && !found; ++attempt) {
    z.q = target.initial_point(rng);
    z.grad.resize(dim);
    z.log_density = target.log_density_gradient(z.q, z.grad);
    found = std::isfinite(z.log_density) && z.grad.allFinite();
  }
  if (!found) {
    throw InitializationError("no finite log density after " +
                              std::to_string(kMaxInitAttempts) +
                              " initialization attempts");
  }

  NutsKernel kernel(target, rng, config.max_tree_depth);
  kernel.init_stepsize(z);
  StepSizeAdaptation step_adapt(config.target_accept);
  step_adapt.set_mu(std::log(10.0 * kernel.step));
  step_adapt.restart();
  MetricWindows windows(config.n_warmup, dim);

  const int n_keep = config.n_iterations - config.n_warmup;
  ChainDraws out;
  out.seed = config.seed;
  out.param_names = target.output_names();
  out.draws.resize(n_keep, static_cast<Eigen::Index>(out.param_names.size()));
  out.accept_stats.reserve(n_keep);
  out.tree_depths.reserve(n_keep);
  out.n_leapfrog.reserve(n_keep);
  out.divergent.reserve(n_keep);
  out.log_density.reserve(n_keep);

  for (int it = 0; it < config.n_iterations; ++it) {
    const Transition t = kernel.transition(z);
    if (it < config.n_warmup) {
      if (t.divergent) ++out.warmup_divergences;
      kernel.step = step_adapt.learn(t.accept_stat);
      if (windows.learn(kernel.inv_mass, z.q)) {
        kernel.init_stepsize(z);
        step_adapt.set_mu(std::log(10.0 * kernel.step));
        step_adapt.restart();
      }
      if (it == config.n_warmup - 1) kernel.step = step_adapt.final_step();
      continue;
    }
    const int row = it - config.n_warmup;
    out.draws.row(row) = target.output_values(z.q).transpose();
    out.accept_stats.push_back(t.accept_stat);
    out.tree_depths.push_back(t.depth);
    out.n_leapfrog.push_back(t.n_leapfrog);
    out.divergent.push_back(t.divergent);
    out.log_density.push_back(z.log_density);
    if (t.divergent) ++out.divergences;
  }
  out.high_divergence = 2 * out.divergences > n_keep;
  out.step_size = kernel.step;
  out.inv_metric = kernel.inv_mass;
  return out;
}

}  // namespace dgplvm
