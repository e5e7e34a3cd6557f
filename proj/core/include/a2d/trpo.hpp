#pragma once

// Trust-region policy steps and value/Q regression.

#include "a2d/approx.hpp"

#include <vector>

namespace a2d::trpo {

struct TrustRegionConfig {
  double max_kl = 0.01;
  int cg_iters = 10;
  double cg_damping = 0.1;
  double backtrack_ratio = 0.5;
  int max_backtracks = 10;
};

/// One sample per column of X.
struct PolicyBatch {
  Mat X;
  std::vector<int> actions;
  Vec advantages;
  Vec old_logp;        ///< log-density the ratio is taken against
  Vec sample_weights;  ///< optional; empty means uniform
  double entropy_bonus = 0.0;  ///< coefficient of a mean-entropy term in the surrogate

  Eigen::Index size() const { return X.cols(); }
};

/// Surrogate L = sum_t w_t exp(logpi(a_t|x_t) - old_logp_t) A_t / sum_t w_t
/// (+ entropy bonus), and optionally its gradient.
double surrogate_loss(const nn::CategoricalPolicy& policy, const PolicyBatch& batch, Vec* grad = nullptr);

/// Weighted mean over the batch of KL(old || new).
double mean_kl(const Mat& old_probs, const nn::CategoricalPolicy& policy, const Mat& X,
               const Vec& sample_weights = Vec());

struct StepReport {
  bool accepted = false;
  bool zero_direction = false;
  bool cg_fallback = false;  ///< non-positive curvature, plain gradient used
  double kl = 0.0;
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  int backtracks = 0;
};

/// Natural-gradient step: conjugate gradient on damped Fisher-vector
/// products, scaled to the trust-region boundary, then backtracking until
/// the surrogate improves with mean KL <= max_kl. On failure the policy is
/// left unchanged and the report is not accepted.
StepReport trpo_step(nn::CategoricalPolicy& policy, const PolicyBatch& batch, const TrustRegionConfig& cfg);

/// (F + damping I) v at the current parameters, F the Hessian of the mean KL.
Vec fisher_vector_product(const nn::CategoricalPolicy& policy, const Mat& X, const Vec& v, double damping,
                          const Vec& sample_weights = Vec());

struct FitConfig {
  int epochs = 25;
  int minibatches = 32;
};

/// Regress V(x) onto reward-to-go targets.
std::vector<double> fit_value(nn::ValueNet& net, nn::Adam& opt, const Mat& X, const Vec& targets,
                              const FitConfig& cfg, Rng& rng);

/// Regress Q(x, a) onto reward-to-go from (x, a); inputs are x with a
/// one-hot action appended.
std::vector<double> fit_q(nn::ValueNet& net, nn::Adam& opt, const Mat& X, const std::vector<int>& actions,
                          int num_actions, const Vec& targets, const FitConfig& cfg, Rng& rng);

}  // namespace a2d::trpo
