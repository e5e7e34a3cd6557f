#pragma once

// Small fully connected networks with hand-written gradients.
//
// Batches are column-major: an input batch is a (dim x N) matrix with one
// sample per column. All parameters of a network live in one flat vector so
// optimizers and trust-region code can treat them as a single point.

#include "a2d/common.hpp"

#include <string>
#include <vector>

namespace a2d::nn {

enum class Activation { kTanh, kRelu };

Activation parse_activation(const std::string& name);
std::string to_string(Activation act);

inline constexpr double kLogProbFloor = -30.0;

class Mlp {
 public:
  struct Cache {
    std::vector<Mat> pre;   ///< pre-activations per layer
    std::vector<Mat> post;  ///< post[0] = input, post[i + 1] = act(pre[i])
  };

  Mlp() = default;
  /// Orthogonal init (gain 1 on hidden layers, `out_scale` on the output
  /// layer), zero biases.
  Mlp(int in_dim, int out_dim, const std::vector<int>& hidden, Activation act, double out_scale,
      Rng& rng);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  Activation activation() const { return act_; }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }

  const Vec& params() const { return params_; }
  Vec& params() { return params_; }
  void set_params(const Vec& p);
  int num_params() const { return static_cast<int>(params_.size()); }

  /// Output batch (out_dim x N). Fills `cache` when given.
  Mat forward(const Mat& X, Cache* cache = nullptr) const;
  /// Gradient of sum_j <dOut_j, out_j> with respect to params.
  Vec backward(const Cache& cache, const Mat& dOut) const;
  /// Directional derivative of the outputs along a parameter direction.
  Mat jvp(const Cache& cache, const Vec& direction) const;

 private:
  Eigen::Map<const Mat> weight(const Vec& p, int layer) const;
  Eigen::Map<const Vec> bias(const Vec& p, int layer) const;
  Eigen::Map<Mat> weight_mut(Vec& p, int layer) const;
  Eigen::Map<Vec> bias_mut(Vec& p, int layer) const;
  Mat act(const Mat& z) const;
  Mat act_grad(const Mat& z, const Mat& a) const;

  int in_dim_ = 0;
  int out_dim_ = 0;
  std::vector<int> hidden_;
  std::vector<int> sizes_;
  std::vector<int> offsets_;  // start of W for each layer; b follows W
  Activation act_ = Activation::kTanh;
  Vec params_;
};

// ---------------------------------------------------------------------------
// Categorical policies

struct Distribution {
  Mat probs;  ///< (A x N)
  Mat logp;   ///< (A x N), floored at kLogProbFloor
};

/// Softmax over the columns of a logit batch, max-subtracted.
Distribution softmax(const Mat& logits);

class CategoricalPolicy {
 public:
  CategoricalPolicy() = default;
  CategoricalPolicy(int in_dim, int num_actions, const std::vector<int>& hidden, Activation act,
                    Rng& rng);

  int in_dim() const { return net_.in_dim(); }
  int num_actions() const { return net_.out_dim(); }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  /// Throws PreconditionError on wrong dimension or non-finite input.
  Distribution forward(const Mat& X, Mlp::Cache* cache = nullptr) const;
  Vec probs(const Vec& x) const;

  /// Gradient of sum_i c_i log pi(a_i | x_i).
  Vec grad_log_prob(const Mat& X, const std::vector<int>& actions, const Vec& coeff) const;
  /// Entropy per column and the gradient of sum_i c_i H(x_i).
  Vec entropy(const Mat& X) const;
  Vec grad_entropy(const Mat& X, const Vec& coeff) const;

 private:
  Mlp net_;
};

/// Row-wise KL(p || q) for column batches of probabilities.
Vec kl_columns(const Mat& p, const Mat& logp, const Mat& logq);

/// Scalar-output regressor used for V(x) and Q(x, a).
class ValueNet {
 public:
  ValueNet() = default;
  ValueNet(int in_dim, const std::vector<int>& hidden, Activation act, Rng& rng);

  int in_dim() const { return net_.in_dim(); }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  Vec predict(const Mat& X) const;
  double predict(const Vec& x) const;
  /// Mean squared error and its gradient.
  double mse(const Mat& X, const Vec& y, Vec* grad) const;

 private:
  Mlp net_;
};

/// Belief (or state) vector with a one-hot action appended, per column.
Mat append_one_hot(const Mat& X, const std::vector<int>& actions, int num_actions);

// ---------------------------------------------------------------------------
// Optimization

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 0.001;
};

class Adam {
 public:
  Adam() = default;
  Adam(int num_params, AdamConfig cfg);

  /// Descent step on `params`; the L2 term l2 * params is added to the
  /// gradient first. Returns false (and leaves everything untouched) when
  /// the gradient has a non-finite entry.
  bool step(Vec& params, const Vec& grad);

  const AdamConfig& config() const { return cfg_; }
  AdamConfig& config() { return cfg_; }
  long long steps() const { return t_; }
  long long rejected() const { return rejected_; }
  const Vec& m() const { return m_; }
  const Vec& v() const { return v_; }
  void restore(const Vec& m, const Vec& v, long long t, long long rejected);

 private:
  AdamConfig cfg_;
  Vec m_;
  Vec v_;
  long long t_ = 0;
  long long rejected_ = 0;
};

/// Fisher-Yates permutation drawn with uniform01, identical on every
/// standard library.
std::vector<int> permutation(int n, Rng& rng);

/// Standard normal draw (Box-Muller on uniform01).
double normal01(Rng& rng);

/// Minibatch MSE regression. Each epoch shuffles and splits the data into
/// `minibatches` nearly equal parts. Returns the mean minibatch loss per
/// epoch. Throws PreconditionError on an empty dataset.
std::vector<double> fit_regression(ValueNet& net, Adam& opt, const Mat& X, const Vec& y, int epochs,
                                   int minibatches, Rng& rng);

}  // namespace a2d::nn
