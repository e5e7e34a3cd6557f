#include "a2d/approx.hpp"

#include <algorithm>
#include <cmath>

namespace a2d::nn {

Adam::Adam(int num_params, AdamConfig cfg)
    : cfg_(cfg), m_(Vec::Zero(num_params)), v_(Vec::Zero(num_params)) {}

bool Adam::step(Vec& params, const Vec& grad) {
  if (grad.size() != params.size() || params.size() != m_.size())
    throw PreconditionError("Adam: parameter and gradient sizes differ");
  if (!grad.allFinite()) {
    ++rejected_;
    return false;
  }
  const Vec g = grad + cfg_.l2 * params;
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * g;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  params.array() -= cfg_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
  return true;
}

void Adam::restore(const Vec& m, const Vec& v, long long t, long long rejected) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw PreconditionError("Adam state size mismatch");
  m_ = m;
  v_ = v;
  t_ = t;
  rejected_ = rejected;
}

std::vector<double> fit_regression(ValueNet& net, Adam& opt, const Mat& X, const Vec& y, int epochs,
                                   int minibatches, Rng& rng) {
  const int n = static_cast<int>(X.cols());
  if (n == 0 || y.size() != n) throw PreconditionError("regression needs a nonempty, consistent dataset");
  minibatches = std::clamp(minibatches, 1, n);
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(std::max(epochs, 0)));
  for (int e = 0; e < epochs; ++e) {
    const std::vector<int> order = permutation(n, rng);
    double loss_sum = 0.0;
    for (int k = 0; k < minibatches; ++k) {
      const int lo = static_cast<int>(static_cast<long long>(n) * k / minibatches);
      const int hi = static_cast<int>(static_cast<long long>(n) * (k + 1) / minibatches);
      Mat xb(X.rows(), hi - lo);
      Vec yb(hi - lo);
      for (int i = lo; i < hi; ++i) {
        xb.col(i - lo) = X.col(order[i]);
        yb[i - lo] = y[order[i]];
      }
      Vec grad;
      loss_sum += net.mse(xb, yb, &grad);
      opt.step(net.net().params(), grad);
    }
    trace.push_back(loss_sum / minibatches);
  }
  return trace;
}

}  // namespace a2d::nn
