#include "a2d/approx.hpp"

#include <cmath>

namespace a2d::nn {

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation act) { return act == Activation::kTanh ? "tanh" : "relu"; }

double normal01(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::vector<int> permutation(int n, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(uniform01(rng) * (i + 1));
    std::swap(idx[i], idx[std::min(j, i)]);
  }
  return idx;
}

namespace {

// Orthogonal (rows x cols) matrix: QR of a Gaussian draw, sign-corrected.
Mat orthogonal(int rows, int cols, double gain, Rng& rng) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Mat g(big, small);
  for (int j = 0; j < small; ++j)
    for (int i = 0; i < big; ++i) g(i, j) = normal01(rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(big, small);
  const Mat r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (int j = 0; j < small; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  Mat w = rows >= cols ? q : Mat(q.transpose());
  return gain * w;
}

}  // namespace

Mlp::Mlp(int in_dim, int out_dim, const std::vector<int>& hidden, Activation act, double out_scale,
         Rng& rng)
    : in_dim_(in_dim), out_dim_(out_dim), hidden_(hidden), act_(act) {
  if (in_dim < 1 || out_dim < 1) throw ConfigError("network dimensions must be positive");
  sizes_.push_back(in_dim);
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be positive");
    sizes_.push_back(h);
  }
  sizes_.push_back(out_dim);
  int total = 0;
  for (int l = 0; l < num_layers(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  params_ = Vec::Zero(total);
  for (int l = 0; l < num_layers(); ++l) {
    const double gain = l + 1 == num_layers() ? out_scale : 1.0;
    weight_mut(params_, l) = orthogonal(sizes_[l + 1], sizes_[l], gain, rng);
  }
}

void Mlp::set_params(const Vec& p) {
  if (p.size() != params_.size()) throw PreconditionError("parameter vector has the wrong length");
  params_ = p;
}

Eigen::Map<const Mat> Mlp::weight(const Vec& p, int l) const {
  return {p.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Vec> Mlp::bias(const Vec& p, int l) const {
  return {p.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
}
Eigen::Map<Mat> Mlp::weight_mut(Vec& p, int l) const {
  return {p.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<Vec> Mlp::bias_mut(Vec& p, int l) const {
  return {p.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
}

Mat Mlp::act(const Mat& z) const {
  if (act_ == Activation::kTanh) {
    // Eigen only vectorizes tanh for float; build it from the vectorized exp.
    const Eigen::ArrayXXd t = (-2.0 * z.array().abs()).exp();
    return ((1.0 - t) / (1.0 + t) * z.array().sign()).matrix();
  }
  return z.cwiseMax(0.0);
}

Mat Mlp::act_grad(const Mat& z, const Mat& a) const {
  if (act_ == Activation::kTanh) return (1.0 - a.array().square()).matrix();
  return (z.array() > 0.0).cast<double>().matrix();
}

Mat Mlp::forward(const Mat& X, Cache* cache) const {
  if (X.rows() != in_dim_) throw PreconditionError("input dimension does not match the network");
  if (cache) {
    cache->pre.clear();
    cache->post.clear();
    cache->post.push_back(X);
  }
  Mat h = X;
  for (int l = 0; l < num_layers(); ++l) {
    Mat z = weight(params_, l) * h;
    z.colwise() += bias(params_, l);
    const bool last = l + 1 == num_layers();
    if (cache) cache->pre.push_back(z);
    h = last ? z : act(z);
    if (cache && !last) cache->post.push_back(h);
  }
  return h;
}

Vec Mlp::backward(const Cache& cache, const Mat& dOut) const {
  Vec grad = Vec::Zero(params_.size());
  Mat delta = dOut;
  for (int l = num_layers() - 1; l >= 0; --l) {
    weight_mut(grad, l) = delta * cache.post[l].transpose();
    bias_mut(grad, l) = delta.rowwise().sum();
    if (l > 0) {
      Mat up = weight(params_, l).transpose() * delta;
      delta = up.cwiseProduct(act_grad(cache.pre[l - 1], cache.post[l]));
    }
  }
  return grad;
}

Mat Mlp::jvp(const Cache& cache, const Vec& v) const {
  if (v.size() != params_.size()) throw PreconditionError("direction has the wrong length");
  // Forward-mode: carry the tangent of each layer's output.
  Mat dh = Mat::Zero(in_dim_, cache.post[0].cols());
  for (int l = 0; l < num_layers(); ++l) {
    Mat dz = weight(v, l) * cache.post[l];
    dz.colwise() += bias(v, l);
    if (l > 0) dz += weight(params_, l) * dh;
    if (l + 1 == num_layers()) return dz;
    dh = dz.cwiseProduct(act_grad(cache.pre[l], cache.post[l + 1]));
  }
  return dh;
}

// ---------------------------------------------------------------------------

Distribution softmax(const Mat& logits) {
  Distribution d;
  Mat shifted = logits.rowwise() - logits.colwise().maxCoeff();
  const Eigen::RowVectorXd lse = shifted.array().exp().colwise().sum().log();
  d.logp = shifted.rowwise() - lse;
  d.probs = d.logp.array().exp();
  d.logp = d.logp.cwiseMax(kLogProbFloor);
  return d;
}

Vec kl_columns(const Mat& p, const Mat& logp, const Mat& logq) {
  return (p.array() * (logp - logq).array()).colwise().sum().transpose();
}

CategoricalPolicy::CategoricalPolicy(int in_dim, int num_actions, const std::vector<int>& hidden,
                                     Activation act, Rng& rng)
    : net_(in_dim, num_actions, hidden, act, 0.01, rng) {}

Distribution CategoricalPolicy::forward(const Mat& X, Mlp::Cache* cache) const {
  if (!X.allFinite()) throw PreconditionError("policy input is not finite");
  return softmax(net_.forward(X, cache));
}

Vec CategoricalPolicy::probs(const Vec& x) const { return forward(x).probs.col(0); }

Vec CategoricalPolicy::grad_log_prob(const Mat& X, const std::vector<int>& actions,
                                     const Vec& coeff) const {
  Mlp::Cache cache;
  const Distribution d = forward(X, &cache);
  Mat dz = -d.probs;
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    dz(actions[static_cast<std::size_t>(i)], i) += 1.0;
    dz.col(i) *= coeff[i];
  }
  return net_.backward(cache, dz);
}

Vec CategoricalPolicy::entropy(const Mat& X) const {
  const Distribution d = forward(X);
  return -(d.probs.array() * d.logp.array()).colwise().sum().transpose();
}

Vec CategoricalPolicy::grad_entropy(const Mat& X, const Vec& coeff) const {
  Mlp::Cache cache;
  const Distribution d = forward(X, &cache);
  const Eigen::RowVectorXd H = -(d.probs.array() * d.logp.array()).colwise().sum();
  // dH/dz_k = -p_k (log p_k + H)
  Mat dz = -(d.probs.array() * (d.logp.rowwise() + H).array()).matrix();
  for (Eigen::Index i = 0; i < X.cols(); ++i) dz.col(i) *= coeff[i];
  return net_.backward(cache, dz);
}

// ---------------------------------------------------------------------------

ValueNet::ValueNet(int in_dim, const std::vector<int>& hidden, Activation act, Rng& rng)
    : net_(in_dim, 1, hidden, act, 1.0, rng) {}

Vec ValueNet::predict(const Mat& X) const { return net_.forward(X).row(0).transpose(); }

double ValueNet::predict(const Vec& x) const { return net_.forward(x)(0, 0); }

double ValueNet::mse(const Mat& X, const Vec& y, Vec* grad) const {
  Mlp::Cache cache;
  const Mat out = net_.forward(X, &cache);
  const Eigen::RowVectorXd err = out.row(0) - y.transpose();
  const double n = static_cast<double>(X.cols());
  if (grad) *grad = net_.backward(cache, (2.0 / n) * err);
  return err.squaredNorm() / n;
}

Mat append_one_hot(const Mat& X, const std::vector<int>& actions, int num_actions) {
  Mat out = Mat::Zero(X.rows() + num_actions, X.cols());
  out.topRows(X.rows()) = X;
  for (Eigen::Index i = 0; i < X.cols(); ++i) out(X.rows() + actions[static_cast<std::size_t>(i)], i) = 1.0;
  return out;
}

}  // namespace a2d::nn
