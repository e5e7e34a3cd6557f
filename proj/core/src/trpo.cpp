#include "a2d/trpo.hpp"

#include <cmath>
#include <functional>

namespace a2d::trpo {

namespace {

Vec normalized_weights(const Vec& w, Eigen::Index n) {
  if (w.size() == 0) return Vec::Constant(n, 1.0 / static_cast<double>(n));
  if (w.size() != n) throw PreconditionError("sample weights do not match the batch");
  const double total = w.sum();
  if (!(total > 0.0)) throw PreconditionError("sample weights must have positive total");
  return w / total;
}

}  // namespace

double surrogate_loss(const nn::CategoricalPolicy& policy, const PolicyBatch& batch, Vec* grad) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw PreconditionError("empty policy batch");
  if (static_cast<Eigen::Index>(batch.actions.size()) != n || batch.advantages.size() != n ||
      batch.old_logp.size() != n)
    throw PreconditionError("policy batch arrays differ in length");
  const Vec w = normalized_weights(batch.sample_weights, n);

  nn::Mlp::Cache cache;
  const nn::Distribution d = policy.forward(batch.X, &cache);
  Vec ratio(n);
  for (Eigen::Index i = 0; i < n; ++i)
    ratio[i] = std::exp(d.logp(batch.actions[static_cast<std::size_t>(i)], i) - batch.old_logp[i]);
  double loss = w.dot(ratio.cwiseProduct(batch.advantages));
  const Eigen::RowVectorXd H = -(d.probs.array() * d.logp.array()).colwise().sum();
  if (batch.entropy_bonus != 0.0) loss += batch.entropy_bonus * H.dot(w);
  if (!std::isfinite(loss)) throw PreconditionError("surrogate is not finite");

  if (grad) {
    // ratio * A * (e_a - p), plus c * (-p_k (log p_k + H)) for the bonus.
    Mat dz = -d.probs;
    for (Eigen::Index i = 0; i < n; ++i) {
      dz(batch.actions[static_cast<std::size_t>(i)], i) += 1.0;
      dz.col(i) *= w[i] * ratio[i] * batch.advantages[i];
    }
    if (batch.entropy_bonus != 0.0) {
      const Mat dh = -(d.probs.array() * (d.logp.rowwise() + H).array()).matrix();
      for (Eigen::Index i = 0; i < n; ++i) dz.col(i) += batch.entropy_bonus * w[i] * dh.col(i);
    }
    *grad = policy.net().backward(cache, dz);
  }
  return loss;
}

double mean_kl(const Mat& old_probs, const nn::CategoricalPolicy& policy, const Mat& X, const Vec& sample_weights) {
  const Vec w = normalized_weights(sample_weights, X.cols());
  const nn::Distribution d = policy.forward(X);
  const Mat old_logp = old_probs.array().max(1e-300).log().max(nn::kLogProbFloor).matrix();
  return w.dot(nn::kl_columns(old_probs, old_logp, d.logp));
}

namespace {

Vec fvp_at(const nn::CategoricalPolicy& policy, const nn::Mlp::Cache& cache, const Mat& probs, const Vec& w,
           const Vec& v, double damping) {
  const Mat jv = policy.net().jvp(cache, v);
  // Softmax KL Hessian in logit space: diag(p) - p p^T.
  const Eigen::RowVectorXd pjv = (probs.array() * jv.array()).colwise().sum();
  Mat u = probs.cwiseProduct(jv) - (probs.array().rowwise() * pjv.array()).matrix();
  u.array().rowwise() *= w.transpose().array();
  return policy.net().backward(cache, u) + damping * v;
}

}  // namespace

Vec fisher_vector_product(const nn::CategoricalPolicy& policy, const Mat& X, const Vec& v, double damping,
                          const Vec& sample_weights) {
  const Vec w = normalized_weights(sample_weights, X.cols());
  nn::Mlp::Cache cache;
  const nn::Distribution d = policy.forward(X, &cache);
  return fvp_at(policy, cache, d.probs, w, v, damping);
}

namespace {

Vec conjugate_gradient(const std::function<Vec(const Vec&)>& Av, const Vec& b, int iters) {
  Vec x = Vec::Zero(b.size());
  Vec r = b;
  Vec p = r;
  double rr = r.squaredNorm();
  for (int k = 0; k < iters && rr > 1e-20; ++k) {
    const Vec Ap = Av(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) break;
    const double alpha = rr / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return x;
}

}  // namespace

StepReport trpo_step(nn::CategoricalPolicy& policy, const PolicyBatch& batch, const TrustRegionConfig& cfg) {
  if (!(cfg.max_kl > 0.0)) throw ConfigError("max_kl must be positive");
  StepReport rep;
  Vec g;
  rep.surrogate_before = surrogate_loss(policy, batch, &g);
  rep.surrogate_after = rep.surrogate_before;
  if (g.norm() < 1e-12) {
    rep.zero_direction = true;
    return rep;
  }

  nn::Mlp::Cache cache;
  const Mat old_probs = policy.forward(batch.X, &cache).probs;
  const Vec w = normalized_weights(batch.sample_weights, batch.size());
  auto Fv = [&](const Vec& v) { return fvp_at(policy, cache, old_probs, w, v, cfg.cg_damping); };
  Vec x = conjugate_gradient(Fv, g, cfg.cg_iters);
  double xFx = x.dot(Fv(x));
  if (!(xFx > 0.0) || !x.allFinite()) {
    rep.cg_fallback = true;
    x = g;
    xFx = x.dot(Fv(x));
    if (!(xFx > 0.0)) xFx = x.squaredNorm();
  }
  const Vec full = std::sqrt(2.0 * cfg.max_kl / xFx) * x;

  const Vec start = policy.net().params();
  double frac = 1.0;
  for (int k = 0; k <= cfg.max_backtracks; ++k, frac *= cfg.backtrack_ratio) {
    policy.net().set_params(start + frac * full);
    const double kl = mean_kl(old_probs, policy, batch.X, batch.sample_weights);
    const double after = surrogate_loss(policy, batch);
    if (std::isfinite(after) && kl <= cfg.max_kl && after > rep.surrogate_before) {
      rep.accepted = true;
      rep.kl = kl;
      rep.surrogate_after = after;
      rep.backtracks = k;
      return rep;
    }
  }
  policy.net().set_params(start);
  rep.backtracks = cfg.max_backtracks;
  return rep;
}

std::vector<double> fit_value(nn::ValueNet& net, nn::Adam& opt, const Mat& X, const Vec& targets,
                              const FitConfig& cfg, Rng& rng) {
  return nn::fit_regression(net, opt, X, targets, cfg.epochs, cfg.minibatches, rng);
}

std::vector<double> fit_q(nn::ValueNet& net, nn::Adam& opt, const Mat& X, const std::vector<int>& actions,
                          int num_actions, const Vec& targets, const FitConfig& cfg, Rng& rng) {
  return nn::fit_regression(net, opt, nn::append_one_hot(X, actions, num_actions), targets, cfg.epochs,
                            cfg.minibatches, rng);
}

}  // namespace a2d::trpo
