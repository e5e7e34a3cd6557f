#include "a2d/estimators.hpp"

#include <Eigen/SparseLU>

#include <cmath>

namespace a2d::est {

bool continues(const env::TrajectoryBatch& batch, std::size_t i) {
  const auto& st = batch.steps[i];
  return !st.done && !st.truncated && i + 1 < batch.steps.size();
}

Vec discounted_returns(const env::TrajectoryBatch& batch, double gamma, const Vec* next_values) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (next_values && next_values->size() != n) throw PreconditionError("next_values has the wrong length");
  Vec G(n);
  double acc = 0.0;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const auto& st = batch.steps[static_cast<std::size_t>(i)];
    double tail = 0.0;
    if (continues(batch, static_cast<std::size_t>(i))) {
      tail = acc;
    } else if (!st.done && next_values) {
      tail = (*next_values)[i];
    }
    acc = st.r + gamma * tail;
    G[i] = acc;
  }
  return G;
}

Vec gae(const env::TrajectoryBatch& batch, const Vec& values, const Vec& next_values, double gamma,
        double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("GAE lambda must lie in [0, 1]");
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (values.size() != n || next_values.size() != n)
    throw PreconditionError("value arrays do not match the batch");
  Vec adv(n);
  double acc = 0.0;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const auto& st = batch.steps[static_cast<std::size_t>(i)];
    const double next_v = st.done ? 0.0 : next_values[i];
    const double delta = st.r + gamma * next_v - values[i];
    acc = delta + (continues(batch, static_cast<std::size_t>(i)) ? gamma * lambda * acc : 0.0);
    adv[i] = acc;
  }
  return adv;
}

Vec importance_weights(const Vec& target_logp, const Vec& behavior_logp, double cap, WeightStats* stats) {
  if (target_logp.size() != behavior_logp.size()) throw PreconditionError("log-prob arrays differ in length");
  Vec w = (target_logp - behavior_logp).array().exp();
  if (cap > 0.0) w = w.cwiseMin(cap);
  if (stats) {
    stats->max_weight = w.size() ? w.maxCoeff() : 0.0;
    stats->floor_hits = (behavior_logp.array() <= -30.0).count();
  }
  return w;
}

Vec shape_with_entropy(const Vec& advantages, const Vec& logp_taken, double alpha) {
  if (alpha < 0.0) throw ConfigError("entropy coefficient must be nonnegative");
  return advantages - alpha * logp_taken;
}

bool normalize_advantages(Vec& adv) {
  if (adv.size() < 2) return false;
  const double mean = adv.mean();
  const double sd = std::sqrt((adv.array() - mean).square().mean());
  adv = (adv.array() - mean) / (sd + 1e-8);
  return true;
}

// ---------------------------------------------------------------------------

oracle::TabularPolicy softmax_policy(oracle::Domain domain, const Mat& logits) {
  Mat p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p = p.array().colwise() / p.rowwise().sum().array();
  return {domain, p};
}

Mat expected_gae(const oracle::Model& model, const Mat& behavior, const Vec& V, double lambda) {
  const int nn = model.num_nodes();
  const int na = model.num_actions();
  const double g = model.gamma();
  // A(n) = sum_a pi(a|n) A(n, a); A(n, a) = E[delta | n, a] + g lambda E[A(n')].
  // Solve for the node averages first, then expand.
  Mat delta(nn, na);
  for (int n = 0; n < nn; ++n) {
    for (int a = 0; a < na; ++a) {
      double d = 0.0;
      if (!model.is_terminal_node(n)) {
        for (const auto& sc : model.successors(n, a)) {
          const double next_v = model.is_terminal_node(sc.node) ? 0.0 : V[sc.node];
          d += sc.prob * (sc.reward + g * next_v);
        }
        d -= V[n];
      }
      delta(n, a) = d;
    }
  }
  std::vector<Eigen::Triplet<double>> trip;
  Vec rhs = Vec::Zero(nn);
  for (int n = 0; n < nn; ++n) {
    trip.emplace_back(n, n, 1.0);
    if (model.is_terminal_node(n)) continue;
    for (int a = 0; a < na; ++a) {
      rhs[n] += behavior(n, a) * delta(n, a);
      for (const auto& sc : model.successors(n, a))
        if (!model.is_terminal_node(sc.node))
          trip.emplace_back(n, sc.node, -g * lambda * behavior(n, a) * sc.prob);
    }
  }
  oracle::SpMat A(nn, nn);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<oracle::SpMat> lu(A);
  const Vec avg = lu.solve(rhs);
  Mat out = delta;
  for (int n = 0; n < nn; ++n) {
    if (model.is_terminal_node(n)) continue;
    for (int a = 0; a < na; ++a)
      for (const auto& sc : model.successors(n, a))
        if (!model.is_terminal_node(sc.node)) out(n, a) += g * lambda * sc.prob * avg[sc.node];
  }
  return out;
}

Mat expert_gradient(const oracle::Model& model, const Mat& expert_logits, const Vec& mass, const Mat& score) {
  const oracle::TabularPolicy pi = softmax_policy(oracle::Domain::kState, expert_logits);
  Mat grad = Mat::Zero(expert_logits.rows(), expert_logits.cols());
  for (int n = 0; n < model.num_nodes(); ++n) {
    if (model.is_terminal_node(n) || mass[n] == 0.0) continue;
    const int s = model.state_of(n);
    const Eigen::RowVectorXd p = pi.probs.row(s);
    const double mean = p.dot(score.row(n));
    // d/dz_k sum_a p_a score_a = p_k (score_k - mean)
    grad.row(s) += mass[n] * p.cwiseProduct(score.row(n) - Eigen::RowVectorXd::Constant(p.size(), mean));
  }
  return grad;
}

Mat nodes_from_beliefs(const oracle::Model& model, const Mat& table) {
  Mat out(model.num_nodes(), table.cols());
  for (int n = 0; n < model.num_nodes(); ++n) out.row(n) = table.row(model.belief_of(n));
  return out;
}

Mat ail_gradient(const oracle::Model& model, const oracle::TabularPolicy& expert, const Mat& trainee_logits,
                 const oracle::OccupancyTable& occ) {
  const oracle::TabularPolicy q = softmax_policy(oracle::Domain::kBelief, trainee_logits);
  Mat grad = Mat::Zero(trainee_logits.rows(), trainee_logits.cols());
  for (int n = 0; n < model.num_nodes(); ++n) {
    if (model.is_terminal_node(n) || occ.mass[n] == 0.0) continue;
    const int b = model.belief_of(n);
    // E_{a ~ expert}[-grad log q(a|b)] = q(.|b) - expert(.|s).
    grad.row(b) += occ.mass[n] * (q.probs.row(b) - expert.probs.row(model.state_of(n)));
  }
  return grad;
}

}  // namespace a2d::est
