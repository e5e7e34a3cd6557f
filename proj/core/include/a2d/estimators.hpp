#pragma once

// Returns, advantages and importance weights over sampled batches, plus
// their exact expectations on enumerable pairs.

#include "a2d/common.hpp"
#include "a2d/envpair.hpp"
#include "a2d/oracle.hpp"

namespace a2d::est {

/// True when step i and step i + 1 belong to the same episode.
bool continues(const env::TrajectoryBatch& batch, std::size_t i);

/// Reward-to-go per step. Terminal steps stop at 0; truncated steps
/// bootstrap from `next_values[i]` when given (V at s_next, b_next), else 0.
Vec discounted_returns(const env::TrajectoryBatch& batch, double gamma,
                       const Vec* next_values = nullptr);

/// GAE advantages. `values[i]` is V at (s_i, b_i) and `next_values[i]` at
/// (s_next, b_next); the latter is ignored on true terminals.
/// Throws ConfigError unless 0 <= lambda <= 1.
Vec gae(const env::TrajectoryBatch& batch, const Vec& values, const Vec& next_values, double gamma,
        double lambda);

struct WeightStats {
  double max_weight = 0.0;
  long long floor_hits = 0;  ///< behavior log-probs at or below the floor
};

/// exp(target_logp - behavior_logp), optionally capped (cap <= 0 means none).
Vec importance_weights(const Vec& target_logp, const Vec& behavior_logp, double cap = 0.0,
                       WeightStats* stats = nullptr);

/// adv - alpha * logp_taken, i.e. a per-sample entropy bonus.
Vec shape_with_entropy(const Vec& advantages, const Vec& logp_taken, double alpha);

/// Zero mean, unit standard deviation (1e-8 guard). Batches with fewer than
/// two entries are returned unchanged and the function returns false.
bool normalize_advantages(Vec& advantages);

/// beta * V_expert(s) + (1 - beta) * V_trainee(b).
struct MixtureValue {
  double beta = 1.0;
  double operator()(double v_expert, double v_trainee) const {
    return beta * v_expert + (1.0 - beta) * v_trainee;
  }
  Vec operator()(const Vec& v_expert, const Vec& v_trainee) const {
    return beta * v_expert + (1.0 - beta) * v_trainee;
  }
};

// ---------------------------------------------------------------------------
// Exact expectations on enumerable pairs, with tabular softmax policies.

/// Row-wise softmax of a logit table.
oracle::TabularPolicy softmax_policy(oracle::Domain domain, const Mat& logits);

/// Expected GAE advantage E[sum_k (gamma lambda)^k delta_{t+k} | node, a]
/// under a node-level behavior policy, with V given per node and zero
/// bootstrap into the terminal node. Indexed [node, action].
Mat expected_gae(const oracle::Model& model, const Mat& behavior, const Vec& node_values,
                 double lambda);

/// sum_n mass(n) sum_a expert(a|s) score(n, a) grad log expert(a|s), with
/// respect to the expert's state logits. `score` is indexed [node, action].
Mat expert_gradient(const oracle::Model& model, const Mat& expert_logits, const Vec& mass,
                    const Mat& score);

/// Belief Q broadcast to nodes: out(n, a) = Q(b(n), a).
Mat nodes_from_beliefs(const oracle::Model& model, const Mat& belief_table);

/// Gradient of F(psi) = sum d(n) KL(expert(.|s) || softmax(psi)(.|b)) with d
/// held fixed, with respect to the trainee's belief logits. Equals the
/// expectation over expert actions of the single-sample -grad log psi.
Mat ail_gradient(const oracle::Model& model, const oracle::TabularPolicy& expert,
                 const Mat& trainee_logits, const oracle::OccupancyTable& occ);

}  // namespace a2d::est
