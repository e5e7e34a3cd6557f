#pragma once

// Asymmetric online imitation: the beta-mixture behavior policy, the
// rolling buffer of expert targets, and the KL projection of the trainee.

#include "a2d/approx.hpp"
#include "a2d/envpair.hpp"

#include <deque>
#include <functional>

namespace a2d::il {

/// Expert action distribution at a state. Receives the state id and its
/// omniscient vector so both tabular and network experts fit.
using ExpertFn = std::function<Vec(env::StateId, const Vec& state_vec)>;
/// Trainee action distribution at a flattened belief window.
using TraineeFn = std::function<Vec(const Vec& belief)>;

ExpertFn expert_from_net(const nn::CategoricalPolicy& net);
TraineeFn trainee_from_net(const nn::CategoricalPolicy& net);

struct BufferEntry {
  Vec s;             ///< state vector
  Vec b;             ///< belief vector
  Vec expert_probs;  ///< expert distribution at insertion time
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity = 5000);

  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  const std::deque<BufferEntry>& entries() const { return entries_; }
  void push(BufferEntry e);
  void clear() { entries_.clear(); }

  Mat beliefs() const;
  Mat states() const;
  Mat targets() const;
  /// Overwrite stored targets with a new expert's distributions (row i of
  /// `probs` is the target of entry i, as a column of the matrix).
  void set_targets(const Mat& probs);

 private:
  int capacity_;
  std::deque<BufferEntry> entries_;
};

enum class BetaMode { kMultiplicative, kImmediateZero };

struct MixtureSchedule {
  double beta0 = 1.0;
  double decay = 0.8;
  BetaMode mode = BetaMode::kMultiplicative;

  /// beta used at iteration n (n = 0 is the first iteration).
  double beta_at(int n) const;
};

/// Per-step branch choice with probability beta for the expert; the
/// recorded log-density is that of the full mixture.
env::ActionChoice mixture_sample(double beta, const Vec& expert_probs, const Vec& trainee_probs, Rng& rng);

/// Behavior policy for rollouts under the mixture.
env::BehaviorPolicy mixture_behavior(const env::ProcessPair& pair, double beta, ExpertFn expert,
                                     TraineeFn trainee);

/// Append one entry per step with the expert distribution at s.
void buffer_update(ReplayBuffer& buffer, const env::TrajectoryBatch& batch, const env::ProcessPair& pair,
                   const ExpertFn& expert);

struct AilStepConfig {
  int epochs = 2;
  int batch_size = 64;
};

/// Minimize mean KL(target || trainee(.|b)) over the buffer with Adam,
/// using the closed-form KL over all actions. Returns the mean minibatch
/// loss per epoch. Throws PreconditionError on an empty buffer.
std::vector<double> ail_step(const ReplayBuffer& buffer, nn::CategoricalPolicy& trainee, nn::Adam& opt,
                             const AilStepConfig& cfg, Rng& rng);

/// Mean KL(target || trainee) over the buffer.
double buffer_kl(const ReplayBuffer& buffer, const nn::CategoricalPolicy& trainee);

/// Mean KL over a fixed matrix batch, with its gradient.
double kl_loss(const nn::CategoricalPolicy& trainee, const Mat& beliefs, const Mat& targets, Vec* grad);

}  // namespace a2d::il
