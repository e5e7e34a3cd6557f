#pragma once

// Method-independent training loop: iterate, evaluate on a fixed cadence,
// keep the best deterministic policy, stop early at a known optimum.

#include "a2d/evaluate.hpp"
#include "a2d/imitation.hpp"
#include "a2d/serialize.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace a2d {

struct IterationStats {
  long long env_steps = 0;
  double beta = 0.0;
  double lambda = 0.0;
  double buffer_kl = 0.0;
  double max_importance_weight = 1.0;
  bool trpo_accepted = false;
  double trpo_kl = 0.0;
  double value_loss = 0.0;
  std::optional<double> q_loss;
  std::vector<std::string> warnings;
};

/// One evaluation point.
struct MetricsRecord {
  int iteration = 0;
  long long env_steps_total = 0;
  double beta = 0.0;
  double lambda = 0.0;
  double stochastic_return_mean = 0.0;
  double stochastic_return_std = 0.0;
  double deterministic_return = 0.0;
  double buffer_kl = 0.0;
  double expert_return_probe = 0.0;
  double max_importance_weight = 1.0;
  bool trpo_accepted = false;
  double trpo_kl = 0.0;
  double value_loss = 0.0;
  std::optional<double> q_loss;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

class Trainer {
 public:
  virtual ~Trainer() = default;

  virtual IterationStats iterate(Rng& rng) = 0;
  /// The policy whose return is reported (the trainee for imitation methods).
  virtual PolicyView policy() const = 0;
  virtual int window() const = 0;
  /// Deterministic return of a privileged expert, when the method has one.
  virtual std::optional<PolicyView> expert() const { return std::nullopt; }

  /// Parameters of the reported policy, for best-checkpoint tracking.
  virtual Vec policy_params() const = 0;
  virtual void set_policy_params(const Vec& p) = 0;

  virtual void save(io::Writer& w) const = 0;
  virtual void load(io::Reader& r) = 0;
};

struct LoopConfig {
  int iterations = 300;
  int eval_every = 5;
  int eval_interactions = 2000;
  /// Early stop once the deterministic return is within `target_tol` of
  /// `target` for `patience` consecutive evaluations.
  std::optional<double> target;
  double target_tol = 1e-6;
  int patience = 10;
};

/// Counters that persist across a checkpoint/resume boundary.
struct LoopState {
  int next_iteration = 0;
  long long env_steps_total = 0;
  int streak = 0;
  double best_deterministic = -1e300;
  Vec best_params;
  long long steps_to_target = -1;
  bool early_stopped = false;
  IterationStats last;
};

struct TrainResult {
  std::vector<MetricsRecord> records;
  LoopState state;
  bool finished = false;  ///< false when stopped by `stop_after`
};

/// Called after every evaluation; return false to pause (for checkpoints).
using RecordSink = std::function<bool(const MetricsRecord&, const LoopState&)>;

/// Runs from `state.next_iteration` to the configured end. Training and
/// evaluation draw from separate streams so evaluation never perturbs
/// training.
TrainResult train_loop(Trainer& trainer, const env::ProcessPair& pair, const LoopConfig& cfg,
                       Rng& train_rng, Rng& eval_rng, LoopState state = {}, const RecordSink& sink = {});

void save_loop_state(io::Writer& w, const LoopState& s);
LoopState load_loop_state(io::Reader& r);

/// Column batches of a trajectory batch: states, beliefs and their successors.
struct BatchTensors {
  Mat S, S_next, B, B_next;
  std::vector<int> actions;
  Vec behavior_logp;
};
BatchTensors tensors(const env::TrajectoryBatch& batch, const env::ProcessPair& pair);

// Component encoders shared by the trainers. Loaders check shapes against
// the already-constructed object and throw CorruptFileError on mismatch.
void save_net(io::Writer& w, const nn::Mlp& net);
void load_net(io::Reader& r, nn::Mlp& net);
void save_adam(io::Writer& w, const nn::Adam& opt);
void load_adam(io::Reader& r, nn::Adam& opt);
void save_buffer(io::Writer& w, const il::ReplayBuffer& buffer);
void load_buffer(io::Reader& r, il::ReplayBuffer& buffer);

}  // namespace a2d
