#pragma once

// Adaptive asymmetric DAgger: an importance-weighted trust-region update of
// a state-conditioned expert toward higher trainee return, alternated with
// projection of the expert onto a belief-conditioned trainee.

#include "a2d/estimators.hpp"
#include "a2d/imitation.hpp"
#include "a2d/trainer.hpp"
#include "a2d/trpo.hpp"

namespace a2d {

enum class AdvantageSource { kGae, kQ };

/// Optional linear decay of lambda once the buffer KL stops improving.
struct LambdaAnneal {
  bool enabled = false;
  int plateau_iterations = 20;   ///< iterations without relative KL improvement
  double min_improvement = 0.01;
  double step = 0.05;
  double floor = 0.0;
};

struct A2dConfig {
  int window = 1;
  int batch_steps = 2000;
  double lambda = 0.95;
  double entropy_alpha = 1.0;
  bool normalize_advantages = true;
  AdvantageSource advantage = AdvantageSource::kGae;
  il::MixtureSchedule schedule;
  int buffer_capacity = 5000;
  bool refresh_buffer_targets = true;
  double weight_cap = 0.0;  ///< <= 0: uncapped importance weights
  double surrogate_entropy = 0.0;

  std::vector<int> hidden{64, 64};
  nn::Activation activation = nn::Activation::kTanh;
  trpo::TrustRegionConfig trust_region;
  trpo::FitConfig value_fit;
  nn::AdamConfig value_adam{7e-4};
  nn::AdamConfig q_adam{3e-4};
  nn::AdamConfig ail_adam{3e-4};
  il::AilStepConfig ail;
  LambdaAnneal lambda_anneal;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

/// Switch the advantage source; returns warnings (the Q form assumes the
/// trainee alone is collecting data).
std::vector<std::string> set_advantage_source(A2dConfig& cfg, AdvantageSource source);

struct A2dState {
  nn::CategoricalPolicy expert;   ///< input: state vector
  nn::CategoricalPolicy trainee;  ///< input: belief vector
  nn::ValueNet expert_value;      ///< V(s)
  nn::ValueNet trainee_value;     ///< V(b)
  std::optional<nn::ValueNet> q;  ///< Q(b, a)
  nn::Adam expert_value_opt;
  nn::Adam trainee_value_opt;
  std::optional<nn::Adam> q_opt;
  nn::Adam trainee_opt;
  il::ReplayBuffer buffer;
  int n = 0;
  double lambda = 0.95;
  // Plateau detector for the lambda anneal.
  double best_kl = 1e300;
  int since_best = 0;

  /// Fresh networks; all draws come from `rng`.
  static A2dState init(const env::ProcessPair& pair, const A2dConfig& cfg, Rng& rng);
};

/// One outer iteration: anneal beta, collect a batch under the mixture,
/// grow the buffer, form advantages on the mixture value (or Q - V), shape
/// with the expert's entropy, take an importance-weighted trust-region step
/// on the expert, refit the value functions on reward-to-go, and project
/// the expert onto the trainee.
IterationStats a2d_iteration(A2dState& st, const env::ProcessPair& pair, const A2dConfig& cfg, Rng& rng);

class A2dTrainer : public Trainer {
 public:
  A2dTrainer(const env::ProcessPair& pair, A2dConfig cfg, Rng& init_rng);

  IterationStats iterate(Rng& rng) override { return a2d_iteration(state_, pair_, cfg_, rng); }
  PolicyView policy() const override { return PolicyView::of(state_.trainee, PolicyView::Input::kBelief); }
  std::optional<PolicyView> expert() const override {
    return PolicyView::of(state_.expert, PolicyView::Input::kState);
  }
  int window() const override { return cfg_.window; }
  Vec policy_params() const override { return state_.trainee.net().params(); }
  void set_policy_params(const Vec& p) override { state_.trainee.net().set_params(p); }
  void save(io::Writer& w) const override;
  void load(io::Reader& r) override;

  const A2dState& state() const { return state_; }
  A2dState& state() { return state_; }
  const A2dConfig& config() const { return cfg_; }

 private:
  const env::ProcessPair& pair_;
  A2dConfig cfg_;
  A2dState state_;
};

struct A2dRun {
  nn::CategoricalPolicy trainee;  ///< best deterministic trainee seen
  nn::CategoricalPolicy expert;   ///< final expert
  TrainResult result;
};

A2dRun a2d_train(const env::ProcessPair& pair, const A2dConfig& cfg, const LoopConfig& loop, Rng& rng);

}  // namespace a2d
