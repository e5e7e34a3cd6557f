#pragma once

// Baselines: trust-region RL on state or belief inputs, and asymmetric
// imitation of a fixed expert.

#include "a2d/estimators.hpp"
#include "a2d/imitation.hpp"
#include "a2d/trainer.hpp"
#include "a2d/trpo.hpp"

namespace a2d {

/// mdp: state policy, state value. pomdp: belief policy, belief value.
/// asym: belief policy, state value.
enum class RlVariant { kMdp, kPomdp, kAsym };

struct RlConfig {
  RlVariant variant = RlVariant::kMdp;
  int window = 1;
  int batch_steps = 2000;
  double lambda = 0.95;
  double entropy_alpha = 1.0;
  bool normalize_advantages = true;
  double surrogate_entropy = 0.0;
  std::vector<int> hidden{64, 64};
  nn::Activation activation = nn::Activation::kTanh;
  trpo::TrustRegionConfig trust_region;
  trpo::FitConfig value_fit;
  nn::AdamConfig value_adam{7e-4};

  void validate() const;
};

class RlTrainer : public Trainer {
 public:
  RlTrainer(const env::ProcessPair& pair, RlConfig cfg, Rng& init_rng);

  IterationStats iterate(Rng& rng) override;
  PolicyView policy() const override { return PolicyView::of(policy_, policy_input()); }
  int window() const override { return cfg_.window; }
  Vec policy_params() const override { return policy_.net().params(); }
  void set_policy_params(const Vec& p) override { policy_.net().set_params(p); }
  void save(io::Writer& w) const override;
  void load(io::Reader& r) override;

  const nn::CategoricalPolicy& policy_net() const { return policy_; }

 private:
  PolicyView::Input policy_input() const {
    return cfg_.variant == RlVariant::kMdp ? PolicyView::Input::kState : PolicyView::Input::kBelief;
  }

  const env::ProcessPair& pair_;
  RlConfig cfg_;
  nn::CategoricalPolicy policy_;
  nn::ValueNet value_;
  nn::Adam value_opt_;
};

struct AilConfig {
  int window = 1;
  int batch_steps = 2000;
  il::MixtureSchedule schedule{1.0, 0.8, il::BetaMode::kImmediateZero};
  int buffer_capacity = 5000;
  std::vector<int> hidden{64, 64};
  nn::Activation activation = nn::Activation::kTanh;
  nn::AdamConfig adam{3e-4};
  il::AilStepConfig step;

  void validate() const;
};

/// DAgger with a fixed privileged expert.
class AilTrainer : public Trainer {
 public:
  AilTrainer(const env::ProcessPair& pair, AilConfig cfg, il::ExpertFn expert, Rng& init_rng);

  IterationStats iterate(Rng& rng) override;
  PolicyView policy() const override { return PolicyView::of(trainee_, PolicyView::Input::kBelief); }
  int window() const override { return cfg_.window; }
  Vec policy_params() const override { return trainee_.net().params(); }
  void set_policy_params(const Vec& p) override { trainee_.net().set_params(p); }
  void save(io::Writer& w) const override;
  void load(io::Reader& r) override;

  const nn::CategoricalPolicy& trainee() const { return trainee_; }

 private:
  const env::ProcessPair& pair_;
  AilConfig cfg_;
  il::ExpertFn expert_;
  nn::CategoricalPolicy trainee_;
  nn::Adam opt_;
  il::ReplayBuffer buffer_;
  int n_ = 0;
};

/// Expert that reads rows of a tabular state policy by state id.
il::ExpertFn tabular_expert(oracle::TabularPolicy policy);

}  // namespace a2d
