#include "a2d/rl.hpp"

#include <cmath>

namespace a2d {

void RlConfig::validate() const {
  if (window < 1) throw ConfigError("window must be at least 1");
  if (batch_steps < 2) throw ConfigError("batch_steps must be at least 2");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (!(entropy_alpha >= 0.0)) throw ConfigError("entropy_alpha must be non-negative");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden layer widths must be positive");
  if (!(trust_region.max_kl > 0.0)) throw ConfigError("max_kl must be positive");
  if (!(value_adam.lr > 0.0)) throw ConfigError("learning rates must be positive");
}

namespace {

int belief_dim(const env::ProcessPair& pair, int window) {
  return env::BeliefWindow::flat_dim(window, pair.obs_dim(), pair.num_actions());
}

}  // namespace

RlTrainer::RlTrainer(const env::ProcessPair& pair, RlConfig cfg, Rng& init_rng) : pair_(pair), cfg_(std::move(cfg)) {
  cfg_.validate();
  const int bdim = belief_dim(pair, cfg_.window);
  const int pin = cfg_.variant == RlVariant::kMdp ? pair.state_dim() : bdim;
  const int vin = cfg_.variant == RlVariant::kPomdp ? bdim : pair.state_dim();
  policy_ = nn::CategoricalPolicy(pin, pair.num_actions(), cfg_.hidden, cfg_.activation, init_rng);
  value_ = nn::ValueNet(vin, cfg_.hidden, cfg_.activation, init_rng);
  value_opt_ = nn::Adam(value_.net().num_params(), cfg_.value_adam);
}

IterationStats RlTrainer::iterate(Rng& rng) {
  IterationStats stats;
  stats.lambda = cfg_.lambda;
  const bool state_policy = cfg_.variant == RlVariant::kMdp;
  const bool state_value = cfg_.variant != RlVariant::kPomdp;

  const env::BehaviorPolicy behavior = [&](env::StateId s, const env::BeliefWindow& b, Rng& r) {
    const Vec p = policy_.probs(state_policy ? pair_.state_vector(s) : b.vec());
    env::ActionChoice c;
    c.action = sample_categorical(p, r);
    c.logp = std::max(std::log(p[c.action]), nn::kLogProbFloor);
    return c;
  };
  const env::TrajectoryBatch batch = env::rollout(pair_, behavior, cfg_.batch_steps, cfg_.window, rng);
  stats.env_steps = static_cast<long long>(batch.size());
  const BatchTensors t = tensors(batch, pair_);
  const Mat& X = state_policy ? t.S : t.B;
  const Mat& V = state_value ? t.S : t.B;
  const Mat& V_next = state_value ? t.S_next : t.B_next;

  const Vec v = value_.predict(V);
  const Vec v_next = value_.predict(V_next);
  Vec adv = est::gae(batch, v, v_next, pair_.gamma(), cfg_.lambda);
  adv = est::shape_with_entropy(adv, t.behavior_logp, cfg_.entropy_alpha);
  if (cfg_.normalize_advantages) est::normalize_advantages(adv);

  trpo::PolicyBatch pb{X, t.actions, adv, t.behavior_logp, {}, cfg_.surrogate_entropy};
  const trpo::StepReport rep = trpo::trpo_step(policy_, pb, cfg_.trust_region);
  stats.trpo_accepted = rep.accepted;
  stats.trpo_kl = rep.kl;

  const Vec ret = est::discounted_returns(batch, pair_.gamma(), &v_next);
  const auto loss = trpo::fit_value(value_, value_opt_, V, ret, cfg_.value_fit, rng);
  stats.value_loss = loss.empty() ? 0.0 : loss.back();
  return stats;
}

void RlTrainer::save(io::Writer& w) const {
  save_net(w, policy_.net());
  save_net(w, value_.net());
  save_adam(w, value_opt_);
}

void RlTrainer::load(io::Reader& r) {
  load_net(r, policy_.net());
  load_net(r, value_.net());
  load_adam(r, value_opt_);
}

void AilConfig::validate() const {
  if (window < 1) throw ConfigError("window must be at least 1");
  if (batch_steps < 1) throw ConfigError("batch_steps must be positive");
  if (!(schedule.beta0 >= 0.0 && schedule.beta0 <= 1.0)) throw ConfigError("beta0 must lie in [0, 1]");
  if (!(schedule.decay >= 0.0 && schedule.decay <= 1.0)) throw ConfigError("beta decay must lie in [0, 1]");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be positive");
  if (!(adam.lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (step.epochs < 0 || step.batch_size < 1) throw ConfigError("invalid AIL step schedule");
}

AilTrainer::AilTrainer(const env::ProcessPair& pair, AilConfig cfg, il::ExpertFn expert, Rng& init_rng)
    : pair_(pair), cfg_(std::move(cfg)), expert_(std::move(expert)), buffer_(cfg_.buffer_capacity) {
  cfg_.validate();
  if (!expert_) throw ConfigError("AIL needs an expert");
  trainee_ = nn::CategoricalPolicy(belief_dim(pair, cfg_.window), pair.num_actions(), cfg_.hidden, cfg_.activation,
                                   init_rng);
  opt_ = nn::Adam(trainee_.net().num_params(), cfg_.adam);
}

IterationStats AilTrainer::iterate(Rng& rng) {
  IterationStats stats;
  stats.beta = cfg_.schedule.beta_at(n_);
  const env::TrajectoryBatch batch =
      env::rollout(pair_, il::mixture_behavior(pair_, stats.beta, expert_, il::trainee_from_net(trainee_)),
                   cfg_.batch_steps, cfg_.window, rng);
  stats.env_steps = static_cast<long long>(batch.size());
  il::buffer_update(buffer_, batch, pair_, expert_);
  il::ail_step(buffer_, trainee_, opt_, cfg_.step, rng);
  stats.buffer_kl = il::buffer_kl(buffer_, trainee_);
  ++n_;
  return stats;
}

void AilTrainer::save(io::Writer& w) const {
  save_net(w, trainee_.net());
  save_adam(w, opt_);
  save_buffer(w, buffer_);
  w.i64(n_);
}

void AilTrainer::load(io::Reader& r) {
  load_net(r, trainee_.net());
  load_adam(r, opt_);
  load_buffer(r, buffer_);
  n_ = static_cast<int>(r.i64());
}

il::ExpertFn tabular_expert(oracle::TabularPolicy policy) {
  if (policy.domain != oracle::Domain::kState) throw PreconditionError("tabular expert must be state-indexed");
  return [p = std::move(policy)](env::StateId s, const Vec&) -> Vec { return p.probs.row(s).transpose(); };
}

}  // namespace a2d
