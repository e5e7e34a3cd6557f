#include "a2d/a2d.hpp"

#include <cmath>

namespace a2d {

void A2dConfig::validate() const {
  if (window < 1) throw ConfigError("window must be at least 1");
  if (batch_steps < 2) throw ConfigError("batch_steps must be at least 2");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (!(entropy_alpha >= 0.0)) throw ConfigError("entropy_alpha must be non-negative");
  if (!(schedule.beta0 >= 0.0 && schedule.beta0 <= 1.0)) throw ConfigError("beta0 must lie in [0, 1]");
  if (!(schedule.decay >= 0.0 && schedule.decay <= 1.0)) throw ConfigError("beta decay must lie in [0, 1]");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be positive");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden layer widths must be positive");
  if (!(trust_region.max_kl > 0.0)) throw ConfigError("max_kl must be positive");
  if (value_fit.epochs < 0 || value_fit.minibatches < 1) throw ConfigError("invalid value fit schedule");
  if (ail.epochs < 0 || ail.batch_size < 1) throw ConfigError("invalid AIL step schedule");
  for (double lr : {value_adam.lr, q_adam.lr, ail_adam.lr})
    if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
}

std::vector<std::string> set_advantage_source(A2dConfig& cfg, AdvantageSource source) {
  cfg.advantage = source;
  std::vector<std::string> warnings;
  if (source == AdvantageSource::kQ &&
      (cfg.schedule.beta0 > 0.0 && cfg.schedule.mode == il::BetaMode::kMultiplicative))
    warnings.push_back("Q(b,a) - V(b) advantages assume trainee-only data collection, but beta > 0");
  return warnings;
}

A2dState A2dState::init(const env::ProcessPair& pair, const A2dConfig& cfg, Rng& rng) {
  cfg.validate();
  const int bdim = env::BeliefWindow::flat_dim(cfg.window, pair.obs_dim(), pair.num_actions());
  const int A = pair.num_actions();
  A2dState st{
      nn::CategoricalPolicy(pair.state_dim(), A, cfg.hidden, cfg.activation, rng),
      nn::CategoricalPolicy(bdim, A, cfg.hidden, cfg.activation, rng),
      nn::ValueNet(pair.state_dim(), cfg.hidden, cfg.activation, rng),
      nn::ValueNet(bdim, cfg.hidden, cfg.activation, rng),
      std::nullopt,
      {},
      {},
      std::nullopt,
      {},
      il::ReplayBuffer(cfg.buffer_capacity),
  };
  st.expert_value_opt = nn::Adam(st.expert_value.net().num_params(), cfg.value_adam);
  st.trainee_value_opt = nn::Adam(st.trainee_value.net().num_params(), cfg.value_adam);
  st.trainee_opt = nn::Adam(st.trainee.net().num_params(), cfg.ail_adam);
  if (cfg.advantage == AdvantageSource::kQ) {
    st.q.emplace(bdim + A, cfg.hidden, cfg.activation, rng);
    st.q_opt.emplace(st.q->net().num_params(), cfg.q_adam);
  }
  st.lambda = cfg.lambda;
  return st;
}

namespace {

Vec taken_logp(const nn::Distribution& d, const std::vector<int>& actions) {
  Vec out(static_cast<Eigen::Index>(actions.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = d.logp(actions[static_cast<std::size_t>(i)], i);
  return out;
}

void anneal_lambda(A2dState& st, const LambdaAnneal& cfg, double kl) {
  if (!cfg.enabled) return;
  if (kl < st.best_kl * (1.0 - cfg.min_improvement)) {
    st.best_kl = kl;
    st.since_best = 0;
    return;
  }
  if (++st.since_best >= cfg.plateau_iterations) {
    st.lambda = std::max(cfg.floor, st.lambda - cfg.step);
    st.since_best = 0;
    st.best_kl = kl;
  }
}

}  // namespace

IterationStats a2d_iteration(A2dState& st, const env::ProcessPair& pair, const A2dConfig& cfg, Rng& rng) {
  IterationStats stats;
  const double beta = cfg.schedule.beta_at(st.n);
  stats.beta = beta;
  stats.lambda = st.lambda;

  const il::ExpertFn expert_fn = il::expert_from_net(st.expert);
  const env::TrajectoryBatch batch = env::rollout(
      pair, il::mixture_behavior(pair, beta, expert_fn, il::trainee_from_net(st.trainee)), cfg.batch_steps,
      cfg.window, rng);
  stats.env_steps = static_cast<long long>(batch.size());
  il::buffer_update(st.buffer, batch, pair, expert_fn);
  const BatchTensors t = tensors(batch, pair);

  const Vec vm = st.expert_value.predict(t.S);
  const Vec vm_next = st.expert_value.predict(t.S_next);
  const Vec vp = st.trainee_value.predict(t.B);
  const Vec vp_next = st.trainee_value.predict(t.B_next);

  Vec adv;
  if (cfg.advantage == AdvantageSource::kGae) {
    const est::MixtureValue mix{beta};
    adv = est::gae(batch, mix(vm, vp), mix(vm_next, vp_next), pair.gamma(), st.lambda);
  } else {
    if (!st.q) throw PreconditionError("Q advantages requested without a Q network");
    adv = st.q->predict(nn::append_one_hot(t.B, t.actions, pair.num_actions())) - vp;
  }

  const Vec expert_logp = taken_logp(st.expert.forward(t.S), t.actions);
  adv = est::shape_with_entropy(adv, expert_logp, cfg.entropy_alpha);
  if (cfg.normalize_advantages) est::normalize_advantages(adv);

  est::WeightStats ws;
  est::importance_weights(expert_logp, t.behavior_logp, cfg.weight_cap, &ws);
  stats.max_importance_weight = ws.max_weight;

  trpo::PolicyBatch pb{t.S, t.actions, adv, t.behavior_logp, {}, cfg.surrogate_entropy};
  if (cfg.weight_cap > 0.0) {
    // Raising the reference density caps the ratio at the current expert.
    const double log_cap = std::log(cfg.weight_cap);
    pb.old_logp = pb.old_logp.cwiseMax((expert_logp.array() - log_cap).matrix());
  }
  const trpo::StepReport rep = trpo::trpo_step(st.expert, pb, cfg.trust_region);
  stats.trpo_accepted = rep.accepted;
  stats.trpo_kl = rep.kl;

  const Vec ret_m = est::discounted_returns(batch, pair.gamma(), &vm_next);
  const Vec ret_p = est::discounted_returns(batch, pair.gamma(), &vp_next);
  const auto lm = trpo::fit_value(st.expert_value, st.expert_value_opt, t.S, ret_m, cfg.value_fit, rng);
  const auto lp = trpo::fit_value(st.trainee_value, st.trainee_value_opt, t.B, ret_p, cfg.value_fit, rng);
  stats.value_loss = 0.5 * ((lm.empty() ? 0.0 : lm.back()) + (lp.empty() ? 0.0 : lp.back()));
  if (st.q) {
    const auto lq = trpo::fit_q(*st.q, *st.q_opt, t.B, t.actions, pair.num_actions(), ret_p, cfg.value_fit, rng);
    stats.q_loss = lq.empty() ? 0.0 : lq.back();
  }

  if (cfg.refresh_buffer_targets) st.buffer.set_targets(st.expert.forward(st.buffer.states()).probs);
  il::ail_step(st.buffer, st.trainee, st.trainee_opt, cfg.ail, rng);
  stats.buffer_kl = il::buffer_kl(st.buffer, st.trainee);

  anneal_lambda(st, cfg.lambda_anneal, stats.buffer_kl);
  ++st.n;
  return stats;
}

A2dTrainer::A2dTrainer(const env::ProcessPair& pair, A2dConfig cfg, Rng& init_rng)
    : pair_(pair), cfg_(std::move(cfg)), state_(A2dState::init(pair, cfg_, init_rng)) {}

A2dRun a2d_train(const env::ProcessPair& pair, const A2dConfig& cfg, const LoopConfig& loop, Rng& rng) {
  A2dTrainer trainer(pair, cfg, rng);
  Rng eval_rng(rng());
  TrainResult res = train_loop(trainer, pair, loop, rng, eval_rng);
  A2dRun run{trainer.state().trainee, trainer.state().expert, std::move(res)};
  if (run.result.state.best_params.size() > 0) run.trainee.net().set_params(run.result.state.best_params);
  return run;
}

void A2dTrainer::save(io::Writer& w) const {
  save_net(w, state_.expert.net());
  save_net(w, state_.trainee.net());
  save_net(w, state_.expert_value.net());
  save_net(w, state_.trainee_value.net());
  save_adam(w, state_.expert_value_opt);
  save_adam(w, state_.trainee_value_opt);
  save_adam(w, state_.trainee_opt);
  w.boolean(state_.q.has_value());
  if (state_.q) {
    save_net(w, state_.q->net());
    save_adam(w, *state_.q_opt);
  }
  save_buffer(w, state_.buffer);
  w.i64(state_.n);
  w.f64(state_.lambda);
  w.f64(state_.best_kl);
  w.i64(state_.since_best);
}

void A2dTrainer::load(io::Reader& r) {
  load_net(r, state_.expert.net());
  load_net(r, state_.trainee.net());
  load_net(r, state_.expert_value.net());
  load_net(r, state_.trainee_value.net());
  load_adam(r, state_.expert_value_opt);
  load_adam(r, state_.trainee_value_opt);
  load_adam(r, state_.trainee_opt);
  if (r.boolean() != state_.q.has_value()) throw CorruptFileError("checkpoint Q network does not match the config");
  if (state_.q) {
    load_net(r, state_.q->net());
    load_adam(r, *state_.q_opt);
  }
  load_buffer(r, state_.buffer);
  state_.n = static_cast<int>(r.i64());
  state_.lambda = r.f64();
  state_.best_kl = r.f64();
  state_.since_best = static_cast<int>(r.i64());
}

}  // namespace a2d
