#include "a2d/trainer.hpp"

#include <cmath>

namespace a2d {

TrainResult train_loop(Trainer& trainer, const env::ProcessPair& pair, const LoopConfig& cfg,
                       Rng& train_rng, Rng& eval_rng, LoopState state, const RecordSink& sink) {
  if (cfg.iterations < 0) throw ConfigError("iterations must be non-negative");
  if (cfg.eval_every < 1) throw ConfigError("eval_every must be positive");
  if (cfg.patience < 1) throw ConfigError("patience must be positive");

  TrainResult out;
  while (state.next_iteration < cfg.iterations && !state.early_stopped) {
    const int it = state.next_iteration;
    state.last = trainer.iterate(train_rng);
    state.env_steps_total += state.last.env_steps;
    state.next_iteration = it + 1;

    const bool eval_now = (it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations;
    if (!eval_now) continue;

    const EvalResult ev = evaluate(pair, trainer.policy(), cfg.eval_interactions, trainer.window(), eval_rng);
    MetricsRecord rec;
    rec.iteration = it;
    rec.env_steps_total = state.env_steps_total;
    rec.beta = state.last.beta;
    rec.lambda = state.last.lambda;
    rec.stochastic_return_mean = ev.stochastic_mean;
    rec.stochastic_return_std = ev.stochastic_std;
    rec.deterministic_return = ev.deterministic_return;
    rec.buffer_kl = state.last.buffer_kl;
    const auto expert = trainer.expert();
    rec.expert_return_probe = expert ? deterministic_return(pair, *expert, trainer.window()) : ev.deterministic_return;
    rec.max_importance_weight = state.last.max_importance_weight;
    rec.trpo_accepted = state.last.trpo_accepted;
    rec.trpo_kl = state.last.trpo_kl;
    rec.value_loss = state.last.value_loss;
    rec.q_loss = state.last.q_loss;

    if (ev.deterministic_return > state.best_deterministic) {
      state.best_deterministic = ev.deterministic_return;
      state.best_params = trainer.policy_params();
    }
    if (cfg.target && std::abs(ev.deterministic_return - *cfg.target) <= cfg.target_tol) {
      if (state.steps_to_target < 0) state.steps_to_target = state.env_steps_total;
      if (++state.streak >= cfg.patience) state.early_stopped = true;
    } else {
      state.streak = 0;
    }
    out.records.push_back(rec);
    if (sink && !sink(rec, state)) {
      out.state = std::move(state);
      return out;
    }
  }
  out.finished = true;
  out.state = std::move(state);
  return out;
}

void save_loop_state(io::Writer& w, const LoopState& s) {
  w.i64(s.next_iteration);
  w.i64(s.env_steps_total);
  w.i64(s.streak);
  w.f64(s.best_deterministic);
  w.vec(s.best_params);
  w.i64(s.steps_to_target);
  w.boolean(s.early_stopped);
  const IterationStats& l = s.last;
  w.i64(l.env_steps);
  w.f64(l.beta);
  w.f64(l.lambda);
  w.f64(l.buffer_kl);
  w.f64(l.max_importance_weight);
  w.boolean(l.trpo_accepted);
  w.f64(l.trpo_kl);
  w.f64(l.value_loss);
  w.boolean(l.q_loss.has_value());
  w.f64(l.q_loss.value_or(0.0));
}

LoopState load_loop_state(io::Reader& r) {
  LoopState s;
  s.next_iteration = static_cast<int>(r.i64());
  s.env_steps_total = r.i64();
  s.streak = static_cast<int>(r.i64());
  s.best_deterministic = r.f64();
  s.best_params = r.vec();
  s.steps_to_target = r.i64();
  s.early_stopped = r.boolean();
  IterationStats& l = s.last;
  l.env_steps = r.i64();
  l.beta = r.f64();
  l.lambda = r.f64();
  l.buffer_kl = r.f64();
  l.max_importance_weight = r.f64();
  l.trpo_accepted = r.boolean();
  l.trpo_kl = r.f64();
  l.value_loss = r.f64();
  const bool has_q = r.boolean();
  const double q = r.f64();
  if (has_q) l.q_loss = q;
  if (s.next_iteration < 0) throw CorruptFileError("checkpoint loop state is invalid");
  return s;
}

BatchTensors tensors(const env::TrajectoryBatch& batch, const env::ProcessPair& pair) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  BatchTensors t;
  if (n == 0) throw PreconditionError("empty trajectory batch");
  const Eigen::Index bdim = batch.steps.front().b.size();
  t.S.resize(pair.state_dim(), n);
  t.S_next.resize(pair.state_dim(), n);
  t.B.resize(bdim, n);
  t.B_next.resize(bdim, n);
  t.actions.resize(static_cast<std::size_t>(n));
  t.behavior_logp.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& st = batch.steps[static_cast<std::size_t>(i)];
    t.S.col(i) = pair.state_vector(st.s);
    t.S_next.col(i) = pair.state_vector(st.s_next);
    t.B.col(i) = st.b;
    t.B_next.col(i) = st.b_next;
    t.actions[static_cast<std::size_t>(i)] = st.a;
    t.behavior_logp[i] = st.behavior_logp;
  }
  return t;
}

void save_net(io::Writer& w, const nn::Mlp& net) { w.vec(net.params()); }

void load_net(io::Reader& r, nn::Mlp& net) { net.set_params(r.vec_of(net.num_params(), "network")); }

void save_adam(io::Writer& w, const nn::Adam& opt) {
  w.vec(opt.m());
  w.vec(opt.v());
  w.i64(opt.steps());
  w.i64(opt.rejected());
}

void load_adam(io::Reader& r, nn::Adam& opt) {
  const Vec m = r.vec_of(opt.m().size(), "optimizer");
  const Vec v = r.vec_of(opt.v().size(), "optimizer");
  const long long t = r.i64();
  const long long rejected = r.i64();
  opt.restore(m, v, t, rejected);
}

void save_buffer(io::Writer& w, const il::ReplayBuffer& buffer) {
  w.i64(buffer.size());
  for (const auto& e : buffer.entries()) {
    w.vec(e.s);
    w.vec(e.b);
    w.vec(e.expert_probs);
  }
}

void load_buffer(io::Reader& r, il::ReplayBuffer& buffer) {
  const long long n = r.i64();
  if (n < 0 || n > buffer.capacity()) throw CorruptFileError("checkpoint buffer size is invalid");
  il::ReplayBuffer fresh(buffer.capacity());
  for (long long i = 0; i < n; ++i) {
    il::BufferEntry e;
    e.s = r.vec();
    e.b = r.vec();
    e.expert_probs = r.vec();
    fresh.push(std::move(e));
  }
  buffer = std::move(fresh);
}

}  // namespace a2d
