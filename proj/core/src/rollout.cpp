#include "a2d/envpair.hpp"

namespace a2d::env {

StateId sample_initial(const ProcessPair& pair, Rng& rng) {
  const auto& init = pair.init_dist();
  const double u = uniform01(rng);
  double acc = 0.0;
  StateId last = 0;
  for (StateId s = 0; s < pair.num_states(); ++s) {
    if (init[s] <= 0.0) continue;
    acc += init[s];
    last = s;
    if (u < acc) return s;
  }
  return last;
}

TrajectoryBatch rollout(const ProcessPair& pair, const BehaviorPolicy& behavior, int n_steps,
                        int window, Rng& rng) {
  TrajectoryBatch batch;
  if (n_steps <= 0) return batch;
  batch.steps.reserve(static_cast<std::size_t>(n_steps));

  StateId s = sample_initial(pair, rng);
  BeliefWindow b = BeliefWindow::initial(window, pair.observe(s), pair.num_actions());
  int t = 0;
  double ep_return = 0.0;
  batch.episodes_started = 1;

  for (int i = 0; i < n_steps; ++i) {
    const ActionChoice choice = behavior(s, b, rng);
    const Outcome out = pair.transition(s, choice.action);
    BeliefWindow b_next = belief_update(b, pair.observe(out.next), choice.action);

    StepRecord rec;
    rec.s = s;
    rec.b = b.vec();
    rec.a = choice.action;
    rec.r = out.reward;
    rec.s_next = out.next;
    rec.b_next = b_next.vec();
    rec.done = out.done;
    rec.behavior_logp = choice.logp;
    rec.expert_branch = choice.expert_branch;
    rec.t = t;
    ep_return += out.reward;
    ++t;

    const bool time_limit = !out.done && t >= pair.horizon();
    const bool last = i + 1 == n_steps;
    rec.truncated = !out.done && (time_limit || last);
    batch.steps.push_back(std::move(rec));

    if (out.done || time_limit) {
      batch.completed_returns.push_back(ep_return);
      if (last) break;
      s = sample_initial(pair, rng);
      b = BeliefWindow::initial(window, pair.observe(s), pair.num_actions());
      t = 0;
      ep_return = 0.0;
      ++batch.episodes_started;
    } else {
      s = out.next;
      b = std::move(b_next);
    }
  }
  return batch;
}

}  // namespace a2d::env
