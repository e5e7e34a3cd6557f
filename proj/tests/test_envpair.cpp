#include "doctest.h"

#include "a2d/envpair.hpp"
#include "a2d/oracle.hpp"

#include <cmath>
#include <set>

using namespace a2d;
using namespace a2d::env;

namespace {

StateId state_at(const ProcessPair& pair, int config, Cell c, bool pressed = false) {
  for (StateId s = 0; s < pair.terminal_state(); ++s)
    if (pair.config_index(s) == config && pair.agent_cell(s) == c && pair.button_pressed(s) == pressed)
      return s;
  FAIL("state not found");
  return -1;
}

int config_with_hazard(const ProcessPair& pair, Cell hazard) {
  for (int k = 0; k < pair.num_configs(); ++k)
    if (pair.config(k).hazard == hazard) return k;
  FAIL("config not found");
  return -1;
}

}  // namespace

TEST_CASE("frozen lake enumerates nine hazard placements") {
  const ProcessPair pair = make_pair("frozen_lake");
  CHECK(pair.num_configs() == 9);
  // Every cell except the hazard and the goal, per configuration.
  CHECK(pair.num_states() == 9 * 23 + 1);
  const auto init = pair.initial_states();
  REQUIRE(init.size() == 9);
  for (StateId s : init) {
    CHECK(pair.init_dist()[s] == doctest::Approx(1.0 / 9.0));
    CHECK(pair.agent_cell(s) == pair.start());
  }
  std::set<std::pair<int, int>> hazards;
  for (int k = 0; k < 9; ++k) {
    const Cell h = pair.config(k).hazard;
    CHECK(h.x >= 1);
    CHECK(h.x <= 3);
    CHECK(h.y >= 1);
    CHECK(h.y <= 3);
    hazards.insert({h.x, h.y});
  }
  CHECK(hazards.size() == 9);
}

TEST_CASE("tiger door 0 has two equally likely configurations") {
  const ProcessPair pair = make_pair("tiger_door_0");
  CHECK(pair.num_configs() == 2);
  const auto init = pair.initial_states();
  REQUIRE(init.size() == 2);
  CHECK(pair.init_dist()[init[0]] == doctest::Approx(0.5));
  CHECK(pair.button().has_value());
}

TEST_CASE("unknown layout is a configuration error") {
  CHECK_THROWS_AS(make_pair("foo"), ConfigError);
  PairSpec spec;
  spec.layout = "foo";
  CHECK_THROWS_AS(make_pair(spec), ConfigError);
}

TEST_CASE("entering the hazard pays the step cost and terminates") {
  const ProcessPair pair = make_pair("frozen_lake");
  const int k = config_with_hazard(pair, {2, 2});
  const StateId s = state_at(pair, k, {1, 2});
  const Outcome out = pair.transition(s, kEast);
  CHECK(out.done);
  CHECK(out.next == pair.terminal_state());
  CHECK(out.reward == -102.0);
}

TEST_CASE("walls clamp position and still cost a step") {
  const ProcessPair pair = make_pair("frozen_lake");
  const StateId s = pair.initial_states()[0];
  const Outcome out = pair.transition(s, kWest);
  CHECK_FALSE(out.done);
  CHECK(out.next == s);
  CHECK(out.reward == -2.0);
}

TEST_CASE("stepping from the terminal state is a precondition error") {
  const ProcessPair pair = make_pair("tiger_door_1");
  CHECK_THROWS_AS(pair.transition(pair.terminal_state(), kNorth), PreconditionError);
}

TEST_CASE("button press reveals the doors in tiger door observations") {
  for (const std::string name : {"tiger_door_0", "tiger_door_1", "tiger_door_2", "tiger_door_3"}) {
    CAPTURE(name);
    const ProcessPair pair = make_pair(name);
    const Cell button = *pair.button();
    // Before the press the two configurations look identical everywhere;
    // after it they differ.
    for (StateId s = 0; s < pair.terminal_state(); ++s) {
      if (pair.config_index(s) != 0) continue;
      const Cell c = pair.agent_cell(s);
      const bool pressed = pair.button_pressed(s);
      StateId twin = -1;
      for (StateId t = 0; t < pair.terminal_state(); ++t)
        if (pair.config_index(t) == 1 && pair.agent_cell(t) == c && pair.button_pressed(t) == pressed) twin = t;
      if (twin < 0) continue;
      if (pressed)
        CHECK(pair.observe(s) != pair.observe(twin));
      else
        CHECK(pair.observe(s) == pair.observe(twin));
      CHECK(pair.state_vector(s) != pair.state_vector(twin));
    }
    // Walking onto the button sets the flag.
    bool entered = false;
    for (StateId s = 0; s < pair.terminal_state() && !entered; ++s) {
      if (pair.button_pressed(s) || pair.agent_cell(s) == button) continue;
      for (int a = 0; a < kNumActions; ++a) {
        const Outcome out = pair.transition(s, a);
        if (!out.done && pair.agent_cell(out.next) == button) {
          CHECK(pair.button_pressed(out.next));
          entered = true;
        }
      }
    }
    CHECK(entered);
  }
}

TEST_CASE("transition tables are point masses shared by both views") {
  for (const auto& name : supported_layouts()) {
    CAPTURE(name);
    const ProcessPair pair = make_pair(name);
    double init_total = 0.0;
    for (double p : pair.init_dist()) init_total += p;
    CHECK(init_total == doctest::Approx(1.0).epsilon(1e-12));
    for (StateId s = 0; s < pair.num_states(); ++s) {
      for (int a = 0; a < kNumActions; ++a) {
        const auto probs = pair.transition_probs(s, a);
        double total = 0.0;
        for (const auto& [next, p] : probs) total += p;
        CHECK(std::abs(total - 1.0) < 1e-12);
        CHECK(probs.size() == 1);
        if (!pair.is_terminal(s)) {
          const Outcome out = pair.transition(s, a);
          CHECK(probs[0].first == out.next);
          CHECK(pair.reward(s, a, out.next) == out.reward);
        }
      }
    }
  }
}

TEST_CASE("belief window shift semantics") {
  const Vec o0 = (Vec(3) << 1, 0, 0).finished();
  const Vec o1 = (Vec(3) << 0, 1, 0).finished();

  SUBCASE("window one is the latest observation") {
    const BeliefWindow b0 = BeliefWindow::initial(1, o0);
    CHECK(b0.vec() == o0);
    const BeliefWindow b1 = belief_update(b0, o1, kSouth);
    CHECK(b1.vec() == o1);
  }
  SUBCASE("window two keeps the previous observation and the action") {
    const BeliefWindow b0 = BeliefWindow::initial(2, o0);
    CHECK(b0.vec().size() == BeliefWindow::flat_dim(2, 3));
    CHECK(b0.obs_slot(0) == Vec::Zero(3));
    CHECK(b0.obs_slot(1) == o0);
    CHECK(b0.action_slot(0) == Vec::Zero(kNumActions));
    const BeliefWindow b1 = belief_update(b0, o1, kEast);
    CHECK(b1.obs_slot(0) == o0);
    CHECK(b1.obs_slot(1) == o1);
    Vec a = Vec::Zero(kNumActions);
    a[kEast] = 1.0;
    CHECK(b1.action_slot(0) == a);
  }
  SUBCASE("padding survives until the window fills") {
    const BeliefWindow b0 = BeliefWindow::initial(3, o0);
    const BeliefWindow b1 = belief_update(b0, o1, kNorth);
    CHECK(b1.obs_slot(0) == Vec::Zero(3));
    CHECK(b1.action_slot(0) == Vec::Zero(kNumActions));
  }
  SUBCASE("dimension mismatch is rejected") {
    const BeliefWindow b0 = BeliefWindow::initial(2, o0);
    CHECK_THROWS(belief_update(b0, Vec::Zero(5), kNorth));
  }
}

TEST_CASE("rollout collects exactly the requested steps") {
  const ProcessPair pair = make_pair("frozen_lake");
  const BehaviorPolicy uniform = [](StateId, const BeliefWindow&, Rng& rng) {
    const int a = static_cast<int>(uniform01(rng) * kNumActions);
    return ActionChoice{a, std::log(0.25), false};
  };
  Rng rng(7);
  const TrajectoryBatch batch = rollout(pair, uniform, 2000, 1, rng);
  CHECK(batch.size() == 2000);
  CHECK(batch.episodes_started >= 10);

  Rng empty_rng(7);
  CHECK(rollout(pair, uniform, 0, 1, empty_rng).empty());

  int t = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const StepRecord& st = batch.steps[i];
    CHECK(st.t == t);
    CHECK(st.t < pair.horizon());
    const Outcome out = pair.transition(st.s, st.a);
    CHECK(out.next == st.s_next);
    CHECK(out.reward == st.r);
    CHECK(out.done == st.done);
    if (st.done || st.truncated) {
      t = 0;
    } else {
      ++t;
      CHECK(batch.steps[i + 1].s == st.s_next);
      CHECK(batch.steps[i + 1].b == st.b_next);
    }
  }
}

TEST_CASE("episode sums equal the exact return of the realized actions") {
  const ProcessPair pair = make_pair("tiger_door_2");
  const BehaviorPolicy uniform = [](StateId, const BeliefWindow&, Rng& rng) {
    return ActionChoice{static_cast<int>(uniform01(rng) * kNumActions), std::log(0.25), false};
  };
  Rng rng(3);
  const TrajectoryBatch batch = rollout(pair, uniform, 3000, 1, rng);
  std::size_t start = 0;
  std::size_t finished = 0;
  std::size_t ended = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch.steps[i].done && !batch.steps[i].truncated) continue;
    if (batch.steps[i].done) {
      // Replay the actions through the deterministic model.
      StateId s = batch.steps[start].s;
      double replayed = 0.0;
      for (std::size_t j = start; j <= i; ++j) {
        const Outcome out = pair.transition(s, batch.steps[j].a);
        replayed += out.reward;
        s = out.next;
      }
      CHECK(replayed == doctest::Approx(batch.completed_returns[ended]));
      ++finished;
    }
    if (batch.steps[i].done || batch.steps[i].t + 1 >= pair.horizon()) ++ended;
    start = i + 1;
  }
  CHECK(finished > 0);
}

TEST_CASE("rollouts are reproducible from the seed") {
  const ProcessPair pair = make_pair("tiger_door_0");
  const BehaviorPolicy policy = [](StateId, const BeliefWindow&, Rng& rng) {
    return ActionChoice{static_cast<int>(uniform01(rng) * kNumActions), std::log(0.25), false};
  };
  Rng r1(11), r2(11);
  const TrajectoryBatch a = rollout(pair, policy, 500, 2, r1);
  const TrajectoryBatch b = rollout(pair, policy, 500, 2, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.steps[i].s == b.steps[i].s);
    CHECK(a.steps[i].a == b.steps[i].a);
    CHECK(a.steps[i].b == b.steps[i].b);
  }
}
