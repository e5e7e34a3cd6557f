#include "doctest.h"
#include "support.hpp"

#include "a2d/envpair.hpp"
#include "a2d/estimators.hpp"
#include "a2d/oracle.hpp"

#include <cmath>

using namespace a2d;
using namespace a2d::oracle;
using namespace testing_support;

namespace {

TabularPolicy always(const Model& model, int action) {
  return TabularPolicy::deterministic(Domain::kState, std::vector<int>(model.num_states(), action),
                                      model.num_actions());
}

TabularPolicy random_policy(Rng& rng, Domain domain, int rows, int cols) {
  return est::softmax_policy(domain, random_logits(rng, rows, cols, 2.0));
}

}  // namespace

TEST_CASE("occupancy of a two-state chain") {
  const Model model(chain(1, 1.0, 0.5));
  const Mat probs = node_policy(model, TabularPolicy::uniform(Domain::kState, model.num_states(), 2));
  const OccupancyTable occ = occupancy(model, probs);
  const Vec d = occ.state_marginal(model);
  CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("occupancy is a point mass once absorbed") {
  FinitePair p = chain(1, 0.0, 0.9);
  const Model model(p);
  const Mat probs = node_policy(model, TabularPolicy::uniform(Domain::kState, model.num_states(), 2));
  // Weighted by gamma^t the terminal carries everything after the first step.
  const Vec d = occupancy(model, probs).state_marginal(model);
  CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d[p.terminal()] == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("linear solve and truncated series agree") {
  for (const std::string name : {"frozen_lake", "tiger_door_0", "tiger_door_3"}) {
    CAPTURE(name);
    const Model model(env::make_pair(name));
    const Mat probs = node_policy(model, TabularPolicy::uniform(Domain::kState, model.num_states(), 4));
    const OccupancyTable a = occupancy(model, probs);
    const OccupancyTable b = occupancy_truncated(model, probs);
    CHECK(0.5 * (a.mass - b.mass).cwiseAbs().sum() < 1e-6);
    CHECK(a.mass.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(b.mass.sum() >= 1.0 - kOccupancyTruncation - 1e-12);
    CHECK(b.mass.sum() <= 1.0 + 1e-12);
  }
}

TEST_CASE("occupancy marginals are consistent with the joint") {
  Rng rng(5);
  const Model model(env::make_pair("tiger_door_2"));
  const TabularPolicy trainee = random_policy(rng, Domain::kBelief, model.num_beliefs(), 4);
  const OccupancyTable occ = occupancy(model, node_policy(model, trainee));
  Vec by_state = Vec::Zero(model.num_states());
  Vec by_belief = Vec::Zero(model.num_beliefs());
  for (int n = 0; n < model.num_nodes(); ++n) {
    by_state[model.state_of(n)] += occ.mass[n];
    by_belief[model.belief_of(n)] += occ.mass[n];
  }
  CHECK((by_state - occ.state_marginal(model)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((by_belief - occ.belief_marginal(model)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("frozen lake occupancy matches Monte Carlo visitation") {
  const env::ProcessPair pair = env::make_pair("frozen_lake");
  const Model model(pair);
  const Mat probs = node_policy(model, TabularPolicy::uniform(Domain::kState, model.num_states(), 4));
  const Vec d = occupancy(model, probs).state_marginal(model);

  const int episodes = 100000;
  const double g = pair.gamma();
  Vec sum = Vec::Zero(pair.num_states());
  Vec sum_sq = Vec::Zero(pair.num_states());
  Vec x = Vec::Zero(pair.num_states());
  Rng rng(2024);
  for (int e = 0; e < episodes; ++e) {
    x.setZero();
    env::StateId s = env::sample_initial(pair, rng);
    double w = 1.0 - g;
    while (!pair.is_terminal(s)) {
      x[s] += w;
      w *= g;
      s = pair.transition(s, static_cast<int>(uniform01(rng) * 4)).next;
    }
    // The terminal collects the whole remaining tail, (1 - g) sum_{k>=t} g^k.
    x[s] = w / (1.0 - g);
    sum += x;
    sum_sq += x.cwiseProduct(x);
  }
  int within3 = 0;
  int within5 = 0;
  for (int s = 0; s < pair.num_states(); ++s) {
    const double mean = sum[s] / episodes;
    const double var = std::max(sum_sq[s] / episodes - mean * mean, 0.0);
    const double se = std::sqrt(var / episodes) + 1e-12;
    const double dev = std::abs(mean - d[s]);
    within3 += dev <= 3.0 * se;
    within5 += dev <= 5.0 * se;
  }
  CHECK(within3 >= static_cast<int>(0.95 * pair.num_states()));
  CHECK(within5 == pair.num_states());
}

TEST_CASE("implicit policy averages the expert over d(s|b)") {
  SUBCASE("two aliased states with opposite experts") {
    // States 0 and 1 share an observation and are equally likely.
    FinitePair p;
    p.num_states = 3;
    p.num_actions = 2;
    p.gamma = 0.9;
    p.init = {0.5, 0.5, 0.0};
    p.edges = {{{2, 1.0, 0.0}}, {{2, 1.0, 0.0}}, {{2, 1.0, 0.0}}, {{2, 1.0, 0.0}}, {{2, 1.0, 0.0}}, {{2, 1.0, 0.0}}};
    p.observations = {one_hot(1, 0), one_hot(1, 0), Vec::Zero(1)};
    const Model model(p);
    const TabularPolicy expert = TabularPolicy::deterministic(Domain::kState, {0, 1, 0}, 2);
    const OccupancyTable occ = occupancy(model, node_policy(model, expert));
    const ImplicitPolicy hat = implicit_policy(model, expert, occ);
    const int b = model.belief_of(0);
    CHECK(hat.policy.probs(b, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(hat.policy.probs(b, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("identifiable beliefs copy the expert row") {
    const Model model(env::make_pair("frozen_lake_observed"));
    Rng rng(1);
    const TabularPolicy expert = random_policy(rng, Domain::kState, model.num_states(), 4);
    const OccupancyTable occ = occupancy(model, node_policy(model, expert));
    const ImplicitPolicy hat = implicit_policy(model, expert, occ);
    for (int n = 0; n < model.num_nodes(); ++n) {
      if (model.is_terminal_node(n)) continue;
      const Eigen::RowVectorXd diff = hat.policy.probs.row(model.belief_of(n)) - expert.probs.row(model.state_of(n));
      CHECK(diff.cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("frozen lake start belief averages the nine placements") {
    const env::ProcessPair pair = env::make_pair("frozen_lake");
    const Model model(pair);
    const TabularPolicy expert = optimal_mdp_policy(model).policy;
    const OccupancyTable occ = occupancy(model, node_policy(model, expert));
    const ImplicitPolicy hat = implicit_policy(model, expert, occ);
    // Brute force: at t = 0 every placement sits at the start cell with
    // equal weight, and the start belief is only ever seen there.
    Vec freq = Vec::Zero(4);
    for (env::StateId s : pair.initial_states()) freq += expert.probs.row(s).transpose() / 9.0;
    const int b = model.belief_of(model.nodes_of_state(pair.initial_states()[0])[0]);
    // Other visits to the start cell can shift the weights; compare against
    // the exact d(s|b) average computed by hand.
    Vec manual = Vec::Zero(4);
    double mass = 0.0;
    for (int n : model.nodes_of_belief(b)) {
      manual += occ.mass[n] * expert.probs.row(model.state_of(n)).transpose();
      mass += occ.mass[n];
    }
    manual /= mass;
    CHECK((hat.policy.probs.row(b).transpose() - manual).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((manual - freq).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("ail objective") {
  const Model model(env::make_pair("tiger_door_0"));
  const OccupancyTable occ =
      occupancy(model, node_policy(model, TabularPolicy::uniform(Domain::kState, model.num_states(), 4)));
  CHECK(ail_objective(model, TabularPolicy::uniform(Domain::kState, model.num_states(), 4),
                      TabularPolicy::uniform(Domain::kBelief, model.num_beliefs(), 4), occ) ==
        doctest::Approx(0.0).epsilon(1e-14));

  const TabularPolicy expert = optimal_mdp_policy(model).policy;
  const FixedPointReport fp = ail_fixed_point(model, expert);
  const OccupancyTable occ_fp = occupancy(model, node_policy(model, fp.trainee));
  const double f = ail_objective(model, expert, fp.trainee, occ_fp);
  CHECK(f > 0.0);
  CHECK(f == doctest::Approx(0.003363054844765876).epsilon(1e-9));

  // A trainee with zero mass where the expert acts.
  Mat zero = Mat::Constant(model.num_beliefs(), 4, 0.0);
  zero.col(3).setOnes();
  const TabularPolicy blind{Domain::kBelief, zero};
  CHECK(ail_objective(model, expert, blind, occ_fp) == kInfiniteDivergence);
}

TEST_CASE("ail fixed points") {
  SUBCASE("frozen lake") {
    const Model model(env::make_pair("frozen_lake"));
    const FixedPointReport fp = ail_fixed_point(model, optimal_mdp_policy(model).policy);
    CHECK(fp.converged);
    CHECK(fp.value == doctest::Approx(-33.360868879345915).epsilon(1e-9));
    // Its greedy reading is the always-cross policy.
    const std::vector<int> greedy = fp.trainee.argmax_actions();
    const TabularPolicy cross = TabularPolicy::deterministic(Domain::kBelief, greedy, 4);
    CHECK(undiscounted_return(model, cross) == doctest::Approx(-80.0 / 3.0).epsilon(1e-9));
  }
  SUBCASE("tiger door 0") {
    const Model model(env::make_pair("tiger_door_0"));
    const FixedPointReport fp = ail_fixed_point(model, optimal_mdp_policy(model).policy);
    CHECK(fp.converged);
    CHECK(std::abs(fp.value - (-54.0)) < 1e-6);
  }
  SUBCASE("tiger door 1") {
    const Model model(env::make_pair("tiger_door_1"));
    const FixedPointReport fp = ail_fixed_point(model, optimal_mdp_policy(model).policy);
    CHECK(std::abs(fp.value - (-42.0)) < 1e-6);
  }
  SUBCASE("identifiable control pair reproduces the expert") {
    const Model model(env::make_pair("frozen_lake_observed"));
    const SolvedPolicy expert = optimal_mdp_policy(model);
    const FixedPointReport fp = ail_fixed_point(model, expert.policy);
    CHECK(fp.converged);
    CHECK(std::abs(fp.value - expert.value) < 1e-8);
    CHECK(std::abs(fp.value - optimal_pomdp_policy(model).value) < 1e-8);
  }
  SUBCASE("fixed points are stationary") {
    for (const std::string name : {"tiger_door_0", "tiger_door_2", "frozen_lake"}) {
      CAPTURE(name);
      const Model model(env::make_pair(name));
      const TabularPolicy expert = optimal_mdp_policy(model).policy;
      const FixedPointReport fp = ail_fixed_point(model, expert);
      const OccupancyTable occ = occupancy(model, node_policy(model, fp.trainee));
      const ImplicitPolicy again = implicit_policy(model, expert, occ);
      CHECK((again.policy.probs - fp.trainee.probs).cwiseAbs().maxCoeff() < 1e-7);
    }
  }
}

TEST_CASE("optimal values") {
  const auto mdp = [](const char* name) { return optimal_mdp_policy(Model(env::make_pair(name))).value; };
  const auto pomdp = [](const char* name) { return optimal_pomdp_policy(Model(env::make_pair(name))).value; };
  CHECK(std::abs(mdp("frozen_lake") - 32.0 / 3.0) < 1e-6);
  CHECK(std::abs(mdp("tiger_door_0") - 6.0) < 1e-6);
  CHECK(std::abs(mdp("tiger_door_1") - 18.0) < 1e-6);
  CHECK(std::abs(pomdp("frozen_lake") - 4.0) < 1e-6);
  CHECK(std::abs(pomdp("tiger_door_0") - 2.0) < 1e-6);
  CHECK(std::abs(pomdp("tiger_door_1") - 14.0) < 1e-6);
  CHECK(std::abs(pomdp("tiger_door_2") - 12.0) < 1e-6);
  CHECK(std::abs(pomdp("tiger_door_3") - 10.0) < 1e-6);
}

TEST_CASE("greedy policies break ties toward the lowest action") {
  // Every action is equivalent on a chain.
  const Model model(chain(3, -1.0, 0.9, 4));
  const SolvedPolicy sol = optimal_mdp_policy(model);
  for (int a : sol.policy.argmax_actions()) CHECK(a == 0);
}

TEST_CASE("policy evaluation") {
  SUBCASE("absorbing zero reward state") {
    const Model model(chain(1, 0.0, 0.9));
    const ValueTable vt = policy_evaluation(model, TabularPolicy::uniform(Domain::kState, 2, 2), ValueDomain::kState);
    CHECK(vt.V[1] == doctest::Approx(0.0));
    CHECK(vt.V[0] == doctest::Approx(0.0));
  }
  SUBCASE("two step chain") {
    const Model model(chain(2, 1.0, 0.5));
    const ValueTable vt = policy_evaluation(model, TabularPolicy::uniform(Domain::kState, 3, 2), ValueDomain::kState);
    CHECK(vt.V[0] == doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("always cross on frozen lake") {
    const Model model(env::make_pair("frozen_lake"));
    const double expected = (6.0 / 9.0) * 12.0 + (1.0 / 9.0) * (-102.0 - 104.0 - 106.0);
    CHECK(undiscounted_return(model, always(model, env::kEast)) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(-80.0 / 3.0));
  }
  SUBCASE("V is the policy average of Q") {
    Rng rng(9);
    for (const std::string name : {"tiger_door_1", "frozen_lake"}) {
      const Model model(env::make_pair(name));
      const TabularPolicy pi = random_policy(rng, Domain::kState, model.num_states(), 4);
      const Mat probs = node_policy(model, pi);
      const ValueTable joint = evaluate_joint(model, probs);
      for (int n = 0; n < model.num_nodes(); ++n)
        CHECK(std::abs(joint.V[n] - probs.row(n).dot(joint.Q.row(n))) < 1e-9);
      const ValueTable st = policy_evaluation(model, pi, ValueDomain::kState);
      for (int s = 0; s < model.num_states(); ++s)
        CHECK(std::abs(st.V[s] - pi.probs.row(s).dot(st.Q.row(s))) < 1e-9);
    }
  }
  SUBCASE("uniform policy return agrees with simulation") {
    const env::ProcessPair pair = env::make_pair("tiger_door_2");
    const Model model(pair);
    const double exact = undiscounted_return(model, TabularPolicy::uniform(Domain::kState, model.num_states(), 4));
    Rng rng(17);
    const int episodes = 100000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int e = 0; e < episodes; ++e) {
      env::StateId s = env::sample_initial(pair, rng);
      double ret = 0.0;
      for (int t = 0; t < pair.horizon() && !pair.is_terminal(s); ++t) {
        const env::Outcome out = pair.transition(s, static_cast<int>(uniform01(rng) * 4));
        ret += out.reward;
        s = out.next;
      }
      sum += ret;
      sum_sq += ret * ret;
    }
    const double mean = sum / episodes;
    const double se = std::sqrt((sum_sq / episodes - mean * mean) / episodes);
    CHECK(std::abs(mean - exact) < 3.0 * se);
  }
}

TEST_CASE("identifiability reports") {
  const IdentifiabilityReport control = identifiability_report(Model(env::make_pair("frozen_lake_observed")));
  CHECK(control.identifiable);
  CHECK(control.divergence == doctest::Approx(0.0).epsilon(1e-12));

  const IdentifiabilityReport fl = identifiability_report(Model(env::make_pair("frozen_lake")));
  CHECK_FALSE(fl.identifiable);
  CHECK(fl.return_gap == doctest::Approx(4.0 - fl.fixed_point_value));

  const IdentifiabilityReport td0 = identifiability_report(Model(env::make_pair("tiger_door_0")));
  CHECK_FALSE(td0.identifiable);
  CHECK(td0.return_gap == doctest::Approx(56.0).epsilon(1e-9));
}

TEST_CASE("optimal pomdp policy rejects histories the window cannot see") {
  // Two states alias at t = 0; a revealing first step leads to different
  // aliased states, so the best action after the reveal depends on history.
  FinitePair p;
  p.num_states = 5;
  p.num_actions = 2;
  p.gamma = 0.9;
  p.init = {0.5, 0.5, 0.0, 0.0, 0.0};
  const int T = 4;
  p.edges.resize(10);
  // 0, 1: any action moves to 2 or 3 (same observation), no reward.
  for (int a = 0; a < 2; ++a) {
    p.edges[0 * 2 + a] = {{2, 1.0, 0.0}};
    p.edges[1 * 2 + a] = {{3, 1.0, 0.0}};
  }
  p.edges[2 * 2 + 0] = {{T, 1.0, 1.0}};
  p.edges[2 * 2 + 1] = {{T, 1.0, -1.0}};
  p.edges[3 * 2 + 0] = {{T, 1.0, -1.0}};
  p.edges[3 * 2 + 1] = {{T, 1.0, 1.0}};
  p.edges[T * 2 + 0] = {{T, 1.0, 0.0}};
  p.edges[T * 2 + 1] = {{T, 1.0, 0.0}};
  // 0 and 1 are distinguishable; 2 and 3 are not.
  p.observations = {one_hot(3, 0), one_hot(3, 1), one_hot(3, 2), one_hot(3, 2), Vec::Zero(3)};
  CHECK_THROWS_AS(optimal_pomdp_policy(Model(p, 1)), UnsupportedError);
  // A window of two sees the earlier observation and resolves it.
  CHECK(optimal_pomdp_policy(Model(p, 2)).value == doctest::Approx(1.0));
}

TEST_CASE("belief-wise AIL minimizer is the implicit policy") {
  Rng rng(31337);
  for (int trial = 0; trial < 50; ++trial) {
    CAPTURE(trial);
    const int ns = 3 + static_cast<int>(rng() % 5);
    const int no = 1 + static_cast<int>(rng() % 3);
    const int na = 2 + static_cast<int>(rng() % 3);
    const Model model(random_pair(rng, ns, no, na));
    const TabularPolicy expert = random_policy(rng, Domain::kState, model.num_states(), na);
    const TabularPolicy reference = random_policy(rng, Domain::kBelief, model.num_beliefs(), na);
    const OccupancyTable occ = occupancy(model, node_policy(model, reference));
    const ImplicitPolicy hat = implicit_policy(model, expert, occ);

    // Stationarity on the simplex: for F = -sum_a c_a log q_a + const the
    // minimizer satisfies c_a / q_a = sum_a c_a for every action.
    for (int b = 0; b < model.num_beliefs(); ++b) {
      if (hat.zero_mass[b]) continue;
      Vec c = Vec::Zero(na);
      for (int n : model.nodes_of_belief(b)) c += occ.mass[n] * expert.probs.row(model.state_of(n)).transpose();
      const double total = c.sum();
      if (total <= 0.0) continue;
      for (int a = 0; a < na; ++a) {
        const double q = hat.policy.probs(b, a);
        CHECK(std::abs(c[a] / total - q) < 1e-10);
      }
    }
    // Any perturbation raises the objective.
    const double f0 = ail_objective(model, expert, hat.policy, occ);
    for (int k = 0; k < 5; ++k) {
      const Mat noise = random_logits(rng, model.num_beliefs(), na, 0.05);
      Mat logits = hat.policy.probs.array().log().matrix() + noise;
      const TabularPolicy moved = est::softmax_policy(Domain::kBelief, logits);
      CHECK(ail_objective(model, expert, moved, occ) >= f0 - 1e-12);
    }
  }
}

TEST_CASE("surrogate bound") {
  SUBCASE("three-state toy, exhaustive") {
    Rng rng(4);
    const Model model(random_pair(rng, 3, 1, 2));
    const TabularPolicy trainee = TabularPolicy::uniform(Domain::kBelief, model.num_beliefs(), 2);
    const BoundCheck bc = surrogate_bound_check(model, trainee);
    CHECK(bc.exhaustive);
    CHECK(bc.holds);
    CHECK(bc.lhs <= bc.rhs + 1e-9);
  }
  SUBCASE("tight at the optimal partially observed policy") {
    const Model model(env::make_pair("tiger_door_1"));
    const TabularPolicy opt = optimal_pomdp_policy(model).policy;
    const BoundCheck bc = surrogate_bound_check(model, opt);
    CHECK(bc.holds);
    CHECK(bc.lhs == doctest::Approx(bc.rhs).epsilon(1e-9));
  }
  SUBCASE("uniform trainee on tiger door 1 has a strict gap") {
    const Model model(env::make_pair("tiger_door_1"));
    const BoundCheck bc =
        surrogate_bound_check(model, TabularPolicy::uniform(Domain::kBelief, model.num_beliefs(), 4));
    CHECK(bc.holds);
    CHECK(bc.lhs < bc.rhs - 1e-6);
  }
}

TEST_CASE("exact A2D reaches the partially observed optimum") {
  for (const std::string name : {"frozen_lake", "tiger_door_0", "tiger_door_1"}) {
    CAPTURE(name);
    const Model model(env::make_pair(name));
    const ExactA2dReport rep = exact_a2d(model);
    CHECK(rep.iterations <= 500);
    REQUIRE_FALSE(rep.values.empty());
    CHECK(std::abs(rep.values.back() - optimal_pomdp_policy(model).value) < 1e-6);
  }
}

TEST_CASE("tabular policy validation") {
  TabularPolicy bad{Domain::kState, Mat::Constant(2, 2, 0.4)};
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
  bad.probs(0, 0) = -0.2;
  bad.probs(0, 1) = 1.2;
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
  CHECK_NOTHROW(TabularPolicy::uniform(Domain::kBelief, 3, 4).validate());
}
