#include "doctest.h"
#include "support.hpp"

#include "a2d/envpair.hpp"
#include "a2d/estimators.hpp"
#include "a2d/oracle.hpp"

#include <cmath>

using namespace a2d;
using namespace a2d::est;
using namespace testing_support;
using oracle::Domain;
using oracle::Model;
using oracle::TabularPolicy;

namespace {

env::TrajectoryBatch from_rewards(const std::vector<double>& rewards, bool terminal_end = true) {
  env::TrajectoryBatch b;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    env::StepRecord st;
    st.r = rewards[i];
    st.t = static_cast<int>(i);
    st.done = terminal_end && i + 1 == rewards.size();
    st.truncated = !terminal_end && i + 1 == rewards.size();
    b.steps.push_back(st);
  }
  return b;
}

// Several episodes, some ending in a terminal and some cut off.
env::TrajectoryBatch random_batch(Rng& rng, int n) {
  env::TrajectoryBatch b;
  int t = 0;
  for (int i = 0; i < n; ++i) {
    env::StepRecord st;
    st.r = 10.0 * uniform01(rng) - 5.0;
    st.t = t;
    const double u = uniform01(rng);
    st.done = u < 0.1;
    st.truncated = !st.done && (u < 0.15 || i + 1 == n);
    t = st.done || st.truncated ? 0 : t + 1;
    b.steps.push_back(st);
  }
  return b;
}

Vec random_vec(Rng& rng, int n, double scale) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * (2.0 * uniform01(rng) - 1.0);
  return v;
}

// next_values[i] must equal values[i + 1] inside an episode.
Vec chained_next(const env::TrajectoryBatch& b, const Vec& values, Rng& rng) {
  Vec next(values.size());
  for (std::size_t i = 0; i < b.size(); ++i)
    next[static_cast<Eigen::Index>(i)] =
        continues(b, i) ? values[static_cast<Eigen::Index>(i + 1)] : 10.0 * uniform01(rng);
  return next;
}

}  // namespace

TEST_CASE("discounted returns") {
  CHECK(discounted_returns(from_rewards({1, 1}), 1.0) == (Vec(2) << 2, 1).finished());
  CHECK(discounted_returns(from_rewards({1, 1}), 0.5) == (Vec(2) << 1.5, 1).finished());
  CHECK(discounted_returns(from_rewards({-100}), 0.995) == (Vec(1) << -100).finished());

  // Truncation bootstraps; a true terminal does not.
  const Vec boot = (Vec(2) << 0.0, 4.0).finished();
  const env::TrajectoryBatch cut = from_rewards({1, 1}, false);
  CHECK(discounted_returns(cut, 0.5, &boot)[1] == doctest::Approx(3.0));
  CHECK(discounted_returns(from_rewards({1, 1}), 0.5, &boot)[1] == doctest::Approx(1.0));
}

TEST_CASE("gae examples") {
  const env::TrajectoryBatch b = from_rewards({1, 1});
  const Vec zero = Vec::Zero(2);
  CHECK(gae(b, zero, zero, 1.0, 1.0) == (Vec(2) << 2, 1).finished());
  CHECK_THROWS_AS(gae(b, zero, zero, 1.0, 1.5), ConfigError);
  CHECK_THROWS_AS(gae(b, zero, zero, 1.0, -0.1), ConfigError);
}

TEST_CASE("gae endpoint identities on random batches") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const env::TrajectoryBatch b = random_batch(rng, 200);
    const Vec V = random_vec(rng, 200, 20.0);
    const Vec Vn = chained_next(b, V, rng);
    const double g = 0.9 + 0.09 * uniform01(rng);

    const Vec a0 = gae(b, V, Vn, g, 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double delta = b.steps[i].r + (b.steps[i].done ? 0.0 : g * Vn[k]) - V[k];
      CHECK(std::abs(a0[k] - delta) < 1e-12);
    }
    const Vec a1 = gae(b, V, Vn, g, 1.0);
    const Vec G = discounted_returns(b, g, &Vn);
    CHECK((a1 - (G - V)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("importance weights") {
  const Vec lp = (Vec(3) << -0.1, -2.0, -1.0).finished();
  CHECK(importance_weights(lp, lp) == Vec::Ones(3));

  const Vec w = importance_weights((Vec(1) << std::log(0.8)).finished(), (Vec(1) << std::log(0.2)).finished());
  CHECK(w[0] == doctest::Approx(4.0).epsilon(1e-12));

  WeightStats stats;
  const Vec capped = importance_weights((Vec(2) << 0.0, 0.0).finished(), (Vec(2) << std::log(0.01), -30.0).finished(),
                                        5.0, &stats);
  CHECK(capped.maxCoeff() == 5.0);
  CHECK(stats.max_weight == 5.0);
  CHECK(stats.floor_hits == 1);

  // Under behavior sampling the weights average to one.
  Rng rng(13);
  const Vec q = (Vec(4) << 0.1, 0.2, 0.3, 0.4).finished();
  const Vec p = (Vec(4) << 0.4, 0.3, 0.2, 0.1).finished();
  const int n = 200000;
  Vec target(n), behavior(n);
  for (int i = 0; i < n; ++i) {
    const int a = sample_categorical(q, rng);
    target[i] = std::log(p[a]);
    behavior[i] = std::log(q[a]);
  }
  const Vec ws = importance_weights(target, behavior);
  const double mean = ws.mean();
  const double se = std::sqrt((ws.array() - mean).square().mean() / n);
  CHECK(std::abs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("entropy shaping") {
  const Vec adv = (Vec(3) << 1.0, -2.0, 0.5).finished();
  const Vec lp = Vec::Constant(3, std::log(0.25));
  CHECK(shape_with_entropy(adv, lp, 0.0) == adv);
  const Vec shaped = shape_with_entropy(adv, lp, 1.0);
  for (int i = 0; i < 3; ++i) CHECK(shaped[i] == doctest::Approx(adv[i] + std::log(4.0)));
  CHECK(shape_with_entropy(adv, Vec::Constant(3, -30.0), 10.0).allFinite());
  CHECK_THROWS_AS(shape_with_entropy(adv, lp, -1.0), ConfigError);
}

TEST_CASE("advantage normalization") {
  Vec c = Vec::Constant(5, 3.0);
  CHECK(normalize_advantages(c));
  CHECK(c.cwiseAbs().maxCoeff() == 0.0);

  Vec pm = (Vec(2) << -1.0, 1.0).finished();
  normalize_advantages(pm);
  CHECK(pm[0] == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(pm[1] == doctest::Approx(1.0).epsilon(1e-7));

  Rng rng(14);
  Vec r = random_vec(rng, 1000, 50.0);
  normalize_advantages(r);
  CHECK(std::abs(r.mean()) < 1e-7);
  CHECK(std::abs(std::sqrt(r.array().square().mean()) - 1.0) < 1e-7);

  Vec one = Vec::Constant(1, 7.0);
  CHECK_FALSE(normalize_advantages(one));
  CHECK(one[0] == 7.0);
}

TEST_CASE("mixture value is the convex combination") {
  const MixtureValue m{0.3};
  CHECK(m(10.0, -5.0) == 0.3 * 10.0 + 0.7 * -5.0);
  const Vec a = (Vec(2) << 1.0, 2.0).finished();
  const Vec b = (Vec(2) << -1.0, 4.0).finished();
  CHECK(MixtureValue{0.0}(a, b) == b);
  CHECK(MixtureValue{1.0}(a, b) == a);
}

TEST_CASE("expected GAE at the endpoints") {
  Rng rng(15);
  const Model model(env::make_pair("tiger_door_2"));
  const TabularPolicy pi = softmax_policy(Domain::kBelief, random_logits(rng, model.num_beliefs(), 4));
  const Mat probs = oracle::node_policy(model, pi);
  const oracle::ValueTable vt = oracle::evaluate_joint(model, probs);
  const Vec V = random_vec(rng, model.num_nodes(), 30.0);

  // lambda = 1 telescopes to Q - V; lambda = 0 is the one-step residual.
  const Mat a1 = expected_gae(model, probs, V, 1.0);
  for (int n = 0; n < model.num_nodes(); ++n) {
    if (model.is_terminal_node(n)) continue;
    for (int a = 0; a < 4; ++a) CHECK(std::abs(a1(n, a) - (vt.Q(n, a) - V[n])) < 1e-8);
  }
  // With the true values every lambda gives Q - V.
  const Mat ah = expected_gae(model, probs, vt.V, 0.5);
  for (int n = 0; n < model.num_nodes(); ++n) {
    if (model.is_terminal_node(n)) continue;
    for (int a = 0; a < 4; ++a) CHECK(std::abs(ah(n, a) - (vt.Q(n, a) - vt.V[n])) < 1e-8);
  }
}

TEST_CASE("a constant baseline shift leaves the expected expert gradient unchanged") {
  Rng rng(16);
  for (const std::string name : {"tiger_door_1", "tiger_door_3"}) {
    CAPTURE(name);
    const Model model(env::make_pair(name));
    const TabularPolicy trainee = softmax_policy(Domain::kBelief, random_logits(rng, model.num_beliefs(), 4));
    const Mat expert_logits = random_logits(rng, model.num_states(), 4);
    const Mat behavior = oracle::node_policy(model, trainee);
    const oracle::OccupancyTable occ = oracle::occupancy(model, behavior);
    const Vec V = random_vec(rng, model.num_nodes(), 30.0);
    Vec shifted = V.array() + 17.0;
    shifted[model.terminal_node()] = V[model.terminal_node()];

    // At lambda = 1 the shift moves every advantage at a node by the same
    // amount, which the score function averages away.
    const Mat g0 = expert_gradient(model, expert_logits, occ.mass, expected_gae(model, behavior, V, 1.0));
    const Mat g1 = expert_gradient(model, expert_logits, occ.mass, expected_gae(model, behavior, shifted, 1.0));
    CHECK((g0 - g1).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, g0.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("expected expert gradient equals the derivative of the surrogate") {
  Rng rng(17);
  for (const std::string name : {"tiger_door_1", "tiger_door_2", "frozen_lake"}) {
    CAPTURE(name);
    const Model model(env::make_pair(name));
    const TabularPolicy trainee = softmax_policy(Domain::kBelief, random_logits(rng, model.num_beliefs(), 4));
    const Mat logits = random_logits(rng, model.num_states(), 4);

    const Mat probs = oracle::node_policy(model, trainee);
    const oracle::OccupancyTable occ = oracle::occupancy(model, probs);
    const oracle::ValueTable joint = oracle::evaluate_joint(model, probs);
    const Mat qb = oracle::belief_q(model, joint, occ);
    const Mat g = expert_gradient(model, logits, occ.mass, nodes_from_beliefs(model, qb));

    const int rows = static_cast<int>(logits.rows());
    const Vec fd = central_difference(
        [&](const Vec& x) {
          return oracle::surrogate_objective(model, softmax_policy(Domain::kState, unflatten(x, rows, 4)), trainee);
        },
        flatten(logits));
    CHECK(relative_error(flatten(g), fd) < 1e-5);
  }
}

TEST_CASE("closed-form AIL gradient equals the derivative of F") {
  Rng rng(18);
  for (const std::string name : {"tiger_door_0", "frozen_lake"}) {
    CAPTURE(name);
    const Model model(env::make_pair(name));
    const TabularPolicy expert = softmax_policy(Domain::kState, random_logits(rng, model.num_states(), 4));
    const Mat logits = random_logits(rng, model.num_beliefs(), 4);
    const oracle::OccupancyTable occ =
        oracle::occupancy(model, oracle::node_policy(model, softmax_policy(Domain::kBelief, logits)));
    const Mat g = ail_gradient(model, expert, logits, occ);

    const int rows = static_cast<int>(logits.rows());
    const Vec fd = central_difference(
        [&](const Vec& x) {
          return oracle::ail_objective(model, expert, softmax_policy(Domain::kBelief, unflatten(x, rows, 4)), occ);
        },
        flatten(logits));
    CHECK(relative_error(flatten(g), fd) < 1e-5);

    // The same gradient as the expectation of the single-sample estimator.
    Mat sampled = Mat::Zero(g.rows(), g.cols());
    const TabularPolicy q = softmax_policy(Domain::kBelief, logits);
    for (int n = 0; n < model.num_nodes(); ++n) {
      if (model.is_terminal_node(n)) continue;
      const int b = model.belief_of(n);
      for (int a = 0; a < 4; ++a) {
        Eigen::RowVectorXd score = -q.probs.row(b);
        score[a] += 1.0;
        sampled.row(b) -= occ.mass[n] * expert.probs(model.state_of(n), a) * score;
      }
    }
    CHECK((sampled - g).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Monte Carlo advantages let the expert cheat on tiger door 1") {
  const env::ProcessPair pair = env::make_pair("tiger_door_1");
  const Model model(pair);
  const oracle::SolvedPolicy mdp = oracle::optimal_mdp_policy(model);
  const oracle::FixedPointReport fp = oracle::ail_fixed_point(model, mdp.policy);
  const Mat behavior = oracle::node_policy(model, fp.trainee);
  const oracle::OccupancyTable occ = oracle::occupancy(model, behavior);
  const oracle::ValueTable joint = oracle::evaluate_joint(model, behavior);

  // Softened copy of the fixed-point expert so the score is informative.
  Mat logits = Mat::Zero(model.num_states(), 4);
  for (int s = 0; s < model.num_states(); ++s) logits(s, mdp.policy.argmax_actions()[s]) = 2.0;

  // Direction: at each start state, raise the action that walks straight
  // into that configuration's goal.
  Mat cross = Mat::Zero(model.num_states(), 4);
  for (env::StateId s : pair.initial_states())
    for (int a = 0; a < 4; ++a) {
      const env::Outcome out = pair.transition(s, a);
      if (out.done && out.reward > 0.0) cross(s, a) = 1.0;
    }
  REQUIRE(cross.sum() == 2.0);

  // lambda = 1 advantages condition on the true state through the return.
  const Vec Vb = oracle::project_values(model, joint, occ, oracle::ValueDomain::kBelief).V;
  Vec V(model.num_nodes());
  for (int n = 0; n < model.num_nodes(); ++n) V[n] = model.is_terminal_node(n) ? 0.0 : Vb[model.belief_of(n)];
  const Mat mc = expert_gradient(model, logits, occ.mass, expected_gae(model, behavior, V, 1.0));
  const Mat qb = oracle::belief_q(model, joint, occ);
  const Mat exact = expert_gradient(model, logits, occ.mass, nodes_from_beliefs(model, qb));

  const double mc_dot = (mc.array() * cross.array()).sum();
  const double exact_dot = (exact.array() * cross.array()).sum();
  CHECK(mc_dot > 0.0);
  CHECK(exact_dot < mc_dot);
}
