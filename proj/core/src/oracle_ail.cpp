#include "a2d/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace a2d::oracle {

ImplicitPolicy implicit_policy(const Model& model, const TabularPolicy& expert,
                               const OccupancyTable& occ) {
  if (expert.domain != Domain::kState) throw PreconditionError("implicit policy needs a state expert");
  const int na = model.num_actions();
  ImplicitPolicy out;
  out.policy = TabularPolicy::uniform(Domain::kBelief, model.num_beliefs(), na);
  out.zero_mass.assign(static_cast<std::size_t>(model.num_beliefs()), false);
  for (int b = 0; b < model.num_beliefs(); ++b) {
    const auto& nodes = model.nodes_of_belief(b);
    double total = 0.0;
    Vec row = Vec::Zero(na);
    for (int n : nodes) {
      total += occ.mass[n];
      row += occ.mass[n] * expert.probs.row(model.state_of(n)).transpose();
    }
    if (total > 0.0) {
      out.policy.probs.row(b) = (row / total).transpose();
    } else {
      out.zero_mass[b] = true;
    }
  }
  return out;
}

double ail_objective(const Model& model, const TabularPolicy& expert, const TabularPolicy& trainee,
                     const OccupancyTable& occ) {
  double total = 0.0;
  for (int n = 0; n < model.num_nodes(); ++n) {
    if (model.is_terminal_node(n) || occ.mass[n] <= 0.0) continue;
    const auto p = expert.probs.row(model.state_of(n));
    const auto q = trainee.probs.row(model.belief_of(n));
    double kl = 0.0;
    for (Eigen::Index a = 0; a < p.size(); ++a) {
      if (p[a] <= 0.0) continue;
      if (q[a] <= 0.0) return kInfiniteDivergence;
      kl += p[a] * std::log(p[a] / q[a]);
    }
    total += occ.mass[n] * kl;
  }
  return total;
}

namespace {

double max_row_tv(const Mat& a, const Mat& b) {
  return 0.5 * (a - b).cwiseAbs().rowwise().sum().maxCoeff();
}

double non_terminal_mass(const Model& model, const OccupancyTable& occ) {
  return occ.mass.sum() - occ.mass[model.terminal_node()];
}

}  // namespace

FixedPointReport ail_fixed_point(const Model& model, const TabularPolicy& expert, double tol,
                                 int max_iterations) {
  FixedPointReport rep;
  OccupancyTable occ = occupancy(model, node_policy(model, expert));
  rep.trainee = implicit_policy(model, expert, occ).policy;
  for (rep.iterations = 1; rep.iterations < max_iterations; ++rep.iterations) {
    occ = occupancy(model, node_policy(model, rep.trainee));
    TabularPolicy next = implicit_policy(model, expert, occ).policy;
    rep.residual = max_row_tv(next.probs, rep.trainee.probs);
    rep.trainee = std::move(next);
    if (rep.residual < tol) {
      rep.converged = true;
      ++rep.iterations;
      break;
    }
  }
  rep.value = undiscounted_return(model, rep.trainee);
  return rep;
}

IdentifiabilityReport identifiability_report(const Model& model) {
  IdentifiabilityReport rep;
  const SolvedPolicy mdp = optimal_mdp_policy(model);
  const SolvedPolicy pomdp = optimal_pomdp_policy(model);
  const FixedPointReport fp = ail_fixed_point(model, mdp.policy);
  const OccupancyTable occ = occupancy(model, node_policy(model, fp.trainee));
  rep.mdp_value = mdp.value;
  rep.pomdp_value = pomdp.value;
  rep.fixed_point_value = fp.value;
  rep.fixed_point_converged = fp.converged;
  rep.divergence = ail_objective(model, mdp.policy, fp.trainee, occ);
  const double mass = non_terminal_mass(model, occ);
  rep.normalized_divergence = mass > 0.0 ? rep.divergence / mass : 0.0;
  rep.identifiable = rep.divergence < 1e-8;
  rep.return_gap = rep.pomdp_value - rep.fixed_point_value;
  return rep;
}

// ---------------------------------------------------------------------------

Mat belief_q(const Model& model, const ValueTable& joint, const OccupancyTable& occ) {
  return project_values(model, joint, occ, ValueDomain::kBelief).Q;
}

namespace {

struct TraineeView {
  Mat rows;
  OccupancyTable occ;
  ValueTable joint;
  Mat qb;
};

TraineeView view_of(const Model& model, const TabularPolicy& trainee) {
  if (trainee.domain != Domain::kBelief) throw PreconditionError("trainee must be a belief policy");
  TraineeView v;
  v.rows = node_policy(model, trainee);
  v.occ = occupancy(model, v.rows);
  v.joint = evaluate_joint(model, v.rows);
  v.qb = belief_q(model, v.joint, v.occ);
  return v;
}

double surrogate_from_view(const Model& model, const TraineeView& v, const TabularPolicy& expert) {
  double j = 0.0;
  for (int n = 0; n < model.num_nodes(); ++n) {
    if (model.is_terminal_node(n)) continue;
    j += v.occ.mass[n] * expert.probs.row(model.state_of(n)).dot(v.qb.row(model.belief_of(n)));
  }
  return j;
}

// Per-state greedy expert for the surrogate: argmax_a sum_{n in s} d(n) Q(a, b(n)).
std::vector<int> greedy_expert(const Model& model, const TraineeView& v) {
  const int na = model.num_actions();
  std::vector<int> act(static_cast<std::size_t>(model.num_states()), 0);
  for (int s = 0; s < model.num_states(); ++s) {
    Vec score = Vec::Zero(na);
    double mass = 0.0;
    for (int n : model.nodes_of_state(s)) {
      if (model.is_terminal_node(n)) continue;
      score += v.occ.mass[n] * v.qb.row(model.belief_of(n)).transpose();
      mass += v.occ.mass[n];
    }
    if (mass <= 0.0) {
      // Unvisited: fall back to the unweighted belief values.
      for (int n : model.nodes_of_state(s))
        if (!model.is_terminal_node(n)) score += v.qb.row(model.belief_of(n)).transpose();
    }
    const double best = score.maxCoeff();
    for (int a = 0; a < na; ++a) {
      if (score[a] >= best - 1e-12 * std::max(1.0, std::abs(best))) {
        act[s] = a;
        break;
      }
    }
  }
  return act;
}

// J(theta) = E_{d^psi(s,b)} [V^{implicit}(s, b)], implicit taken under d^psi.
double implicit_return(const Model& model, const TraineeView& v, const TabularPolicy& expert) {
  const TabularPolicy hat = implicit_policy(model, expert, v.occ).policy;
  const ValueTable vt = evaluate_joint(model, node_policy(model, hat));
  double j = 0.0;
  for (int n = 0; n < model.num_nodes(); ++n)
    if (!model.is_terminal_node(n)) j += v.occ.mass[n] * vt.V[n];
  return j;
}

}  // namespace

double surrogate_objective(const Model& model, const TabularPolicy& expert,
                           const TabularPolicy& trainee) {
  return surrogate_from_view(model, view_of(model, trainee), expert);
}

BoundCheck surrogate_bound_check(const Model& model, const TabularPolicy& trainee,
                                 long long max_enumeration) {
  const int na = model.num_actions();
  const TraineeView v = view_of(model, trainee);
  BoundCheck out;

  const std::vector<int> greedy = greedy_expert(model, v);
  out.lhs = surrogate_from_view(model, v, TabularPolicy::deterministic(Domain::kState, greedy, na));

  std::vector<int> free_states;
  for (int s = 0; s < model.num_states(); ++s)
    if (s != model.pair().terminal()) free_states.push_back(s);

  double count = std::pow(static_cast<double>(na), static_cast<double>(free_states.size()));
  out.rhs = -std::numeric_limits<double>::infinity();
  if (count <= static_cast<double>(max_enumeration)) {
    out.exhaustive = true;
    std::vector<int> act(static_cast<std::size_t>(model.num_states()), 0);
    const long long total = static_cast<long long>(count);
    for (long long code = 0; code < total; ++code) {
      long long c = code;
      for (int s : free_states) {
        act[s] = static_cast<int>(c % na);
        c /= na;
      }
      out.rhs = std::max(out.rhs, implicit_return(model, v, TabularPolicy::deterministic(Domain::kState, act, na)));
      ++out.experts_enumerated;
    }
  } else {
    std::vector<TabularPolicy> candidates;
    candidates.push_back(TabularPolicy::deterministic(Domain::kState, greedy, na));
    candidates.push_back(optimal_mdp_policy(model).policy);
    try {
      const TabularPolicy pomdp = optimal_pomdp_policy(model).policy;
      // Lift: each state copies the action of its heaviest belief.
      std::vector<int> lifted(static_cast<std::size_t>(model.num_states()), 0);
      for (int s = 0; s < model.num_states(); ++s) {
        double best = -1.0;
        for (int n : model.nodes_of_state(s)) {
          if (model.is_terminal_node(n) || v.occ.mass[n] <= best) continue;
          best = v.occ.mass[n];
          lifted[s] = pomdp.argmax_actions()[model.belief_of(n)];
        }
      }
      candidates.push_back(TabularPolicy::deterministic(Domain::kState, lifted, na));
    } catch (const UnsupportedError&) {
    }
    for (const TabularPolicy& c : candidates) {
      out.rhs = std::max(out.rhs, implicit_return(model, v, c));
      ++out.experts_enumerated;
    }
    out.warning = "expert class restricted to greedy-certified candidates; rhs is a lower estimate";
  }
  out.holds = out.lhs <= out.rhs + 1e-9;
  return out;
}

namespace {

// argmax_theta J(theta) under a fixed trainee occupancy. Exhaustive over
// deterministic experts when small enough, otherwise alternating greedy
// proposals and single-state coordinate moves, each accepted only if J
// strictly improves.
std::vector<int> maximize_implicit_return(const Model& model, const TraineeView& v,
                                          std::vector<int> start, long long max_enumeration,
                                          bool& exhaustive) {
  const int na = model.num_actions();
  auto J = [&](const std::vector<int>& act) {
    return implicit_return(model, v, TabularPolicy::deterministic(Domain::kState, act, na));
  };

  std::vector<int> free_states;
  for (int s = 0; s < model.num_states(); ++s) {
    if (s == model.pair().terminal()) continue;
    double mass = 0.0;
    for (int n : model.nodes_of_state(s)) mass += v.occ.mass[n];
    if (mass > 0.0) free_states.push_back(s);
  }

  const double count = std::pow(static_cast<double>(na), static_cast<double>(free_states.size()));
  exhaustive = count <= static_cast<double>(max_enumeration);
  if (exhaustive) {
    std::vector<int> best = start;
    double best_j = J(start);
    std::vector<int> act = start;
    const long long total = static_cast<long long>(count);
    for (long long code = 0; code < total; ++code) {
      long long c = code;
      for (int s : free_states) {
        act[s] = static_cast<int>(c % na);
        c /= na;
      }
      const double j = J(act);
      if (j > best_j + 1e-12) {
        best_j = j;
        best = act;
      }
    }
    return best;
  }

  std::vector<int> cur = std::move(start);
  double cur_j = J(cur);
  for (bool improved = true; improved;) {
    improved = false;
    {
      const TabularPolicy hat =
          implicit_policy(model, TabularPolicy::deterministic(Domain::kState, cur, na), v.occ).policy;
      TraineeView hv;
      hv.occ = v.occ;
      hv.joint = evaluate_joint(model, node_policy(model, hat));
      hv.qb = belief_q(model, hv.joint, v.occ);
      const std::vector<int> prop = greedy_expert(model, hv);
      const double j = J(prop);
      if (j > cur_j + 1e-12) {
        cur = prop;
        cur_j = j;
        improved = true;
      }
    }
    for (int s : free_states) {
      for (int a = 0; a < na; ++a) {
        if (a == cur[s]) continue;
        const int keep = cur[s];
        cur[s] = a;
        const double j = J(cur);
        if (j > cur_j + 1e-12) {
          cur_j = j;
          improved = true;
        } else {
          cur[s] = keep;
        }
      }
    }
  }
  return cur;
}

}  // namespace

ExactA2dReport exact_a2d(const Model& model, int max_iterations, long long max_enumeration) {
  const int na = model.num_actions();
  ExactA2dReport rep;
  rep.trainee = TabularPolicy::uniform(Domain::kBelief, model.num_beliefs(), na);
  std::vector<int> expert;
  bool all_exhaustive = true;
  for (rep.iterations = 0; rep.iterations < max_iterations;) {
    const TraineeView v = view_of(model, rep.trainee);
    if (expert.empty()) expert = greedy_expert(model, v);
    bool exhaustive = false;
    expert = maximize_implicit_return(model, v, expert, max_enumeration, exhaustive);
    all_exhaustive = all_exhaustive && exhaustive;
    rep.expert = TabularPolicy::deterministic(Domain::kState, expert, na);
    TabularPolicy next = implicit_policy(model, rep.expert, v.occ).policy;
    ++rep.iterations;
    const double change = max_row_tv(next.probs, rep.trainee.probs);
    rep.trainee = std::move(next);
    rep.values.push_back(undiscounted_return(model, rep.trainee));
    if (change < 1e-12) {
      rep.converged = true;
      break;
    }
  }
  if (!all_exhaustive)
    rep.warning = "inner maximization used coordinate ascent; optimality of each step is not certified";
  if (!rep.converged) {
    if (!rep.warning.empty()) rep.warning += "; ";
    rep.warning += "iteration limit reached before the trainee stopped changing";
  }
  return rep;
}

}  // namespace a2d::oracle
