#include "a2d/oracle.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <deque>

namespace a2d::oracle {

TabularPolicy TabularPolicy::uniform(Domain domain, int rows, int num_actions) {
  return {domain, Mat::Constant(rows, num_actions, 1.0 / num_actions)};
}

TabularPolicy TabularPolicy::deterministic(Domain domain, const std::vector<int>& actions,
                                           int num_actions) {
  TabularPolicy p{domain, Mat::Zero(static_cast<Eigen::Index>(actions.size()), num_actions)};
  for (std::size_t i = 0; i < actions.size(); ++i) p.probs(static_cast<Eigen::Index>(i), actions[i]) = 1.0;
  return p;
}

void TabularPolicy::validate() const {
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if ((probs.row(i).array() < 0.0).any())
      throw PreconditionError("policy row " + std::to_string(i) + " has negative entries");
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-12)
      throw PreconditionError("policy row " + std::to_string(i) + " does not sum to one");
  }
}

std::vector<int> TabularPolicy::argmax_actions(double tol) const {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()), 0);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const double best = probs.row(i).maxCoeff();
    for (Eigen::Index a = 0; a < probs.cols(); ++a) {
      if (probs(i, a) >= best - tol) {
        out[static_cast<std::size_t>(i)] = static_cast<int>(a);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void FinitePair::validate() const {
  if (num_states < 1 || num_actions < 1) throw PreconditionError("finite pair has no states or actions");
  if (init.size() != static_cast<std::size_t>(num_states) ||
      edges.size() != static_cast<std::size_t>(num_states) * num_actions ||
      observations.size() != static_cast<std::size_t>(num_states))
    throw PreconditionError("finite pair tables have inconsistent sizes");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    double total = 0.0;
    for (const Edge& e : edges[i]) {
      if (e.next < 0 || e.next >= num_states || e.prob < 0.0)
        throw PreconditionError("finite pair edge out of range");
      total += e.prob;
    }
    if (std::abs(total - 1.0) > 1e-12) throw PreconditionError("transition row does not sum to one");
  }
  if (init[terminal()] != 0.0) throw PreconditionError("terminal state has initial mass");
}

FinitePair to_finite(const env::ProcessPair& pair) {
  FinitePair f;
  f.num_states = pair.num_states();
  f.num_actions = pair.num_actions();
  f.gamma = pair.gamma();
  f.horizon = pair.horizon();
  f.init = pair.init_dist();
  f.edges.resize(static_cast<std::size_t>(f.num_states) * f.num_actions);
  f.observations.reserve(f.num_states);
  for (env::StateId s = 0; s < f.num_states; ++s) {
    f.observations.push_back(pair.observe(s));
    for (int a = 0; a < f.num_actions; ++a) {
      auto& out = f.edges[static_cast<std::size_t>(s) * f.num_actions + a];
      for (const auto& [next, p] : pair.transition_probs(s, a))
        out.push_back({next, p, pair.reward(s, a, next)});
    }
  }
  return f;
}

Model::Model(const env::ProcessPair& pair, int window) : Model(to_finite(pair), window) {}

Model::Model(FinitePair pair, int window) : pair_(std::move(pair)), window_(window) {
  if (window < 1) throw ConfigError("belief window must be >= 1");
  pair_.validate();
  const int na = pair_.num_actions;
  const int od = pair_.obs_dim();
  const env::StateId term = pair_.terminal();

  std::map<std::pair<env::StateId, int>, int> node_index;
  std::vector<env::BeliefWindow> node_window;

  auto get_node = [&](env::StateId s, const env::BeliefWindow& b) {
    const int bid = intern_belief(b.vec());
    const auto key = std::make_pair(s, bid);
    const auto it = node_index.find(key);
    if (it != node_index.end()) return it->second;
    const int id = static_cast<int>(node_state_.size());
    node_index.emplace(key, id);
    node_state_.push_back(s);
    node_belief_.push_back(bid);
    node_window.push_back(b);
    return id;
  };

  terminal_node_ = get_node(term, env::BeliefWindow(window, od, na));

  std::vector<std::pair<int, double>> init_mass;
  for (env::StateId s = 0; s < pair_.num_states; ++s) {
    if (pair_.init[s] <= 0.0) continue;
    const int n = get_node(s, env::BeliefWindow::initial(window, pair_.observations[s], na));
    init_mass.emplace_back(n, pair_.init[s]);
  }

  for (std::size_t n = 0; n < node_state_.size(); ++n) {
    succ_.resize((n + 1) * na);
    const env::StateId s = node_state_[n];
    for (int a = 0; a < na; ++a) {
      auto& out = succ_[n * na + a];
      if (s == term) {
        out.push_back({static_cast<int>(n), 1.0, 0.0});
        continue;
      }
      for (const FinitePair::Edge& e : pair_.out(s, a)) {
        int next;
        if (e.next == term) {
          next = terminal_node_;
        } else {
          // Copy first: get_node may grow node_window.
          const env::BeliefWindow here = node_window[n];
          next = get_node(e.next, env::belief_update(here, pair_.observations[e.next], a));
        }
        out.push_back({next, e.prob, e.reward});
      }
    }
  }

  init_ = Vec::Zero(num_nodes());
  for (const auto& [n, m] : init_mass) init_[n] += m;

  belief_nodes_.assign(belief_vecs_.size(), {});
  state_nodes_.assign(static_cast<std::size_t>(pair_.num_states), {});
  for (int n = 0; n < num_nodes(); ++n) {
    state_nodes_[node_state_[n]].push_back(n);
    if (n != terminal_node_) belief_nodes_[node_belief_[n]].push_back(n);
  }
}

int Model::intern_belief(const Vec& v) {
  std::vector<double> key(v.data(), v.data() + v.size());
  const auto it = belief_index_.find(key);
  if (it != belief_index_.end()) return it->second;
  const int id = static_cast<int>(belief_vecs_.size());
  belief_index_.emplace(std::move(key), id);
  belief_vecs_.push_back(v);
  return id;
}

std::optional<int> Model::find_belief(const Vec& v) const {
  const std::vector<double> key(v.data(), v.data() + v.size());
  const auto it = belief_index_.find(key);
  if (it == belief_index_.end()) return std::nullopt;
  return it->second;
}

double Model::expected_reward(int node, int action) const {
  double r = 0.0;
  for (const Successor& sc : successors(node, action)) r += sc.prob * sc.reward;
  return r;
}

// ---------------------------------------------------------------------------

Mat node_policy(const Model& model, const TabularPolicy& policy) {
  const int na = model.num_actions();
  if (policy.probs.cols() != na) throw PreconditionError("policy has wrong action count");
  const int expected_rows = policy.domain == Domain::kState ? model.num_states() : model.num_beliefs();
  if (policy.rows() != expected_rows) throw PreconditionError("policy has wrong row count for its domain");
  Mat out(model.num_nodes(), na);
  for (int n = 0; n < model.num_nodes(); ++n) {
    if (model.is_terminal_node(n)) {
      out.row(n).setConstant(1.0 / na);
      continue;
    }
    const int row = policy.domain == Domain::kState ? model.state_of(n) : model.belief_of(n);
    out.row(n) = policy.probs.row(row);
  }
  return out;
}

Mat node_policy(const Model& model, const TabularPolicy& expert, const TabularPolicy& trainee,
                double beta) {
  if (beta < 0.0 || beta > 1.0) throw PreconditionError("beta must lie in [0, 1]");
  if (expert.domain != Domain::kState || trainee.domain != Domain::kBelief)
    throw PreconditionError("mixture needs a state expert and a belief trainee");
  return beta * node_policy(model, expert) + (1.0 - beta) * node_policy(model, trainee);
}

SpMat transition_matrix(const Model& model, const Mat& node_probs) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(model.num_nodes()) * model.num_actions());
  for (int n = 0; n < model.num_nodes(); ++n) {
    for (int a = 0; a < model.num_actions(); ++a) {
      const double pa = node_probs(n, a);
      if (pa == 0.0) continue;
      for (const Successor& sc : model.successors(n, a)) trip.emplace_back(n, sc.node, pa * sc.prob);
    }
  }
  SpMat P(model.num_nodes(), model.num_nodes());
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

namespace {

Vec solve_sparse(const SpMat& A, const Vec& rhs) {
  Eigen::SparseLU<SpMat> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw UnsupportedError("sparse factorization failed");
  Vec x = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw UnsupportedError("sparse solve failed");
  return x;
}

SpMat identity(int n) {
  SpMat I(n, n);
  I.setIdentity();
  return I;
}

}  // namespace

// ---------------------------------------------------------------------------

Vec OccupancyTable::state_marginal(const Model& model) const {
  Vec out = Vec::Zero(model.num_states());
  for (int n = 0; n < model.num_nodes(); ++n) out[model.state_of(n)] += mass[n];
  return out;
}

Vec OccupancyTable::belief_marginal(const Model& model) const {
  Vec out = Vec::Zero(model.num_beliefs());
  for (int n = 0; n < model.num_nodes(); ++n) out[model.belief_of(n)] += mass[n];
  return out;
}

Vec OccupancyTable::conditional_given_belief(const Model& model, int belief) const {
  const auto& nodes = model.nodes_of_belief(belief);
  Vec out(static_cast<Eigen::Index>(nodes.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = mass[nodes[i]];
    total += mass[nodes[i]];
  }
  if (total > 0.0) out /= total;
  return out;
}

OccupancyTable occupancy(const Model& model, const Mat& node_probs) {
  const double g = model.gamma();
  const SpMat P = transition_matrix(model, node_probs);
  const SpMat A = identity(model.num_nodes()) - g * SpMat(P.transpose());
  OccupancyTable occ;
  occ.mass = solve_sparse(A, (1.0 - g) * model.init());
  occ.mass = occ.mass.cwiseMax(0.0);
  return occ;
}

OccupancyTable occupancy_truncated(const Model& model, const Mat& node_probs, double eps) {
  const double g = model.gamma();
  const SpMat Pt = SpMat(transition_matrix(model, node_probs).transpose());
  Vec q = model.init();
  Vec d = Vec::Zero(model.num_nodes());
  double coeff = 1.0;
  while (coeff >= eps) {
    d += (1.0 - g) * coeff * q;
    q = Pt * q;
    coeff *= g;
  }
  OccupancyTable occ;
  occ.mass = d;
  occ.truncation_error = coeff;
  return occ;
}

// ---------------------------------------------------------------------------

ValueTable evaluate_joint(const Model& model, const Mat& node_probs) {
  const double g = model.gamma();
  const int nn = model.num_nodes();
  const int na = model.num_actions();
  Vec R(nn);
  for (int n = 0; n < nn; ++n) {
    double r = 0.0;
    for (int a = 0; a < na; ++a) r += node_probs(n, a) * model.expected_reward(n, a);
    R[n] = r;
  }
  const SpMat P = transition_matrix(model, node_probs);
  ValueTable vt;
  vt.domain = ValueDomain::kJoint;
  vt.V = solve_sparse(identity(nn) - g * P, R);
  vt.Q.resize(nn, na);
  for (int n = 0; n < nn; ++n) {
    for (int a = 0; a < na; ++a) {
      double q = 0.0;
      for (const Successor& sc : model.successors(n, a)) q += sc.prob * (sc.reward + g * vt.V[sc.node]);
      vt.Q(n, a) = q;
    }
  }
  return vt;
}

ValueTable project_values(const Model& model, const ValueTable& joint, const OccupancyTable& occ,
                          ValueDomain domain) {
  if (domain == ValueDomain::kJoint) return joint;
  const int rows = domain == ValueDomain::kState ? model.num_states() : model.num_beliefs();
  ValueTable out;
  out.domain = domain;
  out.V = Vec::Zero(rows);
  out.Q = Mat::Zero(rows, model.num_actions());
  for (int r = 0; r < rows; ++r) {
    const auto& nodes = domain == ValueDomain::kState ? model.nodes_of_state(r) : model.nodes_of_belief(r);
    if (nodes.empty()) continue;
    double total = 0.0;
    for (int n : nodes) total += occ.mass[n];
    for (int n : nodes) {
      const double w = total > 0.0 ? occ.mass[n] / total : 1.0 / static_cast<double>(nodes.size());
      out.V[r] += w * joint.V[n];
      out.Q.row(r) += w * joint.Q.row(n);
    }
  }
  return out;
}

ValueTable policy_evaluation(const Model& model, const TabularPolicy& policy, ValueDomain domain) {
  const Mat rows = node_policy(model, policy);
  const ValueTable joint = evaluate_joint(model, rows);
  if (domain == ValueDomain::kJoint) return joint;
  return project_values(model, joint, occupancy(model, rows), domain);
}

double undiscounted_return(const Model& model, const Mat& node_probs, int horizon) {
  const int nn = model.num_nodes();
  Vec R(nn);
  for (int n = 0; n < nn; ++n) {
    double r = 0.0;
    for (int a = 0; a < model.num_actions(); ++a) r += node_probs(n, a) * model.expected_reward(n, a);
    R[n] = r;
  }
  const SpMat P = transition_matrix(model, node_probs);
  Vec V = Vec::Zero(nn);
  for (int k = 0; k < horizon; ++k) V = R + P * V;
  return model.init().dot(V);
}

double undiscounted_return(const Model& model, const TabularPolicy& policy) {
  return undiscounted_return(model, node_policy(model, policy), model.horizon());
}

}  // namespace a2d::oracle
