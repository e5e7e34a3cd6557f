#pragma once

// Exact computations on enumerable MDP-POMDP pairs.
//
// A Model enumerates every reachable (state, belief window) pair into a
// joint "node". Policies over states or over beliefs are lifted to
// node-level action matrices, after which occupancies, values and
// gradients are plain sparse linear algebra.

#include "a2d/common.hpp"
#include "a2d/envpair.hpp"

#include <Eigen/SparseCore>

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace a2d::oracle {

using SpMat = Eigen::SparseMatrix<double>;

enum class Domain { kState, kBelief };

/// Row-stochastic |X| x |A| matrix over states or beliefs.
struct TabularPolicy {
  Domain domain = Domain::kState;
  Mat probs;

  static TabularPolicy uniform(Domain domain, int rows, int num_actions);
  static TabularPolicy deterministic(Domain domain, const std::vector<int>& actions,
                                     int num_actions);
  int rows() const { return static_cast<int>(probs.rows()); }
  /// Throws PreconditionError unless rows sum to one within 1e-12 and
  /// entries are nonnegative.
  void validate() const;
  /// Index of the largest entry per row, lowest index on ties.
  std::vector<int> argmax_actions(double tol = 1e-12) const;
};

struct Successor {
  int node;
  double prob;
  double reward;
};

/// Explicit finite pair. Gridworlds convert to this; tests also build
/// small ones by hand. The last state id is the absorbing terminal.
struct FinitePair {
  struct Edge {
    int next;
    double prob;
    double reward;
  };

  int num_states = 0;
  int num_actions = env::kNumActions;
  double gamma = 0.995;
  int horizon = 200;
  std::vector<double> init;
  std::vector<std::vector<Edge>> edges;  ///< indexed s * num_actions + a
  std::vector<Vec> observations;         ///< per state; terminal is all zero

  int terminal() const { return num_states - 1; }
  int obs_dim() const { return observations.empty() ? 0 : static_cast<int>(observations[0].size()); }
  const std::vector<Edge>& out(int s, int a) const {
    return edges[static_cast<std::size_t>(s) * num_actions + a];
  }
  /// Throws PreconditionError on malformed tables.
  void validate() const;
};

FinitePair to_finite(const env::ProcessPair& pair);

class Model {
 public:
  explicit Model(const env::ProcessPair& pair, int window = 1);
  explicit Model(FinitePair pair, int window = 1);

  const FinitePair& pair() const { return pair_; }
  int window() const { return window_; }
  double gamma() const { return pair_.gamma; }
  int horizon() const { return pair_.horizon; }
  int num_actions() const { return pair_.num_actions; }

  int num_nodes() const { return static_cast<int>(node_state_.size()); }
  int num_states() const { return pair_.num_states; }
  int num_beliefs() const { return static_cast<int>(belief_vecs_.size()); }

  env::StateId state_of(int node) const { return node_state_[node]; }
  int belief_of(int node) const { return node_belief_[node]; }
  int terminal_node() const { return terminal_node_; }
  bool is_terminal_node(int node) const { return node == terminal_node_; }
  int terminal_belief() const { return node_belief_[terminal_node_]; }

  const std::vector<Successor>& successors(int node, int action) const {
    return succ_[static_cast<std::size_t>(node) * num_actions() + action];
  }
  /// Expected immediate reward.
  double expected_reward(int node, int action) const;

  const Vec& belief_vector(int belief) const { return belief_vecs_[belief]; }
  std::optional<int> find_belief(const Vec& v) const;
  /// Initial distribution over nodes.
  const Vec& init() const { return init_; }

  /// Nodes sharing a belief (excluding the terminal node).
  const std::vector<int>& nodes_of_belief(int belief) const { return belief_nodes_[belief]; }
  const std::vector<int>& nodes_of_state(env::StateId s) const { return state_nodes_[s]; }

 private:
  int intern_belief(const Vec& v);

  FinitePair pair_;
  int window_;
  std::vector<env::StateId> node_state_;
  std::vector<int> node_belief_;
  std::vector<std::vector<Successor>> succ_;
  std::vector<Vec> belief_vecs_;
  std::map<std::vector<double>, int> belief_index_;
  std::vector<std::vector<int>> belief_nodes_;
  std::vector<std::vector<int>> state_nodes_;
  Vec init_;
  int terminal_node_ = -1;
};

// ---------------------------------------------------------------------------
// Policies lifted to nodes

/// Node-level action matrix for a state or belief policy.
Mat node_policy(const Model& model, const TabularPolicy& policy);
/// beta * expert(a|s) + (1 - beta) * trainee(a|b).
Mat node_policy(const Model& model, const TabularPolicy& expert, const TabularPolicy& trainee,
                double beta);

/// Node-to-node transition matrix under a node-level policy.
SpMat transition_matrix(const Model& model, const Mat& node_probs);

// ---------------------------------------------------------------------------
// Occupancy

struct OccupancyTable {
  Vec mass;  ///< d(s, b) per node, sums to one
  double truncation_error = 0.0;

  Vec state_marginal(const Model& model) const;
  Vec belief_marginal(const Model& model) const;
  /// d(s | b) for the nodes of one belief, in nodes_of_belief order.
  Vec conditional_given_belief(const Model& model, int belief) const;
};

inline constexpr double kOccupancyTruncation = 1e-8;

/// d(n) = (1 - gamma) sum_t gamma^t q_t(n) by a sparse linear solve.
OccupancyTable occupancy(const Model& model, const Mat& node_probs);
/// Same measure by summing the geometric series until gamma^t < eps.
OccupancyTable occupancy_truncated(const Model& model, const Mat& node_probs,
                                   double eps = kOccupancyTruncation);

// ---------------------------------------------------------------------------
// Policy evaluation

enum class ValueDomain { kJoint, kState, kBelief };

struct ValueTable {
  ValueDomain domain = ValueDomain::kJoint;
  Vec V;
  Mat Q;
};

/// Discounted V and Q over nodes by a direct sparse solve.
ValueTable evaluate_joint(const Model& model, const Mat& node_probs);
/// Project joint values to states or beliefs, weighting by `occ`.
ValueTable project_values(const Model& model, const ValueTable& joint, const OccupancyTable& occ,
                          ValueDomain domain);
ValueTable policy_evaluation(const Model& model, const TabularPolicy& policy, ValueDomain domain);

/// Expected undiscounted return over at most `horizon` steps from the
/// initial distribution. This is the quantity episodes report.
double undiscounted_return(const Model& model, const Mat& node_probs, int horizon);
double undiscounted_return(const Model& model, const TabularPolicy& policy);

// ---------------------------------------------------------------------------
// Optimal policies

struct SolvedPolicy {
  TabularPolicy policy;
  double value = 0.0;             ///< undiscounted return from the initial distribution
  double discounted_value = 0.0;  ///< discounted value from the initial distribution
  int iterations = 0;
};

/// Value iteration over states, greedy deterministic policy with
/// lowest-index tie-break.
SolvedPolicy optimal_mdp_policy(const Model& model);

/// Optimal policy over beliefs. Solves the information-state MDP exactly
/// (posterior over nodes given the full history), then checks that its
/// decisions depend on the history only through the belief window.
/// Throws UnsupportedError naming the first conflicting (belief, action).
SolvedPolicy optimal_pomdp_policy(const Model& model);

// ---------------------------------------------------------------------------
// Imitation

struct ImplicitPolicy {
  TabularPolicy policy;            ///< over beliefs
  std::vector<bool> zero_mass;     ///< beliefs with no occupancy (uniform row)
};

/// Row b = sum_s d(s | b) expert(. | s).
ImplicitPolicy implicit_policy(const Model& model, const TabularPolicy& expert,
                               const OccupancyTable& occ);

inline constexpr double kInfiniteDivergence = std::numeric_limits<double>::infinity();

/// sum_{s,b} d(s,b) KL(expert(.|s) || trainee(.|b)) over non-terminal
/// nodes. Returns kInfiniteDivergence when the trainee has no mass where
/// the expert does.
double ail_objective(const Model& model, const TabularPolicy& expert, const TabularPolicy& trainee,
                     const OccupancyTable& occ);

struct FixedPointReport {
  TabularPolicy trainee;
  int iterations = 0;
  double residual = 0.0;  ///< max-row total variation of the last update
  bool converged = false;
  double value = 0.0;     ///< undiscounted return of the trainee
};

/// trainee_{k+1} = implicit(expert, occupancy(trainee_k)). The first
/// iterate uses the expert's own occupancy, as DAgger does with beta = 1.
FixedPointReport ail_fixed_point(const Model& model, const TabularPolicy& expert,
                                 double tol = 1e-8, int max_iterations = 500);

struct IdentifiabilityReport {
  double mdp_value = 0.0;
  double pomdp_value = 0.0;
  double fixed_point_value = 0.0;
  double divergence = 0.0;             ///< E_d[KL] at the fixed point
  double normalized_divergence = 0.0;  ///< same, per unit of non-terminal mass
  bool identifiable = false;
  double return_gap = 0.0;             ///< pomdp_value - fixed_point_value
  bool fixed_point_converged = false;
};

IdentifiabilityReport identifiability_report(const Model& model);

// ---------------------------------------------------------------------------
// Expert refinement

/// Q^psi(a, b) = sum_s d^psi(s|b) Q^psi(s, b, a), indexed [belief, action].
Mat belief_q(const Model& model, const ValueTable& joint, const OccupancyTable& occ);

/// J_psi(theta) = E_{d^psi(s,b)} sum_a expert(a|s) Q^psi(a, b).
double surrogate_objective(const Model& model, const TabularPolicy& expert,
                           const TabularPolicy& trainee);

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  bool exhaustive = false;
  long long experts_enumerated = 0;
  std::string warning;
};

/// lhs = max over experts of the surrogate; rhs = max over enumerated
/// deterministic experts of E_{d^psi(b)} [sum_a implicit(a|b) Q^{implicit}(a,b)].
BoundCheck surrogate_bound_check(const Model& model, const TabularPolicy& trainee,
                                 long long max_enumeration = 1LL << 20);

struct ExactA2dReport {
  TabularPolicy trainee;
  TabularPolicy expert;
  std::vector<double> values;  ///< trainee return after each iteration
  int iterations = 0;
  bool converged = false;
  std::string warning;
};

/// Exact A2D from a uniform trainee. Each iteration picks the
/// deterministic expert maximizing E_{d^psi(s,b)}[V^{implicit}(s,b)] under
/// the current trainee occupancy (exhaustively when 4^|visited states| <=
/// max_enumeration, else by coordinate ascent with a warning), then
/// projects the trainee onto that expert's implicit policy.
ExactA2dReport exact_a2d(const Model& model, int max_iterations = 500,
                         long long max_enumeration = 1LL << 20);

}  // namespace a2d::oracle
