#pragma once

// MDP-POMDP gridworld pairs with exact model access.
//
// Both views of a pair share the enumerated state space, the initial
// distribution, transitions, and rewards. They differ only in what the
// policy conditions on: the expert sees `state_vector(s)`, the trainee
// sees a window over `observe(s)`.

#include "a2d/common.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace a2d::env {

inline constexpr int kNumActions = 4;
enum Action : int { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };

using StateId = int;

/// Layout and reward parameters of a gridworld pair.
struct PairSpec {
  std::string layout = "frozen_lake";
  double step_reward = -2.0;
  double goal_reward = 20.0;
  double hazard_reward = -100.0;
  double gamma = 0.995;
  int horizon = 200;
};

/// Names accepted by make_pair().
const std::vector<std::string>& supported_layouts();

struct Outcome {
  StateId next;
  double reward;
  bool done;
};

struct Cell {
  int x;
  int y;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Hidden configuration drawn once per episode.
struct HiddenConfig {
  Cell goal;
  Cell hazard;
};

class ProcessPair {
 public:
  static constexpr int kWidth = 5;
  static constexpr int kHeight = 5;

  const PairSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.layout; }
  double gamma() const { return spec_.gamma; }
  int horizon() const { return spec_.horizon; }
  int num_actions() const { return kNumActions; }

  int num_states() const { return static_cast<int>(states_.size()) + 1; }
  StateId terminal_state() const { return static_cast<StateId>(states_.size()); }
  bool is_terminal(StateId s) const { return s == terminal_state(); }

  /// Initial distribution over all states (terminal has zero mass).
  const std::vector<double>& init_dist() const { return init_; }
  /// States with positive initial mass, one per hidden configuration.
  std::vector<StateId> initial_states() const;

  /// Deterministic successor. Stepping from the terminal state is a
  /// precondition error.
  Outcome transition(StateId s, int action) const;

  /// Point mass for gridworlds; the terminal state maps to itself with
  /// zero reward so exact solvers can treat it uniformly.
  std::vector<std::pair<StateId, double>> transition_probs(StateId s, int action) const;
  double reward(StateId s, int action, StateId s_next) const;

  /// Omniscient compact state (expert input).
  Vec state_vector(StateId s) const;
  int state_dim() const { return state_dim_; }

  /// Compact partial observation (trainee input).
  Vec observe(StateId s) const;
  int obs_dim() const { return obs_dim_; }

  // Inspection helpers.
  Cell agent_cell(StateId s) const;
  int config_index(StateId s) const;
  bool button_pressed(StateId s) const;
  int num_configs() const { return static_cast<int>(configs_.size()); }
  const HiddenConfig& config(int k) const { return configs_[k]; }
  bool is_wall(Cell c) const;
  std::optional<Cell> button() const { return button_; }
  Cell start() const { return start_; }

  /// ASCII grid for state s (agent '@', goal 'G', hazard 'X', button 'B').
  std::string render(StateId s) const;
  /// ASCII layout with hazard candidates ('?') and walls ('#').
  std::string render_layout() const;
  std::string describe_state(StateId s) const;

 private:
  friend ProcessPair make_pair(const PairSpec& spec);

  enum class ObsMode { kPositionOnly, kPositionAndHazard, kRevealOnButton };

  struct StateKey {
    int config;
    int cell;
    bool pressed;
  };

  void enumerate();
  int index_of(int config, int cell, bool pressed) const;
  static int cell_index(Cell c) { return c.y * kWidth + c.x; }
  static Cell cell_at(int i) { return {i % kWidth, i / kWidth}; }

  PairSpec spec_;
  ObsMode obs_mode_ = ObsMode::kPositionOnly;
  std::vector<bool> wall_;
  Cell start_{0, 0};
  std::optional<Cell> button_;
  std::vector<HiddenConfig> configs_;
  std::vector<Cell> doors_;        // Tiger Door: the two candidate cells
  std::vector<Cell> candidates_;   // Frozen Lake: hazard support
  std::vector<StateKey> states_;
  std::vector<int> lookup_;        // (config, cell, pressed) -> state id or -1
  std::vector<double> init_;
  int state_dim_ = 0;
  int obs_dim_ = 0;
};

/// Build a pair by layout name. Unknown names raise ConfigError.
ProcessPair make_pair(const PairSpec& spec);
ProcessPair make_pair(const std::string& layout);

// ---------------------------------------------------------------------------
// Windowed beliefs

/// The last `window` observations and `window - 1` actions, flattened
/// oldest first. Slots before the start of the episode are zero.
class BeliefWindow {
 public:
  BeliefWindow(int window, int obs_dim, int num_actions = kNumActions);

  /// Window at t = 0: zero padding plus the first observation.
  static BeliefWindow initial(int window, const Vec& obs0, int num_actions = kNumActions);

  int window() const { return window_; }
  int obs_dim() const { return obs_dim_; }
  int num_actions() const { return num_actions_; }
  const Vec& vec() const { return flat_; }
  static int flat_dim(int window, int obs_dim, int num_actions = kNumActions) {
    return window * obs_dim + (window - 1) * num_actions;
  }

  /// Observation slot i (0 = oldest) and action slot i.
  Vec obs_slot(int i) const;
  Vec action_slot(int i) const;

 private:
  friend BeliefWindow belief_update(const BeliefWindow&, const Vec&, int);
  int window_;
  int obs_dim_;
  int num_actions_;
  Vec flat_;
};

/// Shift by one: drop the oldest slot and append (o_next, a). `a` is the
/// action that produced `o_next`.
BeliefWindow belief_update(const BeliefWindow& b, const Vec& o_next, int action);

// ---------------------------------------------------------------------------
// Sampling

/// One environment interaction.
struct StepRecord {
  StateId s = 0;
  Vec b;
  int a = 0;
  double r = 0.0;
  StateId s_next = 0;
  Vec b_next;
  bool done = false;       // true terminal (goal or hazard)
  bool truncated = false;  // time limit or end of batch; bootstrap from V
  double behavior_logp = 0.0;
  bool expert_branch = false;
  int t = 0;               // time index within the episode
};

struct TrajectoryBatch {
  std::vector<StepRecord> steps;
  int episodes_started = 0;
  /// Undiscounted returns of episodes that finished inside the batch.
  std::vector<double> completed_returns;

  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
};

struct ActionChoice {
  int action = 0;
  double logp = 0.0;
  bool expert_branch = false;
};

/// Maps (s, b) to a sampled action. Covers pure-state, pure-belief and
/// mixture policies.
using BehaviorPolicy = std::function<ActionChoice(StateId, const BeliefWindow&, Rng&)>;

/// Sample one initial state.
StateId sample_initial(const ProcessPair& pair, Rng& rng);

/// Collect exactly n_steps interactions, starting fresh episodes as needed.
/// Episodes end on terminal entry or at the pair's horizon.
TrajectoryBatch rollout(const ProcessPair& pair, const BehaviorPolicy& behavior, int n_steps,
                        int window, Rng& rng);

}  // namespace a2d::env
