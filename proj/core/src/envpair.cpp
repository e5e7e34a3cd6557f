#include "a2d/envpair.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace a2d::env {

namespace {

// Rows top (y = 0) to bottom. 'S' start, 'G' goal, '?' hazard candidate,
// 'A'/'Z' the two Tiger Door cells, 'B' button, '#' wall.
struct LayoutDef {
  const char* name;
  std::array<const char*, 5> rows;
  bool hazard_observed;
};

constexpr std::array<LayoutDef, 6> kLayouts{{
    {"frozen_lake", {".....", ".???.", "S???G", ".???.", "....."}, false},
    // Control pair: hazard location is part of the observation, so every
    // belief identifies its state.
    {"frozen_lake_observed", {".....", ".???.", "S???G", ".???.", "....."}, true},
    {"tiger_door_0", {"S....", "##B#.", "###A.", "####Z", "#####"}, false},
    {"tiger_door_1", {"#####", "##B##", "#ASZ#", "#####", "#####"}, false},
    {"tiger_door_2", {"#####", "##B##", "A.S.Z", "#####", "#####"}, false},
    {"tiger_door_3", {"#####", "##B##", "..S..", "A###Z", "#####"}, false},
}};

constexpr std::array<std::array<int, 2>, kNumActions> kMoves{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};

Vec one_hot(int n, int i) {
  Vec v = Vec::Zero(n);
  v[i] = 1.0;
  return v;
}

}  // namespace

const std::vector<std::string>& supported_layouts() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& def : kLayouts) out.emplace_back(def.name);
    return out;
  }();
  return names;
}

ProcessPair make_pair(const std::string& layout) {
  PairSpec spec;
  spec.layout = layout;
  return make_pair(spec);
}

ProcessPair make_pair(const PairSpec& spec) {
  const auto it = std::find_if(kLayouts.begin(), kLayouts.end(),
                               [&](const LayoutDef& d) { return spec.layout == d.name; });
  if (it == kLayouts.end()) throw ConfigError("unknown layout '" + spec.layout + "'");
  if (!(spec.gamma > 0.0 && spec.gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (spec.horizon <= 0) throw ConfigError("horizon must be positive");

  ProcessPair p;
  p.spec_ = spec;
  p.wall_.assign(ProcessPair::kWidth * ProcessPair::kHeight, false);
  std::optional<Cell> goal;
  std::optional<Cell> door_a;
  std::optional<Cell> door_z;
  for (int y = 0; y < ProcessPair::kHeight; ++y) {
    for (int x = 0; x < ProcessPair::kWidth; ++x) {
      const Cell c{x, y};
      switch (it->rows[y][x]) {
        case '#': p.wall_[ProcessPair::cell_index(c)] = true; break;
        case 'S': p.start_ = c; break;
        case 'G': goal = c; break;
        case '?': p.candidates_.push_back(c); break;
        case 'A': door_a = c; break;
        case 'Z': door_z = c; break;
        case 'B': p.button_ = c; break;
        default: break;
      }
    }
  }

  if (goal) {
    for (const Cell& h : p.candidates_) p.configs_.push_back({*goal, h});
    p.obs_mode_ = it->hazard_observed ? ProcessPair::ObsMode::kPositionAndHazard
                                      : ProcessPair::ObsMode::kPositionOnly;
    p.state_dim_ = 25 + static_cast<int>(p.candidates_.size());
    p.obs_dim_ = it->hazard_observed ? p.state_dim_ : 25;
  } else {
    p.doors_ = {*door_a, *door_z};
    p.configs_.push_back({*door_a, *door_z});
    p.configs_.push_back({*door_z, *door_a});
    p.obs_mode_ = ProcessPair::ObsMode::kRevealOnButton;
    p.state_dim_ = 25 + 2 + 2 + 1;
    p.obs_dim_ = 25 + 2 + 2;
  }
  p.enumerate();
  return p;
}

void ProcessPair::enumerate() {
  const int n_cells = kWidth * kHeight;
  const int n_pressed = button_ ? 2 : 1;
  lookup_.assign(configs_.size() * n_cells * 2, -1);
  states_.clear();
  for (int k = 0; k < num_configs(); ++k) {
    for (int ci = 0; ci < n_cells; ++ci) {
      const Cell c = cell_at(ci);
      if (wall_[ci] || c == configs_[k].goal || c == configs_[k].hazard) continue;
      for (int pr = 0; pr < n_pressed; ++pr) {
        lookup_[(k * n_cells + ci) * 2 + pr] = static_cast<int>(states_.size());
        states_.push_back({k, ci, pr == 1});
      }
    }
  }
  init_.assign(num_states(), 0.0);
  const double w = 1.0 / num_configs();
  for (int k = 0; k < num_configs(); ++k) init_[index_of(k, cell_index(start_), false)] += w;
}

int ProcessPair::index_of(int config, int cell, bool pressed) const {
  const int id = lookup_[(config * kWidth * kHeight + cell) * 2 + (pressed ? 1 : 0)];
  if (id < 0) throw PreconditionError("no such gridworld state");
  return id;
}

std::vector<StateId> ProcessPair::initial_states() const {
  std::vector<StateId> out;
  for (StateId s = 0; s < num_states(); ++s)
    if (init_[s] > 0.0) out.push_back(s);
  return out;
}

bool ProcessPair::is_wall(Cell c) const {
  if (c.x < 0 || c.y < 0 || c.x >= kWidth || c.y >= kHeight) return true;
  return wall_[cell_index(c)];
}

Outcome ProcessPair::transition(StateId s, int action) const {
  if (s < 0 || s >= num_states()) throw PreconditionError("state id out of range");
  if (action < 0 || action >= kNumActions) throw PreconditionError("action id out of range");
  if (is_terminal(s)) throw PreconditionError("cannot step from the terminal state");

  const StateKey& key = states_[s];
  const HiddenConfig& cfg = configs_[key.config];
  const Cell here = cell_at(key.cell);
  const Cell target{here.x + kMoves[action][0], here.y + kMoves[action][1]};

  if (is_wall(target)) return {s, spec_.step_reward, false};
  if (target == cfg.goal) return {terminal_state(), spec_.step_reward + spec_.goal_reward, true};
  if (target == cfg.hazard) return {terminal_state(), spec_.step_reward + spec_.hazard_reward, true};
  const bool pressed = key.pressed || (button_ && target == *button_);
  return {index_of(key.config, cell_index(target), pressed), spec_.step_reward, false};
}

std::vector<std::pair<StateId, double>> ProcessPair::transition_probs(StateId s, int action) const {
  if (is_terminal(s)) return {{s, 1.0}};
  return {{transition(s, action).next, 1.0}};
}

double ProcessPair::reward(StateId s, int action, StateId s_next) const {
  if (is_terminal(s)) return 0.0;
  const Outcome o = transition(s, action);
  return o.next == s_next ? o.reward : 0.0;
}

Vec ProcessPair::state_vector(StateId s) const {
  Vec v = Vec::Zero(state_dim_);
  if (is_terminal(s)) return v;
  const StateKey& key = states_[s];
  v[key.cell] = 1.0;
  if (obs_mode_ == ObsMode::kRevealOnButton) {
    v[25 + key.config] = 1.0;        // goal at door `config`
    v[27 + (1 - key.config)] = 1.0;  // hazard at the other door
    v[29] = key.pressed ? 1.0 : 0.0;
  } else {
    v[25 + key.config] = 1.0;
  }
  return v;
}

Vec ProcessPair::observe(StateId s) const {
  Vec o = Vec::Zero(obs_dim_);
  if (is_terminal(s)) return o;
  const StateKey& key = states_[s];
  o[key.cell] = 1.0;
  switch (obs_mode_) {
    case ObsMode::kPositionOnly: break;
    case ObsMode::kPositionAndHazard: o[25 + key.config] = 1.0; break;
    case ObsMode::kRevealOnButton:
      if (key.pressed) {
        o[25 + key.config] = 1.0;
        o[27 + (1 - key.config)] = 1.0;
      }
      break;
  }
  return o;
}

Cell ProcessPair::agent_cell(StateId s) const {
  if (is_terminal(s)) return {-1, -1};
  return cell_at(states_[s].cell);
}

int ProcessPair::config_index(StateId s) const { return is_terminal(s) ? -1 : states_[s].config; }

bool ProcessPair::button_pressed(StateId s) const { return !is_terminal(s) && states_[s].pressed; }

std::string ProcessPair::render(StateId s) const {
  std::ostringstream os;
  if (is_terminal(s)) {
    os << "<terminal>\n";
    return os.str();
  }
  const StateKey& key = states_[s];
  const HiddenConfig& cfg = configs_[key.config];
  for (int y = 0; y < kHeight; ++y) {
    for (int x = 0; x < kWidth; ++x) {
      const Cell c{x, y};
      char ch = wall_[cell_index(c)] ? '#' : '.';
      if (button_ && c == *button_) ch = key.pressed ? 'b' : 'B';
      if (c == cfg.goal) ch = 'G';
      if (c == cfg.hazard) ch = 'X';
      if (cell_index(c) == key.cell) ch = '@';
      os << ch;
    }
    os << '\n';
  }
  return os.str();
}

std::string ProcessPair::render_layout() const {
  std::ostringstream os;
  for (int y = 0; y < kHeight; ++y) {
    for (int x = 0; x < kWidth; ++x) {
      const Cell c{x, y};
      char ch = wall_[cell_index(c)] ? '#' : '.';
      if (std::find(candidates_.begin(), candidates_.end(), c) != candidates_.end()) ch = '?';
      if (std::find(doors_.begin(), doors_.end(), c) != doors_.end()) ch = '?';
      if (doors_.empty() && c == configs_.front().goal) ch = 'G';
      if (button_ && c == *button_) ch = 'B';
      if (c == start_) ch = 'S';
      os << ch;
    }
    os << '\n';
  }
  return os.str();
}

std::string ProcessPair::describe_state(StateId s) const {
  std::ostringstream os;
  if (is_terminal(s)) {
    os << "terminal";
    return os.str();
  }
  const StateKey& key = states_[s];
  const Cell c = cell_at(key.cell);
  const HiddenConfig& cfg = configs_[key.config];
  os << "agent=(" << c.x << "," << c.y << ") goal=(" << cfg.goal.x << "," << cfg.goal.y
     << ") hazard=(" << cfg.hazard.x << "," << cfg.hazard.y << ")";
  if (button_) os << " pressed=" << (key.pressed ? 1 : 0);
  return os.str();
}

}  // namespace a2d::env
