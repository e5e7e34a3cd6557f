#include "a2d/oracle.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace a2d::oracle {

namespace {

constexpr double kTieTolerance = 1e-9;

int lowest_within(const Eigen::Ref<const Vec>& q, double tol) {
  const double best = q.maxCoeff();
  for (Eigen::Index a = 0; a < q.size(); ++a)
    if (q[a] >= best - tol) return static_cast<int>(a);
  return 0;
}

}  // namespace

SolvedPolicy optimal_mdp_policy(const Model& model) {
  const FinitePair& f = model.pair();
  const int ns = f.num_states;
  const int na = f.num_actions;
  const double g = f.gamma;

  Vec V = Vec::Zero(ns);
  Mat Q(ns, na);
  int it = 0;
  for (;; ++it) {
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) {
        double q = 0.0;
        if (s != f.terminal())
          for (const auto& e : f.out(s, a)) q += e.prob * (e.reward + g * V[e.next]);
        Q(s, a) = q;
      }
    }
    const Vec next = Q.rowwise().maxCoeff();
    const double residual = (next - V).cwiseAbs().maxCoeff();
    V = next;
    if (residual < 1e-10) break;
  }

  std::vector<int> greedy(ns);
  for (int s = 0; s < ns; ++s) greedy[s] = lowest_within(Q.row(s).transpose(), kTieTolerance);

  SolvedPolicy out;
  out.policy = TabularPolicy::deterministic(Domain::kState, greedy, na);
  out.iterations = it + 1;
  Vec init(ns);
  for (int s = 0; s < ns; ++s) init[s] = f.init[s];
  out.discounted_value = init.dot(V);
  out.value = undiscounted_return(model, out.policy);
  return out;
}

// ---------------------------------------------------------------------------
// Information-state MDP: the posterior over nodes given the whole history.
// With a finite hidden configuration drawn at the start and deterministic
// dynamics this space is finite and small.

namespace {

struct InfoState {
  std::vector<std::pair<int, double>> support;  // (node, posterior), sorted by node
  int belief = -1;
};

using InfoKey = std::vector<std::pair<int, long long>>;

InfoKey key_of(const InfoState& st) {
  InfoKey k;
  k.reserve(st.support.size());
  for (const auto& [n, p] : st.support) k.emplace_back(n, std::llround(p * 1e12));
  return k;
}

struct InfoEdge {
  int next;
  double prob;
};

struct InfoMdp {
  std::vector<InfoState> states;
  std::vector<std::vector<InfoEdge>> edges;  // [i * A + a]
  Mat reward;                                // [i, a]
  std::vector<std::pair<int, double>> init;
  int terminal = -1;
};

InfoMdp build_info_mdp(const Model& model) {
  const int na = model.num_actions();
  InfoMdp m;
  std::map<InfoKey, int> index;

  auto intern = [&](InfoState st) {
    const InfoKey k = key_of(st);
    const auto it = index.find(k);
    if (it != index.end()) return it->second;
    const int id = static_cast<int>(m.states.size());
    index.emplace(k, id);
    m.states.push_back(std::move(st));
    return id;
  };

  // Group a node distribution by belief into normalized info states.
  auto split = [&](const std::map<int, double>& dist) {
    std::map<int, std::vector<std::pair<int, double>>> by_belief;
    for (const auto& [n, p] : dist)
      if (p > 0.0) by_belief[model.belief_of(n)].emplace_back(n, p);
    std::vector<std::pair<int, double>> out;
    for (auto& [b, nodes] : by_belief) {
      double total = 0.0;
      for (const auto& np : nodes) total += np.second;
      InfoState st;
      st.belief = b;
      for (const auto& [n, p] : nodes) st.support.emplace_back(n, p / total);
      out.emplace_back(intern(std::move(st)), total);
    }
    return out;
  };

  {
    InfoState term;
    term.belief = model.terminal_belief();
    term.support = {{model.terminal_node(), 1.0}};
    m.terminal = intern(std::move(term));
  }
  std::map<int, double> init;
  for (int n = 0; n < model.num_nodes(); ++n)
    if (model.init()[n] > 0.0) init[n] = model.init()[n];
  m.init = split(init);

  for (std::size_t i = 0; i < m.states.size(); ++i) {
    m.edges.resize((i + 1) * na);
    for (int a = 0; a < na; ++a) {
      auto& out = m.edges[i * na + a];
      if (static_cast<int>(i) == m.terminal) {
        out.push_back({m.terminal, 1.0});
        continue;
      }
      std::map<int, double> next_dist;
      // Copy: intern() may reallocate m.states.
      const auto support = m.states[i].support;
      for (const auto& [n, p] : support)
        for (const Successor& sc : model.successors(n, a)) next_dist[sc.node] += p * sc.prob;
      double term_mass = 0.0;
      if (const auto it = next_dist.find(model.terminal_node()); it != next_dist.end()) {
        term_mass = it->second;
        next_dist.erase(it);
      }
      if (term_mass > 0.0) out.push_back({m.terminal, term_mass});
      for (const auto& [id, p] : split(next_dist)) out.push_back({id, p});
    }
  }

  const int ni = static_cast<int>(m.states.size());
  m.reward = Mat::Zero(ni, na);
  for (int i = 0; i < ni; ++i) {
    if (i == m.terminal) continue;
    for (int a = 0; a < na; ++a) {
      double r = 0.0;
      for (const auto& [n, p] : m.states[i].support) r += p * model.expected_reward(n, a);
      m.reward(i, a) = r;
    }
  }
  return m;
}

// Policy iteration; returns optimal discounted V and Q.
std::pair<Vec, Mat> solve_info_mdp(const InfoMdp& m, double gamma, int& iterations) {
  const int ni = static_cast<int>(m.states.size());
  const int na = static_cast<int>(m.reward.cols());
  std::vector<int> act(ni, 0);
  Vec V = Vec::Zero(ni);
  Mat Q(ni, na);

  auto compute_q = [&] {
    for (int i = 0; i < ni; ++i)
      for (int a = 0; a < na; ++a) {
        double q = m.reward(i, a);
        for (const InfoEdge& e : m.edges[static_cast<std::size_t>(i) * na + a]) q += gamma * e.prob * V[e.next];
        Q(i, a) = q;
      }
  };

  for (iterations = 1; iterations <= 1000; ++iterations) {
    std::vector<Eigen::Triplet<double>> trip;
    Vec R(ni);
    for (int i = 0; i < ni; ++i) {
      trip.emplace_back(i, i, 1.0);
      for (const InfoEdge& e : m.edges[static_cast<std::size_t>(i) * na + act[i]])
        trip.emplace_back(i, e.next, -gamma * e.prob);
      R[i] = m.reward(i, act[i]);
    }
    SpMat A(ni, ni);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<SpMat> lu(A);
    if (lu.info() != Eigen::Success) throw UnsupportedError("information-state solve failed");
    V = lu.solve(R);
    compute_q();
    bool changed = false;
    for (int i = 0; i < ni; ++i) {
      int best = act[i];
      for (int a = 0; a < na; ++a)
        if (Q(i, a) > Q(i, best) + 1e-12) best = a;
      if (best != act[i]) {
        act[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return {V, Q};
}

}  // namespace

SolvedPolicy optimal_pomdp_policy(const Model& model) {
  const int na = model.num_actions();
  const InfoMdp m = build_info_mdp(model);
  int iterations = 0;
  const auto [V, Q] = solve_info_mdp(m, model.gamma(), iterations);
  const int ni = static_cast<int>(m.states.size());

  std::vector<unsigned> optimal(ni, 0);
  for (int i = 0; i < ni; ++i) {
    const double best = Q.row(i).maxCoeff();
    for (int a = 0; a < na; ++a)
      if (Q(i, a) >= best - kTieTolerance) optimal[i] |= 1u << a;
  }

  // Narrow the allowed actions per belief until the reachable information
  // states agree; restart the sweep whenever a mask shrinks.
  const unsigned all = (1u << na) - 1u;
  std::vector<unsigned> allowed(model.num_beliefs(), all);
  auto lowest = [](unsigned mask) {
    int a = 0;
    while (!(mask & (1u << a))) ++a;
    return a;
  };
  for (bool shrunk = true; shrunk;) {
    shrunk = false;
    std::vector<bool> seen(ni, false);
    std::deque<int> queue;
    for (const auto& [i, p] : m.init) {
      if (!seen[i]) queue.push_back(i);
      seen[i] = true;
    }
    while (!queue.empty() && !shrunk) {
      const int i = queue.front();
      queue.pop_front();
      if (i == m.terminal) continue;
      const int b = m.states[i].belief;
      const unsigned mask = allowed[b] & optimal[i];
      if (mask == 0) {
        std::ostringstream os;
        os << "optimal decisions depend on more than the belief window: belief " << b << ", action "
           << lowest(allowed[b]) << " is not optimal in every reachable history";
        throw UnsupportedError(os.str());
      }
      if (mask != allowed[b]) {
        allowed[b] = mask;
        shrunk = true;
        break;
      }
      for (const InfoEdge& e : m.edges[static_cast<std::size_t>(i) * na + lowest(mask)]) {
        if (!seen[e.next]) {
          seen[e.next] = true;
          queue.push_back(e.next);
        }
      }
    }
  }

  std::vector<int> actions(model.num_beliefs(), 0);
  std::vector<bool> fixed(model.num_beliefs(), false);
  for (int b = 0; b < model.num_beliefs(); ++b) {
    if (allowed[b] != all) {
      actions[b] = lowest(allowed[b]);
      fixed[b] = true;
    }
  }
  // Beliefs the optimal policy never visits (or where every action is
  // optimal): take the first information state's lowest optimal action.
  for (int i = 0; i < ni; ++i) {
    const int b = m.states[i].belief;
    if (!fixed[b] && i != m.terminal) {
      actions[b] = lowest(optimal[i]);
      fixed[b] = true;
    }
  }

  SolvedPolicy out;
  out.policy = TabularPolicy::deterministic(Domain::kBelief, actions, na);
  out.iterations = iterations;
  double dv = 0.0;
  for (const auto& [i, p] : m.init) dv += p * V[i];
  out.discounted_value = dv;
  out.value = undiscounted_return(model, out.policy);
  return out;
}

}  // namespace a2d::oracle
