#include "a2d/evaluate.hpp"

#include <cmath>
#include <map>
#include <memory>

namespace a2d {

PolicyView PolicyView::of(const nn::CategoricalPolicy& net, Input input) {
  return {input, [&net](const Vec& x) { return net.probs(x); }};
}

PolicyView PolicyView::of(const oracle::TabularPolicy& policy, const oracle::Model& model,
                          const env::ProcessPair& pair) {
  if (policy.domain == oracle::Domain::kBelief) {
    return {Input::kBelief, [&policy, &model](const Vec& b) -> Vec {
              const auto id = model.find_belief(b);
              if (!id) return Vec::Constant(policy.probs.cols(), 1.0 / policy.probs.cols());
              return policy.probs.row(*id).transpose();
            }};
  }
  // State vectors are injective on non-terminal states; index them once.
  auto index = std::make_shared<std::map<std::vector<double>, int>>();
  for (env::StateId s = 0; s < pair.num_states(); ++s) {
    const Vec v = pair.state_vector(s);
    index->emplace(std::vector<double>(v.data(), v.data() + v.size()), s);
  }
  return {Input::kState, [&policy, index](const Vec& x) -> Vec {
            const auto it = index->find(std::vector<double>(x.data(), x.data() + x.size()));
            if (it == index->end()) throw PreconditionError("state vector not found in pair");
            return policy.probs.row(it->second).transpose();
          }};
}

namespace {

int argmax_lowest(const Vec& p) {
  int best = 0;
  for (int a = 1; a < p.size(); ++a)
    if (p[a] > p[best]) best = a;
  return best;
}

Vec input_of(const env::ProcessPair& pair, const PolicyView& policy, env::StateId s, const env::BeliefWindow& b) {
  return policy.input == PolicyView::Input::kState ? pair.state_vector(s) : b.vec();
}

}  // namespace

double deterministic_return(const env::ProcessPair& pair, const PolicyView& policy, int window,
                            std::vector<double>* per_config) {
  double total = 0.0;
  if (per_config) per_config->clear();
  for (env::StateId s0 : pair.initial_states()) {
    env::StateId s = s0;
    env::BeliefWindow b = env::BeliefWindow::initial(window, pair.observe(s), pair.num_actions());
    double ret = 0.0;
    for (int t = 0; t < pair.horizon(); ++t) {
      const int a = argmax_lowest(policy.probs(input_of(pair, policy, s, b)));
      const env::Outcome o = pair.transition(s, a);
      ret += o.reward;
      if (o.done) break;
      b = env::belief_update(b, pair.observe(o.next), a);
      s = o.next;
    }
    if (per_config) per_config->push_back(ret);
    total += pair.init_dist()[s0] * ret;
  }
  return total;
}

EvalResult evaluate(const env::ProcessPair& pair, const PolicyView& policy, int n_interactions, int window,
                    Rng& rng) {
  EvalResult res;
  std::vector<double> returns;
  while (res.interactions < n_interactions) {
    env::StateId s = env::sample_initial(pair, rng);
    env::BeliefWindow b = env::BeliefWindow::initial(window, pair.observe(s), pair.num_actions());
    double ret = 0.0;
    for (int t = 0; t < pair.horizon(); ++t) {
      const int a = sample_categorical(policy.probs(input_of(pair, policy, s, b)), rng);
      const env::Outcome o = pair.transition(s, a);
      ret += o.reward;
      ++res.interactions;
      if (o.done) break;
      b = env::belief_update(b, pair.observe(o.next), a);
      s = o.next;
    }
    returns.push_back(ret);
  }
  res.episodes = static_cast<int>(returns.size());
  if (!returns.empty()) {
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    res.stochastic_mean = mean;
    res.stochastic_std = std::sqrt(var / static_cast<double>(returns.size()));
  }
  res.deterministic_return = deterministic_return(pair, policy, window, &res.per_config_returns);
  return res;
}

}  // namespace a2d
