#pragma once

// Shared evaluation protocol for every method.

#include "a2d/approx.hpp"
#include "a2d/envpair.hpp"
#include "a2d/oracle.hpp"

#include <functional>
#include <vector>

namespace a2d {

/// A policy as the evaluator sees it: which input it conditions on and a
/// map from that input to action probabilities.
struct PolicyView {
  enum class Input { kState, kBelief };
  Input input = Input::kBelief;
  std::function<Vec(const Vec&)> probs;

  static PolicyView of(const nn::CategoricalPolicy& net, Input input);
  /// Tabular oracle policy; looks rows up by state id or interned belief.
  static PolicyView of(const oracle::TabularPolicy& policy, const oracle::Model& model,
                       const env::ProcessPair& pair);
};

struct EvalResult {
  int episodes = 0;
  long long interactions = 0;
  double stochastic_mean = 0.0;
  double stochastic_std = 0.0;
  double deterministic_return = 0.0;
  std::vector<double> per_config_returns;  ///< deterministic, per initial state
};

/// Argmax-action return averaged exactly over the initial distribution.
double deterministic_return(const env::ProcessPair& pair, const PolicyView& policy, int window,
                            std::vector<double>* per_config = nullptr);

/// Whole episodes under the stochastic policy until at least
/// `n_interactions` steps have been taken (none when n = 0), plus the
/// deterministic evaluation.
EvalResult evaluate(const env::ProcessPair& pair, const PolicyView& policy, int n_interactions, int window,
                    Rng& rng);

}  // namespace a2d
