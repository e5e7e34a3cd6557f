#pragma once

#include "a2d/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace testing_support {

using a2d::Mat;
using a2d::Rng;
using a2d::Vec;
using a2d::oracle::FinitePair;

inline Vec one_hot(int n, int i) {
  Vec v = Vec::Zero(n);
  v[i] = 1.0;
  return v;
}

/// Deterministic chain 0 -> 1 -> ... -> terminal, reward `r` per step,
/// every action identical.
inline FinitePair chain(int length, double r, double gamma, int num_actions = 2) {
  FinitePair p;
  p.num_states = length + 1;
  p.num_actions = num_actions;
  p.gamma = gamma;
  p.horizon = 200;
  p.init.assign(p.num_states, 0.0);
  p.init[0] = 1.0;
  p.edges.resize(static_cast<std::size_t>(p.num_states) * num_actions);
  for (int s = 0; s < p.num_states; ++s) {
    const bool last = s == p.terminal();
    for (int a = 0; a < num_actions; ++a)
      p.edges[s * num_actions + a] = {{last ? s : s + 1, 1.0, last ? 0.0 : r}};
    p.observations.push_back(last ? Vec::Zero(p.num_states) : one_hot(p.num_states, s));
  }
  return p;
}

/// Random stochastic pair whose observations alias states into
/// `num_obs` classes.
inline FinitePair random_pair(Rng& rng, int num_states, int num_obs, int num_actions, double gamma = 0.9) {
  FinitePair p;
  p.num_states = num_states + 1;
  p.num_actions = num_actions;
  p.gamma = gamma;
  p.horizon = 200;
  p.init.assign(p.num_states, 0.0);
  double z = 0.0;
  for (int s = 0; s < num_states; ++s) z += p.init[s] = 0.1 + a2d::uniform01(rng);
  for (int s = 0; s < num_states; ++s) p.init[s] /= z;
  p.edges.resize(static_cast<std::size_t>(p.num_states) * num_actions);
  for (int s = 0; s < p.num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      auto& out = p.edges[s * num_actions + a];
      if (s == p.terminal()) {
        out = {{s, 1.0, 0.0}};
        continue;
      }
      const int a_next = static_cast<int>(rng() % num_states);
      const int b_next = static_cast<int>(rng() % num_states);
      const double stop = 0.1 + 0.3 * a2d::uniform01(rng);
      const double split = a2d::uniform01(rng) * (1.0 - stop);
      const double r = 4.0 * a2d::uniform01(rng) - 2.0;
      out = {{a_next, split, r}, {b_next, 1.0 - stop - split, r}, {p.terminal(), stop, r + 1.0}};
    }
    p.observations.push_back(s == p.terminal() ? Vec::Zero(num_obs)
                                               : one_hot(num_obs, s % num_obs));
  }
  return p;
}

inline Mat random_logits(Rng& rng, int rows, int cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * (2.0 * a2d::uniform01(rng) - 1.0);
  return m;
}

/// Central differences of f over every entry of x.
inline Vec central_difference(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  Vec g(x.size());
  Vec y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const double up = f(y);
    y[i] = x[i] - h;
    const double down = f(y);
    y[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vec& a, const Vec& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-8});
  return (a - b).norm() / scale;
}

inline Vec flatten(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }
inline Mat unflatten(const Vec& v, int rows, int cols) { return Eigen::Map<const Mat>(v.data(), rows, cols); }

}  // namespace testing_support
