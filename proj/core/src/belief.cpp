#include "a2d/envpair.hpp"

namespace a2d::env {

BeliefWindow::BeliefWindow(int window, int obs_dim, int num_actions)
    : window_(window), obs_dim_(obs_dim), num_actions_(num_actions) {
  if (window < 1) throw ConfigError("belief window must be >= 1");
  if (obs_dim < 1 || num_actions < 1) throw ConfigError("belief dimensions must be positive");
  flat_ = Vec::Zero(flat_dim(window, obs_dim, num_actions));
}

BeliefWindow BeliefWindow::initial(int window, const Vec& obs0, int num_actions) {
  BeliefWindow b(window, static_cast<int>(obs0.size()), num_actions);
  b.flat_.segment((window - 1) * b.obs_dim_, b.obs_dim_) = obs0;
  return b;
}

Vec BeliefWindow::obs_slot(int i) const { return flat_.segment(i * obs_dim_, obs_dim_); }

Vec BeliefWindow::action_slot(int i) const {
  return flat_.segment(window_ * obs_dim_ + i * num_actions_, num_actions_);
}

BeliefWindow belief_update(const BeliefWindow& b, const Vec& o_next, int action) {
  if (o_next.size() != b.obs_dim_)
    throw PreconditionError("observation dimension does not match belief window");
  if (action < 0 || action >= b.num_actions_) throw PreconditionError("action id out of range");

  BeliefWindow out(b.window_, b.obs_dim_, b.num_actions_);
  const int w = b.window_;
  const int od = b.obs_dim_;
  const int na = b.num_actions_;
  if (w > 1) {
    out.flat_.segment(0, (w - 1) * od) = b.flat_.segment(od, (w - 1) * od);
    const int abase = w * od;
    if (w > 2)
      out.flat_.segment(abase, (w - 2) * na) = b.flat_.segment(abase + na, (w - 2) * na);
    out.flat_[abase + (w - 2) * na + action] = 1.0;
  }
  out.flat_.segment((w - 1) * od, od) = o_next;
  return out;
}

}  // namespace a2d::env
