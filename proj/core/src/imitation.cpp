#include "a2d/imitation.hpp"

#include <cmath>

namespace a2d::il {

ExpertFn expert_from_net(const nn::CategoricalPolicy& net) {
  return [&net](env::StateId, const Vec& s) { return net.probs(s); };
}

TraineeFn trainee_from_net(const nn::CategoricalPolicy& net) {
  return [&net](const Vec& b) { return net.probs(b); };
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("buffer capacity must be positive");
}

void ReplayBuffer::push(BufferEntry e) {
  entries_.push_back(std::move(e));
  while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
}

namespace {

template <typename Get>
Mat stack(const std::deque<BufferEntry>& entries, Get get) {
  if (entries.empty()) return {};
  Mat out(get(entries.front()).size(), static_cast<Eigen::Index>(entries.size()));
  Eigen::Index i = 0;
  for (const auto& e : entries) out.col(i++) = get(e);
  return out;
}

}  // namespace

Mat ReplayBuffer::beliefs() const { return stack(entries_, [](const BufferEntry& e) -> const Vec& { return e.b; }); }
Mat ReplayBuffer::states() const { return stack(entries_, [](const BufferEntry& e) -> const Vec& { return e.s; }); }
Mat ReplayBuffer::targets() const {
  return stack(entries_, [](const BufferEntry& e) -> const Vec& { return e.expert_probs; });
}

void ReplayBuffer::set_targets(const Mat& probs) {
  if (probs.cols() != size()) throw PreconditionError("target matrix does not match the buffer");
  Eigen::Index i = 0;
  for (auto& e : entries_) e.expert_probs = probs.col(i++);
}

double MixtureSchedule::beta_at(int n) const {
  if (beta0 < 0.0 || beta0 > 1.0) throw ConfigError("beta0 must lie in [0, 1]");
  if (mode == BetaMode::kImmediateZero) return n == 0 ? beta0 : 0.0;
  return beta0 * std::pow(decay, n);
}

env::ActionChoice mixture_sample(double beta, const Vec& expert_probs, const Vec& trainee_probs, Rng& rng) {
  if (beta < 0.0 || beta > 1.0) throw PreconditionError("beta must lie in [0, 1]");
  env::ActionChoice c;
  c.expert_branch = beta >= 1.0 || (beta > 0.0 && uniform01(rng) < beta);
  c.action = sample_categorical(c.expert_branch ? expert_probs : trainee_probs, rng);
  const double density = beta * expert_probs[c.action] + (1.0 - beta) * trainee_probs[c.action];
  c.logp = std::max(std::log(density), nn::kLogProbFloor);
  return c;
}

env::BehaviorPolicy mixture_behavior(const env::ProcessPair& pair, double beta, ExpertFn expert,
                                     TraineeFn trainee) {
  return [&pair, beta, expert = std::move(expert), trainee = std::move(trainee)](
             env::StateId s, const env::BeliefWindow& b, Rng& rng) {
    // Only query the side(s) the density needs.
    const Vec pe = beta > 0.0 ? expert(s, pair.state_vector(s)) : Vec::Zero(pair.num_actions());
    const Vec pt = beta < 1.0 ? trainee(b.vec()) : Vec::Zero(pair.num_actions());
    return mixture_sample(beta, pe, pt, rng);
  };
}

void buffer_update(ReplayBuffer& buffer, const env::TrajectoryBatch& batch, const env::ProcessPair& pair,
                   const ExpertFn& expert) {
  for (const auto& st : batch.steps) {
    Vec sv = pair.state_vector(st.s);
    Vec probs = expert(st.s, sv);
    buffer.push({std::move(sv), st.b, std::move(probs)});
  }
}

double kl_loss(const nn::CategoricalPolicy& trainee, const Mat& beliefs, const Mat& targets, Vec* grad) {
  nn::Mlp::Cache cache;
  const nn::Distribution d = trainee.forward(beliefs, &cache);
  const double n = static_cast<double>(beliefs.cols());
  const Mat logt = targets.array().max(1e-300).log().max(nn::kLogProbFloor).matrix();
  const double loss = nn::kl_columns(targets, logt, d.logp).sum() / n;
  if (grad) *grad = trainee.net().backward(cache, (d.probs - targets) / n);
  return loss;
}

std::vector<double> ail_step(const ReplayBuffer& buffer, nn::CategoricalPolicy& trainee, nn::Adam& opt,
                             const AilStepConfig& cfg, Rng& rng) {
  if (buffer.empty()) throw PreconditionError("AIL step on an empty buffer");
  if (cfg.batch_size < 1) throw ConfigError("AIL batch size must be positive");
  const Mat B = buffer.beliefs();
  const Mat T = buffer.targets();
  const int n = buffer.size();
  std::vector<double> trace;
  for (int e = 0; e < cfg.epochs; ++e) {
    const std::vector<int> order = nn::permutation(n, rng);
    double sum = 0.0;
    int batches = 0;
    for (int lo = 0; lo < n; lo += cfg.batch_size) {
      const int hi = std::min(n, lo + cfg.batch_size);
      Mat xb(B.rows(), hi - lo);
      Mat tb(T.rows(), hi - lo);
      for (int i = lo; i < hi; ++i) {
        xb.col(i - lo) = B.col(order[i]);
        tb.col(i - lo) = T.col(order[i]);
      }
      Vec grad;
      sum += kl_loss(trainee, xb, tb, &grad);
      opt.step(trainee.net().params(), grad);
      ++batches;
    }
    trace.push_back(sum / batches);
  }
  return trace;
}

double buffer_kl(const ReplayBuffer& buffer, const nn::CategoricalPolicy& trainee) {
  if (buffer.empty()) return 0.0;
  return kl_loss(trainee, buffer.beliefs(), buffer.targets(), nullptr);
}

}  // namespace a2d::il
