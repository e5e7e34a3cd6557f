#include "a2d/harness.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace a2d {

using json = nlohmann::ordered_json;

namespace {

const std::vector<std::pair<Method, std::string>> kMethodNames{
    {Method::kRlMdp, "rl_mdp"}, {Method::kRlPomdp, "rl_pomdp"}, {Method::kRlAsym, "rl_asym"},
    {Method::kAil, "ail"},      {Method::kA2d, "a2d"},          {Method::kA2dQ, "a2d_q"},
    {Method::kOracle, "oracle"}};

il::BetaMode parse_beta_mode(const std::string& s) {
  if (s == "multiplicative") return il::BetaMode::kMultiplicative;
  if (s == "immediate_zero") return il::BetaMode::kImmediateZero;
  throw ConfigError("field 'beta_mode': expected 'multiplicative' or 'immediate_zero', got '" + s + "'");
}

std::string beta_mode_name(il::BetaMode m) {
  return m == il::BetaMode::kMultiplicative ? "multiplicative" : "immediate_zero";
}

// Every serialized field, in output order. `f(name, member)`.
template <typename C, typename F>
void visit_fields(C& c, F&& f) {
  f("method", c.method);
  f("env", c.env);
  f("seed", c.seed);
  f("output_dir", c.output_dir);
  f("gamma", c.gamma);
  f("horizon", c.horizon);
  f("window", c.window);
  f("lambda", c.lambda);
  f("beta0", c.beta0);
  f("beta_decay", c.beta_decay);
  f("beta_mode", c.beta_mode);
  f("entropy_alpha", c.entropy_alpha);
  f("batch_steps", c.batch_steps);
  f("buffer_capacity", c.buffer_capacity);
  f("normalize_advantages", c.normalize_advantages);
  f("refresh_buffer_targets", c.refresh_buffer_targets);
  f("weight_cap", c.weight_cap);
  f("surrogate_entropy", c.surrogate_entropy);
  f("lr_value", c.lr_value);
  f("lr_q", c.lr_q);
  f("lr_ail", c.lr_ail);
  f("l2", c.l2);
  f("value_epochs", c.value_epochs);
  f("value_minibatches", c.value_minibatches);
  f("ail_epochs", c.ail_epochs);
  f("ail_batch", c.ail_batch);
  f("max_kl", c.max_kl);
  f("cg_iters", c.cg_iters);
  f("cg_damping", c.cg_damping);
  f("backtrack_ratio", c.backtrack_ratio);
  f("max_backtracks", c.max_backtracks);
  f("hidden", c.hidden);
  f("activation", c.activation);
  f("iterations", c.iterations);
  f("eval_every", c.eval_every);
  f("eval_interactions", c.eval_interactions);
  f("early_stop", c.early_stop);
  f("patience", c.patience);
  f("lambda_anneal", c.lambda_anneal);
  f("checkpoint_every", c.checkpoint_every);
  f("expert", c.expert);
}

json encode(Method m) { return to_string(m); }
json encode(il::BetaMode m) { return beta_mode_name(m); }
template <typename T>
json encode(const T& v) {
  return v;
}

void decode(const json& j, Method& m) { m = parse_method(j.get<std::string>()); }
void decode(const json& j, il::BetaMode& m) { m = parse_beta_mode(j.get<std::string>()); }
void decode(const json& j, double& v) {
  if (!j.is_number()) throw json::type_error::create(302, "expected a number", &j);
  v = j.get<double>();
}
void decode(const json& j, int& v) {
  if (!j.is_number_integer()) throw json::type_error::create(302, "expected an integer", &j);
  v = j.get<int>();
}
void decode(const json& j, std::uint64_t& v) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw json::type_error::create(302, "expected a non-negative integer", &j);
  v = j.get<std::uint64_t>();
}
void decode(const json& j, bool& v) {
  if (!j.is_boolean()) throw json::type_error::create(302, "expected a boolean", &j);
  v = j.get<bool>();
}
void decode(const json& j, std::string& v) {
  if (!j.is_string()) throw json::type_error::create(302, "expected a string", &j);
  v = j.get<std::string>();
}
void decode(const json& j, std::vector<int>& v) {
  if (!j.is_array()) throw json::type_error::create(302, "expected an array of integers", &j);
  v.clear();
  for (const auto& x : j) {
    if (!x.is_number_integer()) throw json::type_error::create(302, "expected an array of integers", &j);
    v.push_back(x.get<int>());
  }
}

std::set<std::string> field_names() {
  std::set<std::string> names;
  RunConfig c;
  visit_fields(c, [&](const char* name, auto&) { names.insert(name); });
  return names;
}

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigError(std::string("field '") + field + "': " + what);
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

}  // namespace

Method parse_method(const std::string& name) {
  for (const auto& [m, n] : kMethodNames)
    if (n == name) return m;
  throw ConfigError("field 'method': unknown method '" + name + "'");
}

std::string to_string(Method m) {
  for (const auto& [k, n] : kMethodNames)
    if (k == m) return n;
  return "unknown";
}

RunConfig RunConfig::defaults_for(Method m) {
  RunConfig c;
  c.method = m;
  switch (m) {
    case Method::kRlMdp:
    case Method::kRlPomdp:
    case Method::kRlAsym: break;
    case Method::kAil:
      c.beta0 = 1.0;
      c.beta_mode = il::BetaMode::kImmediateZero;
      break;
    case Method::kA2dQ:
      c.beta0 = 0.0;
      c.beta_mode = il::BetaMode::kImmediateZero;
      c.lambda = 0.5;
      break;
    case Method::kA2d:
    case Method::kOracle: break;
  }
  return c;
}

void RunConfig::validate() const {
  const auto& layouts = env::supported_layouts();
  require(std::find(layouts.begin(), layouts.end(), env) != layouts.end(), "env", "unknown environment '" + env + "'");
  require(gamma > 0.0 && gamma < 1.0, "gamma", "must lie in (0, 1)");
  require(horizon >= 1, "horizon", "must be at least 1");
  require(window >= 1 && window <= 16, "window", "must lie in [1, 16]");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda", "must lie in [0, 1]");
  require(beta0 >= 0.0 && beta0 <= 1.0, "beta0", "must lie in [0, 1]");
  require(beta_decay >= 0.0 && beta_decay <= 1.0, "beta_decay", "must lie in [0, 1]");
  require(entropy_alpha >= 0.0, "entropy_alpha", "must be non-negative");
  require(batch_steps >= 2, "batch_steps", "must be at least 2");
  require(buffer_capacity >= 1, "buffer_capacity", "must be positive");
  require(weight_cap >= 0.0, "weight_cap", "must be non-negative (0 disables the cap)");
  require(surrogate_entropy >= 0.0, "surrogate_entropy", "must be non-negative");
  require(lr_value > 0.0, "lr_value", "must be positive");
  require(lr_q > 0.0, "lr_q", "must be positive");
  require(lr_ail > 0.0, "lr_ail", "must be positive");
  require(l2 >= 0.0, "l2", "must be non-negative");
  require(value_epochs >= 0, "value_epochs", "must be non-negative");
  require(value_minibatches >= 1, "value_minibatches", "must be positive");
  require(ail_epochs >= 0, "ail_epochs", "must be non-negative");
  require(ail_batch >= 1, "ail_batch", "must be positive");
  require(max_kl > 0.0, "max_kl", "must be positive");
  require(cg_iters >= 1, "cg_iters", "must be positive");
  require(cg_damping >= 0.0, "cg_damping", "must be non-negative");
  require(backtrack_ratio > 0.0 && backtrack_ratio < 1.0, "backtrack_ratio", "must lie in (0, 1)");
  require(max_backtracks >= 0, "max_backtracks", "must be non-negative");
  for (int h : hidden) require(h >= 1, "hidden", "layer widths must be positive");
  require(activation == "tanh" || activation == "relu", "activation", "must be 'tanh' or 'relu'");
  require(iterations >= 0, "iterations", "must be non-negative");
  require(eval_every >= 1, "eval_every", "must be positive");
  require(eval_interactions >= 0, "eval_interactions", "must be non-negative");
  require(patience >= 1, "patience", "must be positive");
  require(checkpoint_every >= 0, "checkpoint_every", "must be non-negative");
  if (method == Method::kAil)
    require(!expert.empty(), "expert", "ail needs an expert: 'oracle' or the path of an rl_mdp checkpoint");
}

std::string RunConfig::to_json() const {
  json j = json::object();
  visit_fields(*this, [&](const char* name, const auto& v) { j[name] = encode(v); });
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) { return from_json(text, {}); }

RunConfig RunConfig::from_json(const std::string& text, const std::vector<std::string>& overrides) {
  json j = parse_json(text, "config");
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq);
    const std::string value = o.substr(eq + 1);
    json v = json::parse(value, nullptr, false);
    j[key] = v.is_discarded() ? json(value) : v;
  }

  const std::set<std::string> known = field_names();
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");

  Method method = Method::kA2d;
  if (j.contains("method")) {
    if (!j["method"].is_string()) throw ConfigError("field 'method': expected a string");
    method = parse_method(j["method"].get<std::string>());
  }
  RunConfig c = defaults_for(method);
  visit_fields(c, [&](const char* name, auto& member) {
    if (!j.contains(name)) return;
    try {
      decode(j[name], member);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("field '") + name + "': " + e.what());
    }
  });
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return RunConfig::from_json(ss.str(), overrides);
}

std::string output_root() {
  const char* root = std::getenv("A2D_LAB_OUTPUT_ROOT");
  return root && *root ? root : "runs";
}

env::PairSpec RunConfig::pair_spec() const {
  env::PairSpec s;
  s.layout = env;
  s.gamma = gamma;
  s.horizon = horizon;
  return s;
}

namespace {

nn::AdamConfig adam(double lr, double l2) {
  nn::AdamConfig a;
  a.lr = lr;
  a.l2 = l2;
  return a;
}

trpo::TrustRegionConfig trust_region(const RunConfig& c) {
  return {c.max_kl, c.cg_iters, c.cg_damping, c.backtrack_ratio, c.max_backtracks};
}

}  // namespace

A2dConfig RunConfig::a2d() const {
  A2dConfig a;
  a.window = window;
  a.batch_steps = batch_steps;
  a.lambda = lambda;
  a.entropy_alpha = entropy_alpha;
  a.normalize_advantages = normalize_advantages;
  a.advantage = method == Method::kA2dQ ? AdvantageSource::kQ : AdvantageSource::kGae;
  a.schedule = {beta0, beta_decay, beta_mode};
  a.buffer_capacity = buffer_capacity;
  a.refresh_buffer_targets = refresh_buffer_targets;
  a.weight_cap = weight_cap;
  a.surrogate_entropy = surrogate_entropy;
  a.hidden = hidden;
  a.activation = nn::parse_activation(activation);
  a.trust_region = trust_region(*this);
  a.value_fit = {value_epochs, value_minibatches};
  a.value_adam = adam(lr_value, l2);
  a.q_adam = adam(lr_q, l2);
  a.ail_adam = adam(lr_ail, l2);
  a.ail = {ail_epochs, ail_batch};
  a.lambda_anneal.enabled = lambda_anneal;
  return a;
}

RlConfig RunConfig::rl() const {
  RlConfig r;
  r.variant = method == Method::kRlMdp ? RlVariant::kMdp : method == Method::kRlPomdp ? RlVariant::kPomdp : RlVariant::kAsym;
  r.window = window;
  r.batch_steps = batch_steps;
  r.lambda = lambda;
  r.entropy_alpha = entropy_alpha;
  r.normalize_advantages = normalize_advantages;
  r.surrogate_entropy = surrogate_entropy;
  r.hidden = hidden;
  r.activation = nn::parse_activation(activation);
  r.trust_region = trust_region(*this);
  r.value_fit = {value_epochs, value_minibatches};
  r.value_adam = adam(lr_value, l2);
  return r;
}

AilConfig RunConfig::ail() const {
  AilConfig a;
  a.window = window;
  a.batch_steps = batch_steps;
  a.schedule = {beta0, beta_decay, beta_mode};
  a.buffer_capacity = buffer_capacity;
  a.hidden = hidden;
  a.activation = nn::parse_activation(activation);
  a.adam = adam(lr_ail, l2);
  a.step = {ail_epochs, ail_batch};
  return a;
}

LoopConfig RunConfig::loop(std::optional<double> target) const {
  LoopConfig l;
  l.iterations = iterations;
  l.eval_every = eval_every;
  l.eval_interactions = eval_interactions;
  if (early_stop) l.target = target;
  l.patience = patience;
  return l;
}

}  // namespace a2d
