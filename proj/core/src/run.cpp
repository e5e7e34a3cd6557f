#include "a2d/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace a2d {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

il::ExpertFn load_expert(const RunConfig& cfg, const env::ProcessPair& pair) {
  if (cfg.expert == "oracle") {
    const oracle::Model model(pair);
    return tabular_expert(oracle::optimal_mdp_policy(model).policy);
  }
  Session src;
  try {
    src = load_checkpoint(cfg.expert);
  } catch (const CorruptFileError& e) {
    throw ConfigError(std::string("field 'expert': ") + e.what());
  }
  if (src.config.method != Method::kRlMdp) throw ConfigError("field 'expert': checkpoint is not an rl_mdp run");
  if (src.config.env != cfg.env) throw ConfigError("field 'expert': checkpoint was trained on another environment");
  auto* rl = dynamic_cast<RlTrainer*>(src.trainer.get());
  auto net = std::make_shared<nn::CategoricalPolicy>(rl->policy_net());
  if (src.loop.best_params.size() > 0) net->net().set_params(src.loop.best_params);
  return [net](env::StateId, const Vec& s) { return net->probs(s); };
}

json value_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text << '\n';
}

std::string default_output_dir(const RunConfig& cfg) {
  return (fs::path(output_root()) / (to_string(cfg.method) + "_" + cfg.env + "_s" + std::to_string(cfg.seed))).string();
}

}  // namespace

Session Session::create(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.method == Method::kOracle) throw ConfigError("field 'method': oracle runs have no trainer");
  Session s;
  s.config = cfg;
  s.pair = std::make_unique<env::ProcessPair>(env::make_pair(cfg.pair_spec()));
  Rng master(cfg.seed);
  s.train_rng.seed(master());
  s.eval_rng.seed(master());
  Rng init(master());
  switch (cfg.method) {
    case Method::kRlMdp:
    case Method::kRlPomdp:
    case Method::kRlAsym: s.trainer = std::make_unique<RlTrainer>(*s.pair, cfg.rl(), init); break;
    case Method::kAil:
      s.trainer = std::make_unique<AilTrainer>(*s.pair, cfg.ail(), load_expert(cfg, *s.pair), init);
      break;
    case Method::kA2d:
    case Method::kA2dQ: {
      A2dConfig a = cfg.a2d();
      s.warnings = set_advantage_source(a, a.advantage);
      s.trainer = std::make_unique<A2dTrainer>(*s.pair, a, init);
      break;
    }
    case Method::kOracle: break;
  }
  return s;
}

double method_target(Method m, const env::ProcessPair& pair, int window) {
  const oracle::Model model(pair, window);
  if (m == Method::kRlMdp) return oracle::optimal_mdp_policy(model).value;
  return oracle::optimal_pomdp_policy(model).value;
}

std::string oracle_report(const env::ProcessPair& pair, int window, bool exact_a2d) {
  const oracle::Model model(pair, window);
  const auto mdp = oracle::optimal_mdp_policy(model);
  json j;
  j["env"] = pair.name();
  j["window"] = window;
  j["num_states"] = model.num_states();
  j["num_nodes"] = model.num_nodes();
  j["num_beliefs"] = model.num_beliefs();
  j["mdp_opt"] = mdp.value;
  try {
    j["pomdp_opt"] = oracle::optimal_pomdp_policy(model).value;
  } catch (const UnsupportedError& e) {
    j["pomdp_opt"] = nullptr;
    j["pomdp_warning"] = e.what();
  }
  const auto id = oracle::identifiability_report(model);
  j["ail_fixed_point"] = id.fixed_point_value;
  j["ail_fixed_point_converged"] = id.fixed_point_converged;
  j["divergence"] = value_or_null(id.divergence);
  j["normalized_divergence"] = value_or_null(id.normalized_divergence);
  j["identifiable"] = id.identifiable;
  j["return_gap"] = id.return_gap;
  if (exact_a2d) {
    const auto rep = oracle::exact_a2d(model);
    j["exact_a2d"] = {{"values", rep.values}, {"iterations", rep.iterations}, {"converged", rep.converged},
                      {"warning", rep.warning}};
  }
  return j.dump(2);
}

RunOutcome continue_run(Session& s, const RunOptions& opts) {
  RunOutcome out;
  out.warnings = s.warnings;
  try {
    out.target = method_target(s.config.method, *s.pair, s.config.window);
  } catch (const UnsupportedError& e) {
    out.warnings.push_back(std::string("no exact target, early stopping disabled: ") + e.what());
  }

  std::unique_ptr<MetricsWriter> writer;
  fs::path dir;
  if (opts.write_artifacts) {
    dir = s.config.output_dir.empty() ? default_output_dir(s.config) : s.config.output_dir;
    fs::create_directories(dir);
    write_text(dir / "config.resolved", s.config.to_json());
    writer = std::make_unique<MetricsWriter>((dir / "metrics.jsonl").string(), s.config.method);
    out.output_dir = dir.string();
  }

  int count = 0;
  const RecordSink sink = [&](const MetricsRecord& rec, const LoopState& state) {
    if (writer) writer->write(rec);
    ++count;
    if (writer && s.config.checkpoint_every > 0 && count % s.config.checkpoint_every == 0) {
      s.loop = state;
      save_checkpoint((dir / "checkpoint.bin").string(), s);
    }
    return opts.stop_after_records < 0 || count < opts.stop_after_records;
  };
  out.result = train_loop(*s.trainer, *s.pair, s.config.loop(out.target), s.train_rng, s.eval_rng, s.loop, sink);
  s.loop = out.result.state;

  if (writer) {
    save_checkpoint((dir / "checkpoint.bin").string(), s);
    const LoopState& st = s.loop;
    json summary;
    summary["method"] = to_string(s.config.method);
    summary["env"] = s.config.env;
    summary["seed"] = s.config.seed;
    summary["target"] = out.target ? json(*out.target) : json(nullptr);
    summary["best_deterministic_return"] = value_or_null(st.best_deterministic);
    summary["final_deterministic_return"] =
        out.result.records.empty() ? json(nullptr) : json(out.result.records.back().deterministic_return);
    summary["final_buffer_kl"] = value_or_null(st.last.buffer_kl);
    summary["steps_to_target"] = st.steps_to_target;
    summary["env_steps_total"] = st.env_steps_total;
    summary["iterations"] = st.next_iteration;
    summary["early_stopped"] = st.early_stopped;
    summary["warnings"] = out.warnings;
    write_text(dir / "summary.json", summary.dump(2));
  }
  return out;
}

RunOutcome run(const RunConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  if (cfg.method == Method::kOracle) {
    RunOutcome out;
    const env::ProcessPair pair = env::make_pair(cfg.pair_spec());
    out.oracle_json = oracle_report(pair, cfg.window);
    if (opts.write_artifacts) {
      const fs::path dir = cfg.output_dir.empty() ? default_output_dir(cfg) : cfg.output_dir;
      fs::create_directories(dir);
      write_text(dir / "config.resolved", cfg.to_json());
      write_text(dir / "oracle.json", out.oracle_json);
      out.output_dir = dir.string();
    }
    return out;
  }
  Session s = Session::create(cfg);
  return continue_run(s, opts);
}

std::vector<SweepEntry> sweep_lambda(const RunConfig& base, const std::vector<double>& lambdas,
                                     const std::vector<std::uint64_t>& seeds, const RunOptions& opts) {
  if (base.method != Method::kA2d) throw ConfigError("field 'method': the lambda sweep runs a2d");
  std::vector<SweepEntry> out;
  const fs::path root = base.output_dir.empty() ? fs::path(output_root()) / ("sweep_lambda_" + base.env)
                                                : fs::path(base.output_dir);
  for (double lambda : lambdas) {
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.lambda = lambda;
      cfg.seed = seed;
      std::ostringstream name;
      name << "lambda_" << lambda << "_s" << seed;
      cfg.output_dir = (root / name.str()).string();
      const RunOutcome r = run(cfg, opts);
      SweepEntry e;
      e.lambda = lambda;
      e.seed = seed;
      e.best_deterministic = r.result.state.best_deterministic;
      e.final_deterministic = r.result.records.empty() ? 0.0 : r.result.records.back().deterministic_return;
      e.final_buffer_kl = r.result.state.last.buffer_kl;
      e.steps_to_target = r.result.state.steps_to_target;
      for (const auto& rec : r.result.records) e.buffer_kl_trace.push_back(rec.buffer_kl);
      out.push_back(std::move(e));
    }
  }
  return out;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void print_sweep_table(std::ostream& os, const std::vector<SweepEntry>& entries) {
  std::map<double, std::vector<const SweepEntry*>> by_lambda;
  for (const auto& e : entries) by_lambda[e.lambda].push_back(&e);
  os << std::left << std::setw(8) << "lambda" << std::setw(8) << "seeds" << std::setw(12) << "reached" << std::setw(14)
     << "best_det" << std::setw(14) << "final_det" << "final_kl\n";
  for (const auto& [lambda, group] : by_lambda) {
    std::vector<double> best, fin, kl;
    int reached = 0;
    for (const auto* e : group) {
      best.push_back(e->best_deterministic);
      fin.push_back(e->final_deterministic);
      kl.push_back(e->final_buffer_kl);
      if (e->steps_to_target >= 0) ++reached;
    }
    std::ostringstream frac;
    frac << reached << "/" << group.size();
    os << std::left << std::setw(8) << lambda << std::setw(8) << group.size() << std::setw(12) << frac.str()
       << std::setw(14) << median(best) << std::setw(14) << median(fin) << median(kl) << '\n';
  }
}

}  // namespace a2d
