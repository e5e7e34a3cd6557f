#include "a2d/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

using namespace a2d;
using json = nlohmann::ordered_json;

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets, const std::string& resume) {
  RunOutcome out;
  if (!resume.empty()) {
    Session s = load_checkpoint(resume);
    out = continue_run(s);
  } else {
    const RunConfig cfg = config_path.empty() ? RunConfig::from_json("{}", sets) : load_config(config_path, sets);
    out = run(cfg);
  }
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
  if (!out.oracle_json.empty()) {
    std::cout << out.oracle_json << '\n';
    return 0;
  }
  const LoopState& st = out.result.state;
  json j;
  j["output_dir"] = out.output_dir;
  j["iterations"] = st.next_iteration;
  j["env_steps_total"] = st.env_steps_total;
  j["best_deterministic_return"] = st.best_deterministic;
  j["target"] = out.target ? json(*out.target) : json(nullptr);
  j["steps_to_target"] = st.steps_to_target;
  j["final_buffer_kl"] = st.last.buffer_kl;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_oracle(const std::string& env_name, int window, bool exact) {
  const env::ProcessPair pair = env::make_pair(env_name);
  std::cout << oracle_report(pair, window, exact) << '\n';
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& sets, std::vector<double> lambdas,
              std::vector<std::uint64_t> seeds) {
  const RunConfig cfg = load_config(config_path, sets);
  if (lambdas.empty()) lambdas = kDefaultLambdas;
  if (seeds.empty()) seeds = {cfg.seed};
  const auto entries = sweep_lambda(cfg, lambdas, seeds);
  print_sweep_table(std::cout, entries);
  return 0;
}

int cmd_env_dump(const std::string& env_name, bool states) {
  const env::ProcessPair pair = env::make_pair(env_name);
  std::cout << pair.render_layout() << '\n';
  std::cout << "states " << pair.num_states() << " (terminal " << pair.terminal_state() << "), configurations "
            << pair.num_configs() << ", state_dim " << pair.state_dim() << ", obs_dim " << pair.obs_dim()
            << ", gamma " << pair.gamma() << ", horizon " << pair.horizon() << '\n';
  std::cout << "initial states:";
  for (auto s : pair.initial_states()) std::cout << ' ' << s << " (p=" << pair.init_dist()[s] << ')';
  std::cout << '\n';
  if (states)
    for (env::StateId s = 0; s < pair.num_states(); ++s) std::cout << s << ": " << pair.describe_state(s) << '\n';
  return 0;
}

int cmd_eval(const std::string& path, int interactions, bool best, std::uint64_t seed) {
  Session s = load_checkpoint(path);
  if (best && s.loop.best_params.size() > 0) s.trainer->set_policy_params(s.loop.best_params);
  Rng rng(seed);
  const EvalResult ev = evaluate(*s.pair, s.trainer->policy(), interactions, s.trainer->window(), rng);
  json j;
  j["method"] = to_string(s.config.method);
  j["env"] = s.config.env;
  j["iteration"] = s.loop.next_iteration;
  j["episodes"] = ev.episodes;
  j["interactions"] = ev.interactions;
  j["stochastic_return_mean"] = ev.stochastic_mean;
  j["stochastic_return_std"] = ev.stochastic_std;
  j["deterministic_return"] = ev.deterministic_return;
  j["per_config_returns"] = ev.per_config_returns;
  if (const auto ex = s.trainer->expert()) j["expert_return_probe"] = deterministic_return(*s.pair, *ex, s.trainer->window());
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"A2D and baselines on MDP/POMDP gridworld pairs"};
  app.require_subcommand(1);

  std::string config_path, resume, env_name = "frozen_lake", checkpoint;
  std::vector<std::string> sets;
  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds;
  int window = 1, interactions = 2000;
  bool exact = false, states = false, best = false;
  std::uint64_t eval_seed = 0;

  auto* run_cmd = app.add_subcommand("run", "Train one method from a JSON config");
  run_cmd->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  run_cmd->add_option("--set", sets, "Override, key=value (repeatable)");
  run_cmd->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);

  auto* oracle_cmd = app.add_subcommand("oracle", "Print exact values for an environment");
  oracle_cmd->add_option("--env", env_name)->required();
  oracle_cmd->add_option("--window", window, "Belief window length");
  oracle_cmd->add_flag("--exact-a2d", exact, "Also run exact tabular A2D");

  auto* sweep_cmd = app.add_subcommand("sweep-lambda", "Run a2d over several GAE lambdas");
  sweep_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--set", sets);
  sweep_cmd->add_option("--lambdas", lambdas);
  sweep_cmd->add_option("--seeds", seeds);

  auto* env_cmd = app.add_subcommand("env", "Environment utilities");
  env_cmd->require_subcommand(1);
  auto* dump_cmd = env_cmd->add_subcommand("dump", "Print the layout and state space");
  dump_cmd->add_option("--env", env_name)->required();
  dump_cmd->add_flag("--states", states, "List every state");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate the policy stored in a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--interactions", interactions);
  eval_cmd->add_flag("--best", best, "Use the best deterministic parameters seen");
  eval_cmd->add_option("--seed", eval_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      if (!config_path.empty() && !resume.empty()) throw ConfigError("give at most one of --config and --resume");
      return cmd_run(config_path, sets, resume);
    }
    if (*oracle_cmd) return cmd_oracle(env_name, window, exact);
    if (*sweep_cmd) return cmd_sweep(config_path, sets, lambdas, seeds);
    if (*dump_cmd) return cmd_env_dump(env_name, states);
    if (*eval_cmd) return cmd_eval(checkpoint, interactions, best, eval_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const CorruptFileError& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
