#pragma once

// Experiment orchestration: configuration, dispatch to trainers, metrics
// files and checkpoints.

#include "a2d/a2d.hpp"
#include "a2d/rl.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace a2d {

enum class Method { kRlMdp, kRlPomdp, kRlAsym, kAil, kA2d, kA2dQ, kOracle };

Method parse_method(const std::string& name);
std::string to_string(Method m);

struct RunConfig {
  Method method = Method::kA2d;
  std::string env = "frozen_lake";
  std::uint64_t seed = 0;
  std::string output_dir;  ///< empty: <output root>/<method>_<env>_s<seed>

  double gamma = 0.995;
  int horizon = 200;
  int window = 1;

  double lambda = 0.95;
  double beta0 = 1.0;
  double beta_decay = 0.8;
  il::BetaMode beta_mode = il::BetaMode::kMultiplicative;
  double entropy_alpha = 1.0;
  int batch_steps = 2000;
  int buffer_capacity = 5000;
  bool normalize_advantages = true;
  bool refresh_buffer_targets = true;
  double weight_cap = 0.0;
  double surrogate_entropy = 0.0;

  double lr_value = 7e-4;
  double lr_q = 3e-4;
  double lr_ail = 3e-4;
  double l2 = 0.001;
  int value_epochs = 25;
  int value_minibatches = 32;
  int ail_epochs = 2;
  int ail_batch = 64;

  double max_kl = 0.01;
  int cg_iters = 10;
  double cg_damping = 0.1;
  double backtrack_ratio = 0.5;
  int max_backtracks = 10;

  std::vector<int> hidden{64, 64};
  std::string activation = "tanh";

  int iterations = 300;
  int eval_every = 5;
  int eval_interactions = 2000;
  bool early_stop = true;
  int patience = 10;
  bool lambda_anneal = false;
  int checkpoint_every = 0;  ///< evaluations between checkpoints; 0: final only

  /// AIL only: "oracle" for the exact MDP-optimal expert, or the path of an
  /// rl_mdp checkpoint.
  std::string expert;

  /// Per-method defaults (entropy coefficient, beta schedule, lambda).
  static RunConfig defaults_for(Method m);

  /// Field-level ConfigError on any out-of-range value.
  void validate() const;

  /// JSON with every field present.
  std::string to_json() const;
  /// Unknown keys are rejected. Keys absent from `json` take the defaults of
  /// the given method.
  static RunConfig from_json(const std::string& json);
  /// Apply `key=value` overrides; values are parsed as JSON, falling back to
  /// a bare string.
  static RunConfig from_json(const std::string& json, const std::vector<std::string>& overrides);

  A2dConfig a2d() const;
  RlConfig rl() const;
  AilConfig ail() const;
  LoopConfig loop(std::optional<double> target) const;
  env::PairSpec pair_spec() const;
};

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Root directory for run artifacts: $A2D_LAB_OUTPUT_ROOT, else "runs".
std::string output_root();

// ---------------------------------------------------------------------------
// Metrics

inline constexpr int kMetricsSchemaVersion = 1;

std::string metrics_json(const MetricsRecord& rec, Method method);
/// Parses and checks one metrics line against the schema.
MetricsRecord parse_metrics_json(const std::string& line);

/// Append-only JSONL writer; the single owner of its file.
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, Method method);
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;
  void write(const MetricsRecord& rec);

 private:
  std::unique_ptr<std::ofstream> out_;
  Method method_;
};

// ---------------------------------------------------------------------------
// Oracle report

/// Exact values for one pair as JSON: optimal MDP and POMDP returns, the AIL
/// fixed point and identifiability. With `exact_a2d`, also the exact A2D
/// trajectory (slow on large pairs).
std::string oracle_report(const env::ProcessPair& pair, int window = 1, bool exact_a2d = false);

/// The deterministic return a method is expected to reach: the MDP optimum
/// for rl_mdp, the POMDP optimum otherwise.
double method_target(Method m, const env::ProcessPair& pair, int window);

// ---------------------------------------------------------------------------
// Runs and checkpoints

/// A configured trainer together with the pair it runs on.
struct Session {
  RunConfig config;
  std::unique_ptr<env::ProcessPair> pair;
  std::unique_ptr<Trainer> trainer;
  Rng train_rng;
  Rng eval_rng;
  LoopState loop;
  std::vector<std::string> warnings;

  /// Fresh trainer; throws ConfigError (e.g. for AIL without an expert).
  static Session create(const RunConfig& cfg);
};

inline constexpr std::uint64_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Session& s);
/// Reads into a fresh session; nothing is returned on error.
Session load_checkpoint(const std::string& path);
/// Serialized checkpoint bytes, for in-memory round trips.
std::string checkpoint_bytes(const Session& s);
Session session_from_bytes(const std::string& bytes);

struct RunOutcome {
  TrainResult result;
  std::optional<double> target;
  std::string output_dir;
  std::vector<std::string> warnings;
  std::string oracle_json;  ///< method = oracle only
};

struct RunOptions {
  bool write_artifacts = true;
  /// Stop after this many evaluation records (negative: never); the
  /// session keeps its state so it can be checkpointed and resumed.
  int stop_after_records = -1;
};

/// Train `s` to completion from its current loop state.
RunOutcome continue_run(Session& s, const RunOptions& opts = {});
/// Dispatch a config: oracle report or training run.
RunOutcome run(const RunConfig& cfg, const RunOptions& opts = {});

struct SweepEntry {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double best_deterministic = 0.0;
  double final_deterministic = 0.0;
  double final_buffer_kl = 0.0;
  long long steps_to_target = -1;
  std::vector<double> buffer_kl_trace;
};

inline const std::vector<double> kDefaultLambdas{0.0, 0.25, 0.5, 0.75, 0.9, 1.0};

/// Runs the base A2D config for every lambda and seed.
std::vector<SweepEntry> sweep_lambda(const RunConfig& base, const std::vector<double>& lambdas,
                                     const std::vector<std::uint64_t>& seeds, const RunOptions& opts = {});
/// Median-over-seeds comparison table.
void print_sweep_table(std::ostream& os, const std::vector<SweepEntry>& entries);

}  // namespace a2d
