#include "a2d/harness.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace a2d {

using json = nlohmann::ordered_json;

namespace {

// JSON has no NaN or infinity; non-finite values are written as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_num(const json& j, const char* key) {
  if (!j.contains(key)) throw CorruptFileError(std::string("metrics record lacks '") + key + "'");
  const json& v = j.at(key);
  if (v.is_null()) return std::nan("");
  if (!v.is_number()) throw CorruptFileError(std::string("metrics field '") + key + "' is not a number");
  return v.get<double>();
}

}  // namespace

std::string metrics_json(const MetricsRecord& r, Method method) {
  json j;
  j["schema_version"] = kMetricsSchemaVersion;
  j["method"] = to_string(method);
  j["iteration"] = r.iteration;
  j["env_steps_total"] = r.env_steps_total;
  j["beta"] = num(r.beta);
  j["lambda"] = num(r.lambda);
  j["stochastic_return_mean"] = num(r.stochastic_return_mean);
  j["stochastic_return_std"] = num(r.stochastic_return_std);
  j["deterministic_return"] = num(r.deterministic_return);
  j["buffer_kl"] = num(r.buffer_kl);
  j["expert_return_probe"] = num(r.expert_return_probe);
  j["max_importance_weight"] = num(r.max_importance_weight);
  j["trpo_accepted"] = r.trpo_accepted;
  j["trpo_kl"] = num(r.trpo_kl);
  j["value_loss"] = num(r.value_loss);
  j["q_loss"] = r.q_loss ? num(*r.q_loss) : json(nullptr);
  return j.dump();
}

MetricsRecord parse_metrics_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw CorruptFileError(std::string("metrics line is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw CorruptFileError("metrics line is not an object");
  if (!j.contains("schema_version") || j["schema_version"] != kMetricsSchemaVersion)
    throw CorruptFileError("metrics schema version mismatch");
  if (!j.contains("method") || !j["method"].is_string()) throw CorruptFileError("metrics record lacks 'method'");
  parse_method(j["method"].get<std::string>());
  static const char* kKeys[] = {"schema_version",        "method",          "iteration",
                                "env_steps_total",       "beta",            "lambda",
                                "stochastic_return_mean", "stochastic_return_std", "deterministic_return",
                                "buffer_kl",             "expert_return_probe", "max_importance_weight",
                                "trpo_accepted",         "trpo_kl",         "value_loss",
                                "q_loss"};
  if (j.size() != std::size(kKeys)) throw CorruptFileError("metrics record has unexpected keys");
  for (const char* k : kKeys)
    if (!j.contains(k)) throw CorruptFileError(std::string("metrics record lacks '") + k + "'");

  MetricsRecord r;
  if (!j["iteration"].is_number_integer() || !j["env_steps_total"].is_number_integer())
    throw CorruptFileError("metrics counters must be integers");
  r.iteration = j["iteration"].get<int>();
  r.env_steps_total = j["env_steps_total"].get<long long>();
  r.beta = read_num(j, "beta");
  r.lambda = read_num(j, "lambda");
  r.stochastic_return_mean = read_num(j, "stochastic_return_mean");
  r.stochastic_return_std = read_num(j, "stochastic_return_std");
  r.deterministic_return = read_num(j, "deterministic_return");
  r.buffer_kl = read_num(j, "buffer_kl");
  r.expert_return_probe = read_num(j, "expert_return_probe");
  r.max_importance_weight = read_num(j, "max_importance_weight");
  if (!j["trpo_accepted"].is_boolean()) throw CorruptFileError("metrics field 'trpo_accepted' is not a boolean");
  r.trpo_accepted = j["trpo_accepted"].get<bool>();
  r.trpo_kl = read_num(j, "trpo_kl");
  r.value_loss = read_num(j, "value_loss");
  if (!j["q_loss"].is_null()) r.q_loss = read_num(j, "q_loss");
  return r;
}

MetricsWriter::MetricsWriter(const std::string& path, Method method)
    : out_(std::make_unique<std::ofstream>(path, std::ios::app)), method_(method) {
  if (!*out_) throw std::runtime_error("cannot open metrics file '" + path + "'");
}

MetricsWriter::~MetricsWriter() = default;

void MetricsWriter::write(const MetricsRecord& rec) {
  *out_ << metrics_json(rec, method_) << '\n';
  out_->flush();
}

}  // namespace a2d
