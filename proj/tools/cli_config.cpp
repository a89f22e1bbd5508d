#include "cli_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "weakpheno/error.hpp"

namespace weakpheno::cli {

using nlohmann::json;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "generator",     "scenario",      "algorithms",   "replicates",    "n",           "test_size",
      "seed",          "na",            "threshold",    "out",           "workers",     "strict",
      "dropout_r",     "dropout_repetitions", "a_grid_points", "gibbs_burn_in", "gibbs_samples", "null_topics",
      "dirichlet_beta"};
  return keys;
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("--config", std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("--config", "config file must hold a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known_keys().count(key)) throw ConfigError("config." + key, "unknown configuration key");
  return j;
}

template <typename T>
std::optional<T> from_json(const json& j, const std::string& key) {
  if (!j.contains(key)) return std::nullopt;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config." + key, "wrong type");
  }
}

template <typename T>
T pick(const std::optional<T>& flag, const std::optional<T>& file, T fallback) {
  if (flag) return *flag;
  if (file) return *file;
  return fallback;
}

long long positive(long long v, const std::string& field, long long min = 1) {
  if (v < min) throw ConfigError(field, "must be at least " + std::to_string(min));
  return v;
}

}  // namespace

std::vector<Algorithm> parse_algorithm_list(const std::string& csv, const std::string& field) {
  std::vector<Algorithm> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto pos = csv.find(',', start);
    const std::string name = csv.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    if (name == "all") {
      out = all_algorithms();
    } else {
      try {
        const Algorithm a = parse_algorithm(name);
        if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
      } catch (const Error& e) {
        throw ConfigError(field, e.what());
      }
    }
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (out.empty()) throw ConfigError(field, "no algorithms given");
  return out;
}

SimulateRun resolve_simulate(const SimulateFlags& f) {
  json file = json::object();
  if (f.config_file) file = load_config(*f.config_file);

  std::optional<std::string> file_algs;
  if (file.contains("algorithms")) {
    const auto& a = file["algorithms"];
    if (a.is_string()) {
      file_algs = a.get<std::string>();
    } else if (a.is_array()) {
      std::string s;
      for (const auto& v : a) {
        if (!v.is_string()) throw ConfigError("config.algorithms", "entries must be strings");
        s += (s.empty() ? "" : ",") + v.get<std::string>();
      }
      file_algs = s;
    } else {
      throw ConfigError("config.algorithms", "must be a string or an array of strings");
    }
  }

  auto field = [&](const char* flag, const char* key, bool from_flag) {
    return from_flag ? std::string(flag) : std::string("config.") + key;
  };

  SimulateRun run;
  SimulationConfig& c = run.config;

  const std::string gen = pick(f.generator, from_json<std::string>(file, "generator"), std::string("simplified"));
  try {
    c.generator = parse_generator(gen);
  } catch (const Error& e) {
    throw ConfigError(field("--generator", "generator", f.generator.has_value()), e.what());
  }
  const std::string scen = pick(f.scenario, from_json<std::string>(file, "scenario"), std::string("common_informative"));
  try {
    c.scenario = parse_scenario(scen);
  } catch (const Error& e) {
    throw ConfigError(field("--scenario", "scenario", f.scenario.has_value()), e.what());
  }
  c.algorithms = parse_algorithm_list(pick(f.algorithms, file_algs, std::string("all")),
                                      field("--algorithms", "algorithms", f.algorithms.has_value()));

  c.replicates = static_cast<int>(positive(pick(f.replicates, from_json<long long>(file, "replicates"), 50LL),
                                           field("--replicates", "replicates", f.replicates.has_value())));
  c.n = static_cast<std::size_t>(positive(pick(f.n, from_json<long long>(file, "n"), 10000LL), field("--n", "n", f.n.has_value()), 2));
  const long long ts = pick(f.test_size, from_json<long long>(file, "test_size"), 200LL);
  const std::string ts_field = field("--test-size", "test_size", f.test_size.has_value());
  positive(ts, ts_field);
  if (static_cast<std::size_t>(ts) >= c.n) throw ConfigError(ts_field, "must be smaller than n");
  c.test_size = static_cast<std::size_t>(ts);
  c.seed = pick(f.seed, from_json<std::uint64_t>(file, "seed"), std::uint64_t{1});

  const std::string na = pick(f.na, from_json<std::string>(file, "na"), std::string("epsilon"));
  if (na == "epsilon") {
    c.na.kind = NaKind::EpsilonSmoothing;
  } else if (na == "narm") {
    c.na.kind = NaKind::MeanImputeNaRm;
  } else {
    throw ConfigError(field("--na", "na", f.na.has_value()), "must be 'epsilon' or 'narm'");
  }
  c.threshold = pick(f.threshold, from_json<double>(file, "threshold"), 0.5);
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0))
    throw ConfigError(field("--threshold", "threshold", f.threshold.has_value()), "must lie in [0,1]");
  c.workers = static_cast<int>(positive(pick(f.workers, from_json<long long>(file, "workers"), 1LL),
                                        field("--workers", "workers", f.workers.has_value())));

  auto& s = c.settings;
  s.dropout_r = pick(f.dropout_r, from_json<double>(file, "dropout_r"), 0.3);
  if (!(s.dropout_r >= 0.0 && s.dropout_r <= 1.0))
    throw ConfigError(field("--dropout-r", "dropout_r", f.dropout_r.has_value()), "must lie in [0,1]");
  s.dropout_repetitions = static_cast<int>(positive(pick(f.dropout_repetitions, from_json<long long>(file, "dropout_repetitions"), 10LL),
                                                    field("--dropout-repetitions", "dropout_repetitions", f.dropout_repetitions.has_value())));
  s.a_grid_points = static_cast<int>(positive(pick(f.a_grid_points, from_json<long long>(file, "a_grid_points"), 101LL),
                                              field("--a-grid-points", "a_grid_points", f.a_grid_points.has_value())));
  s.gibbs_burn_in = static_cast<int>(positive(pick(f.gibbs_burn_in, from_json<long long>(file, "gibbs_burn_in"), 50LL),
                                              field("--gibbs-burn-in", "gibbs_burn_in", f.gibbs_burn_in.has_value()), 0));
  s.gibbs_samples = static_cast<int>(positive(pick(f.gibbs_samples, from_json<long long>(file, "gibbs_samples"), 50LL),
                                              field("--gibbs-samples", "gibbs_samples", f.gibbs_samples.has_value())));
  s.null_topics = static_cast<int>(positive(pick(f.null_topics, from_json<long long>(file, "null_topics"), 2LL),
                                            field("--null-topics", "null_topics", f.null_topics.has_value())));
  s.dirichlet_beta = pick(f.dirichlet_beta, from_json<double>(file, "dirichlet_beta"), 1.0);
  if (!(s.dirichlet_beta > 0.0))
    throw ConfigError(field("--dirichlet-beta", "dirichlet_beta", f.dirichlet_beta.has_value()), "must be positive");

  run.out_dir = pick(f.out, from_json<std::string>(file, "out"), std::string("out"));
  run.strict = f.strict || from_json<bool>(file, "strict").value_or(false);
  return run;
}

std::string error_json(const std::string& kind, const std::string& field, const std::string& message) {
  json j;
  j["error"] = {{"kind", kind}, {"message", message}};
  if (!field.empty()) j["error"]["field"] = field;
  return j.dump();
}

}  // namespace weakpheno::cli
