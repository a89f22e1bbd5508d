#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "weakpheno/harness.hpp"

namespace weakpheno::cli {

/// Raised for any invalid configuration; `field` names the offending flag or key.
struct ConfigError : std::runtime_error {
  ConfigError(std::string field_, const std::string& message)
      : std::runtime_error(message), field(std::move(field_)) {}
  std::string field;
};

/// Raw values as given on the command line; unset means "not given".
struct SimulateFlags {
  std::optional<std::string> config_file;
  std::optional<std::string> generator, scenario, algorithms, na, out;
  std::optional<long long> replicates, n, test_size, workers, dropout_repetitions, a_grid_points, gibbs_burn_in,
      gibbs_samples, null_topics;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold, dropout_r, dirichlet_beta;
  bool strict = false;
};

struct SimulateRun {
  SimulationConfig config;
  std::string out_dir = "out";
  bool strict = false;
};

/// Merges a JSON config file (if any) with flags, flags taking precedence,
/// and validates every field. Throws ConfigError.
SimulateRun resolve_simulate(const SimulateFlags& flags);

std::vector<Algorithm> parse_algorithm_list(const std::string& csv, const std::string& field);

std::string error_json(const std::string& kind, const std::string& field, const std::string& message);

}  // namespace weakpheno::cli
