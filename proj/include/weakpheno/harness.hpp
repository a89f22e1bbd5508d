#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "weakpheno/cohort.hpp"
#include "weakpheno/evaluation.hpp"
#include "weakpheno/map_algorithm.hpp"
#include "weakpheno/phenorm.hpp"
#include "weakpheno/surelda.hpp"

namespace weakpheno {

enum class Algorithm { IcdLogit, PhenormV1, PhenormV2, MapV1, MapV2, SureldaV1, SureldaV2, SureldaV3, SureldaV4 };

/// All algorithms in report order.
const std::vector<Algorithm>& all_algorithms();
std::string to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view text);

enum class SplitKind { Train, Test };
std::string to_string(SplitKind s);

struct AlgorithmSettings {
  double dropout_r = 0.3;
  int dropout_repetitions = 10;
  int a_grid_points = 101;
  int gibbs_burn_in = 50;
  int gibbs_samples = 50;
  int null_topics = 2;
  double dirichlet_beta = 1.0;
};

struct SimulationConfig {
  Generator generator = Generator::Simplified;
  Scenario scenario;
  std::vector<Algorithm> algorithms = all_algorithms();
  int replicates = 50;
  std::size_t n = 10000;
  std::size_t test_size = 200;
  std::uint64_t seed = 1;
  NaStrategy na;
  double threshold = 0.5;
  int workers = 1;
  AlgorithmSettings settings;
};

struct ReplicateRow {
  int replicate = 0;
  Algorithm algorithm = Algorithm::IcdLogit;
  SplitKind split = SplitKind::Test;
  MetricSet metrics;
};

struct ReplicateFailure {
  int replicate = 0;
  Algorithm algorithm = Algorithm::IcdLogit;
  std::string message;
};

struct SummaryRow {
  Algorithm algorithm = Algorithm::IcdLogit;
  SplitKind split = SplitKind::Test;
  int n_ok = 0;
  int n_failed = 0;
  // auc, f1, precision, recall, accuracy, prob_mse, prob_mae, n_undefined
  std::array<double, 8> mean{};
  std::array<double, 8> sd{};
};

inline constexpr std::array<const char*, 8> kMetricNames = {"auc", "f1", "precision", "recall",
                                                            "accuracy", "prob_mse", "prob_mae", "n_undefined"};
std::array<double, 8> metric_values(const MetricSet& m);

struct SimulationReport {
  SimulationConfig config;
  std::vector<ReplicateRow> per_replicate;  // ordered by replicate, algorithm, split
  std::vector<ReplicateFailure> failures;
  std::vector<SummaryRow> summary;
  std::vector<std::uint64_t> replicate_seeds;
  std::vector<double> empirical_prevalence;  // per replicate
  std::vector<double> undefined_fraction;    // per replicate
  RunMetadata metadata;                       // from the first replicate
};

std::uint64_t replicate_seed(std::uint64_t base, int replicate);

/// Per-algorithm predictions for one split of one cohort.
struct AlgorithmOutput {
  Algorithm algorithm = Algorithm::IcdLogit;
  std::vector<double> train, test;
  RunMetadata metadata;
  std::optional<std::string> error;
};

/// Fits every requested algorithm on `split.train` (the baseline alone reads
/// train labels) and predicts both splits.
std::vector<AlgorithmOutput> run_algorithms(const CohortSplit& split, const std::vector<Algorithm>& algorithms,
                                            const AlgorithmSettings& settings, std::uint64_t seed);

SimulationReport run_replications(const SimulationConfig& config);

/// Mean and population SD per (algorithm, split) over successful rows.
std::vector<SummaryRow> summarize(const std::vector<ReplicateRow>& rows, const std::vector<ReplicateFailure>& failures,
                                  const std::vector<Algorithm>& algorithms);

/// Canonical text of every field that influences results (workers excluded).
std::string canonical_config(const SimulationConfig& config);
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t v);

void write_report_csv(std::ostream& out, const SimulationReport& report);
void write_summary_csv(std::ostream& out, const SimulationReport& report);
void write_provenance_json(std::ostream& out, const SimulationReport& report);

/// Runs `job(i)` for i in [0, count) on `workers` threads.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

}  // namespace weakpheno
