#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "weakpheno/core_stats.hpp"

namespace weakpheno {

enum class MiddleMode {
  Quantile,  // everything between the two quantile strata
  Band,      // probabilities within middle_band_halfwidth of 0.5
};

struct SamplingPlan {
  int top_count = 80;
  int bottom_count = 80;
  int middle_count = 40;
  double top_quantile = 0.9;
  double bottom_quantile = 0.1;
  MiddleMode middle_mode = MiddleMode::Quantile;
  double middle_band_halfwidth = 0.1;
};

enum class Stratum { Top, Middle, Bottom };
std::string to_string(Stratum s);

struct SampledEncounter {
  std::int64_t id = 0;
  double prob = 0.0;
  Stratum stratum = Stratum::Middle;
};

struct StrataAssignment {
  std::vector<std::size_t> top, middle, bottom;  // positions into the input
};

/// Ranks by (prob, id); the top ceil(n(1-top_quantile)) and bottom
/// ceil(n*bottom_quantile) positions form the outer strata.
StrataAssignment assign_strata(std::span<const double> probs, std::span<const std::int64_t> ids, const SamplingPlan& plan);

std::vector<SampledEncounter> probability_guided_sample(std::span<const double> probs, std::span<const std::int64_t> ids,
                                                        const SamplingPlan& plan, std::uint64_t seed);

struct FeatureComparison {
  std::string feature;
  RankTestResult result;
};

/// Per-feature Kruskal-Wallis across groups, sorted by p-value (ties by name).
std::vector<FeatureComparison> compare_samples(const std::vector<std::string>& feature_names,
                                               const std::vector<std::vector<double>>& rows,
                                               const std::vector<std::string>& group_labels);

void write_sample_csv(std::ostream& out, const std::vector<SampledEncounter>& sample);
void write_comparison_csv(std::ostream& out, const std::vector<FeatureComparison>& results);

}  // namespace weakpheno
