#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weakpheno/cohort.hpp"
#include "weakpheno/core_stats.hpp"
#include "weakpheno/phenorm.hpp"

namespace weakpheno {

enum class FilterRule {
  IcdPositive,       // S_ICD > 0
  IcdOrNlpPositive,  // S_ICD > 0 or S_NLP > 0
};

struct MapConfig {
  Variant variant = Variant::V1;
  EmSettings em;
  /// Overrides the variant's default subpopulation rule when set.
  std::optional<FilterRule> filter_rule;
  /// Overrides the fitted target prevalence when set.
  std::optional<double> target_theta;
  double epsilon = 1e-10;
  bool tied_variance = true;

  FilterRule effective_filter() const;
};

struct MapScores {
  // Six models: {icd, nlp, icdnlp} x {poisson, gaussian}, named "<label>_<family>".
  std::vector<std::pair<std::string, std::vector<double>>> per_model;
  std::vector<double> ensemble;
  std::vector<double> calibrated;
  double calibration_constant_c = 0.0;
  RunMetadata metadata;
};

struct MapModel {
  MapConfig config;
  std::array<PoissonMixtureFit, 3> poisson;
  std::array<GaussianMixtureFit, 3> gaussian;
  std::array<bool, 3> poisson_flat{}, gaussian_flat{};
  double target_theta = 0.0;
  double c = 0.0;
  std::size_t n_fit = 0;
  RunMetadata metadata;
};

struct RescaleResult {
  std::vector<double> calibrated;
  double c = 0.0;
};

/// Finds c with mean(logistic(logit(p) - c)) = target_theta by bisection.
RescaleResult prevalence_rescale(std::span<const double> probs, double target_theta);

std::vector<bool> map_filter(const FeatureView& view, FilterRule rule);

MapModel map_fit(const FeatureView& train, const MapConfig& config);
MapScores map_predict(const MapModel& model, const FeatureView& view);
MapScores map_fit_predict(const FeatureView& cohort, const MapConfig& config);

}  // namespace weakpheno
