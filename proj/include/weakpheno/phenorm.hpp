#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "weakpheno/cohort.hpp"
#include "weakpheno/core_stats.hpp"
#include "weakpheno/normalization.hpp"

namespace weakpheno {

enum class Variant { V1, V2 };

inline constexpr std::array<const char*, 3> kSilverLabels = {"icd", "nlp", "icdnlp"};

struct RunMetadata {
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, std::string>> info;
};

struct PhenotypeScores {
  std::vector<std::pair<std::string, std::vector<double>>> per_label;
  std::vector<double> aggregate;
  RunMetadata metadata;
};

struct PhenormConfig {
  Variant variant = Variant::V1;
  DropoutConfig dropout;
  std::vector<double> a_grid = default_a_grid();
  EmSettings em;
};

/// Everything before the mixture stage; shared by both variants.
struct PhenormScoreStage {
  std::array<double, 3> exponent_a{};
  std::array<DenoiseModel, 3> denoise;
  std::array<std::vector<double>, 3> z;  // denoised training scores
  std::array<bool, 3> degenerate{};
  RunMetadata metadata;
};

struct PhenormModel {
  Variant variant = Variant::V1;
  PhenormScoreStage stage;
  std::array<GaussianMixtureFit, 3> fits;
  std::array<bool, 3> flat{};  // label contributes 0.5 everywhere
};

/// Raw silver-label counts in kSilverLabels order.
std::array<std::vector<double>, 3> silver_counts(const FeatureView& view);

PhenormScoreStage phenorm_score_stage(const FeatureView& train, const PhenormConfig& config);
PhenormModel phenorm_fit(const PhenormScoreStage& stage, Variant variant, const EmSettings& em = {});
/// Scores patients with a fitted model (training rows or new rows).
PhenotypeScores phenorm_predict(const PhenormModel& model, const FeatureView& view);
PhenotypeScores phenorm_train_scores(const PhenormModel& model);

PhenotypeScores phenorm_fit_predict(const FeatureView& cohort, const PhenormConfig& config);

}  // namespace weakpheno
