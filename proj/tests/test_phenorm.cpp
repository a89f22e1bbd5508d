#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "weakpheno/datagen.hpp"
#include "weakpheno/error.hpp"
#include "weakpheno/evaluation.hpp"
#include "weakpheno/phenorm.hpp"

using namespace weakpheno;

namespace {

PhenormConfig fast_config(Variant v) {
  PhenormConfig c;
  c.variant = v;
  c.dropout.repetitions = 3;
  return c;
}

}  // namespace

TEST(Phenorm, AggregateIsMeanOfLabels) {
  const auto cohort = generate_simplified(1500, parse_scenario("common_informative"), 21);
  const auto s = phenorm_fit_predict(feature_view(cohort), fast_config(Variant::V1));
  ASSERT_EQ(s.per_label.size(), 3u);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const double m = (s.per_label[0].second[i] + s.per_label[1].second[i] + s.per_label[2].second[i]) / 3.0;
    ASSERT_NEAR(s.aggregate[i], m, 1e-15);
    ASSERT_GE(s.aggregate[i], 0.0);
    ASSERT_LE(s.aggregate[i], 1.0);
  }
}

TEST(Phenorm, VariantsAgreeOnInformativeSimplified) {
  const auto cohort = generate_simplified(2000, parse_scenario("common_informative"), 8);
  const auto view = feature_view(cohort);
  const auto stage = phenorm_score_stage(view, fast_config(Variant::V1));
  const auto v1 = phenorm_train_scores(phenorm_fit(stage, Variant::V1));
  const auto v2 = phenorm_train_scores(phenorm_fit(stage, Variant::V2));
  const double a1 = auc_midrank(v1.aggregate, cohort.y);
  const double a2 = auc_midrank(v2.aggregate, cohort.y);
  EXPECT_GT(a1, 0.95);
  EXPECT_NEAR(a1, a2, 1e-2);
}

TEST(Phenorm, PredictOnTrainingRowsMatchesTrainScores) {
  const auto cohort = generate_simplified(800, parse_scenario("rare_informative"), 3);
  const auto view = feature_view(cohort);
  const auto model = phenorm_fit(phenorm_score_stage(view, fast_config(Variant::V2)), Variant::V2);
  const auto a = phenorm_train_scores(model);
  const auto b = phenorm_predict(model, view);
  for (std::size_t i = 0; i < view.size(); ++i) ASSERT_NEAR(a.aggregate[i], b.aggregate[i], 1e-12);
}

TEST(Phenorm, ConstantSilverLabelGivesFlatPosterior) {
  auto cohort = generate_simplified(500, parse_scenario("common_informative"), 5);
  std::fill(cohort.s_icd.begin(), cohort.s_icd.end(), 3.0);
  for (std::size_t i = 0; i < cohort.size(); ++i) cohort.s_icdnlp[i] = cohort.s_icd[i] + cohort.s_nlp[i];
  std::fill(cohort.note_count.begin(), cohort.note_count.end(), 1.0);
  const auto s = phenorm_fit_predict(feature_view(cohort), fast_config(Variant::V1));
  for (double v : s.per_label[0].second) ASSERT_EQ(v, 0.5);
  EXPECT_FALSE(s.metadata.warnings.empty());
}

TEST(Phenorm, RankingInvariantToConstantNoteCount) {
  auto cohort = generate_simplified(1000, parse_scenario("common_informative"), 12);
  std::fill(cohort.note_count.begin(), cohort.note_count.end(), 1.0);
  const auto a = phenorm_fit_predict(feature_view(cohort), fast_config(Variant::V2));
  std::fill(cohort.note_count.begin(), cohort.note_count.end(), 5.0);
  const auto b = phenorm_fit_predict(feature_view(cohort), fast_config(Variant::V2));
  EXPECT_NEAR(auc_midrank(a.aggregate, cohort.y), auc_midrank(b.aggregate, cohort.y), 1e-9);
}

TEST(Phenorm, Deterministic) {
  const auto cohort = generate_lda(800, parse_scenario("rare_informative"), 6);
  const auto a = phenorm_fit_predict(feature_view(cohort), fast_config(Variant::V1));
  const auto b = phenorm_fit_predict(feature_view(cohort), fast_config(Variant::V1));
  EXPECT_EQ(a.aggregate, b.aggregate);
}

TEST(Phenorm, ReportsStageMetadata) {
  const auto cohort = generate_simplified(500, parse_scenario("common_informative"), 2);
  const auto s = phenorm_fit_predict(feature_view(cohort), fast_config(Variant::V1));
  const auto& info = s.metadata.info;
  auto has = [&](const std::string& k) {
    return std::any_of(info.begin(), info.end(), [&](const auto& p) { return p.first == k; });
  };
  EXPECT_TRUE(has("covariates_in_mixture"));
  EXPECT_TRUE(has("mixture_variance"));
}

TEST(Phenorm, EmptyCohortRejected) {
  FeatureView empty;
  EXPECT_THROW(phenorm_fit_predict(empty, fast_config(Variant::V1)), Error);
}
