#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "weakpheno/core_stats.hpp"
#include "weakpheno/datagen.hpp"
#include "weakpheno/error.hpp"
#include "weakpheno/evaluation.hpp"
#include "weakpheno/map_algorithm.hpp"

using namespace weakpheno;

namespace {

double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
  long conc = 0, disc = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double s = (a[i] - a[j]) * (b[i] - b[j]);
      if (s > 0) ++conc;
      else if (s < 0) ++disc;
    }
  return static_cast<double>(conc - disc) / static_cast<double>(conc + disc);
}

}  // namespace

TEST(PrevalenceRescale, HandSolvedCase) {
  // mean of {0.2, 0.4, 0.6} is 0.4; shifting to 0.3 requires c > 0
  const std::vector<double> p = {0.2, 0.4, 0.6};
  const auto r = prevalence_rescale(p, 0.3);
  EXPECT_GT(r.c, 0.0);
  EXPECT_NEAR(mean(r.calibrated), 0.3, 1e-9);
  // independent bisection on the same equation
  double lo = 0, hi = 5;
  for (int it = 0; it < 100; ++it) {
    const double c = 0.5 * (lo + hi);
    double s = 0;
    for (double v : p) s += 1.0 / (1.0 + std::exp(-(std::log(v / (1 - v)) - c)));
    (s / 3 > 0.3 ? lo : hi) = c;
  }
  EXPECT_NEAR(r.c, 0.5 * (lo + hi), 1e-9);
}

TEST(PrevalenceRescale, RandomInputsCalibrateAndPreserveOrder) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> p(50);
    for (double& v : p) v = u(rng);
    const double target = u(rng);
    const auto r = prevalence_rescale(p, target);
    EXPECT_NEAR(mean(r.calibrated), target, 1e-6);
    EXPECT_DOUBLE_EQ(kendall_tau(p, r.calibrated), 1.0);
  }
}

TEST(PrevalenceRescale, Errors) {
  const std::vector<double> p = {0.2, 0.4};
  EXPECT_THROW(prevalence_rescale(p, 0.0), Error);
  EXPECT_THROW(prevalence_rescale(p, 1.0), Error);
  EXPECT_THROW(prevalence_rescale({}, 0.5), Error);
}

TEST(Map, FilterRules) {
  FeatureView v;
  v.s_icd = {0, 1, 0, 2};
  v.s_nlp = {0, 0, 3, 1};
  v.s_icdnlp = {0, 1, 3, 3};
  v.note_count = {1, 1, 1, 1};
  EXPECT_EQ(map_filter(v, FilterRule::IcdPositive), (std::vector<bool>{false, true, false, true}));
  EXPECT_EQ(map_filter(v, FilterRule::IcdOrNlpPositive), (std::vector<bool>{false, true, true, true}));
  MapConfig c;
  EXPECT_EQ(c.effective_filter(), FilterRule::IcdPositive);
  c.variant = Variant::V2;
  EXPECT_EQ(c.effective_filter(), FilterRule::IcdOrNlpPositive);
  c.filter_rule = FilterRule::IcdPositive;
  EXPECT_EQ(c.effective_filter(), FilterRule::IcdPositive);
}

TEST(Map, EnsembleIsMeanOfSixModels) {
  const auto cohort = generate_simplified(2000, parse_scenario("common_informative"), 14);
  const auto s = map_fit_predict(feature_view(cohort), MapConfig{});
  ASSERT_EQ(s.per_model.size(), 6u);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    double m = 0;
    for (const auto& pm : s.per_model) m += pm.second[i];
    ASSERT_NEAR(s.ensemble[i], m / 6.0, 1e-15);
  }
  EXPECT_GT(auc_midrank(s.calibrated, cohort.y), 0.95);
}

TEST(Map, ZeroIcdPatientsScoreZeroInV1) {
  const auto cohort = generate_simplified(2000, parse_scenario("rare_informative"), 15);
  const auto s = map_fit_predict(feature_view(cohort), MapConfig{});
  int zeros = 0;
  for (std::size_t i = 0; i < cohort.size(); ++i)
    if (cohort.s_icd[i] == 0) {
      ++zeros;
      for (const auto& pm : s.per_model) ASSERT_EQ(pm.second[i], 0.0);
      ASSERT_LT(s.calibrated[i], 1e-6);
    }
  EXPECT_GT(zeros, 0);
}

TEST(Map, CalibratedMeanOnFilteredTrainingMatchesTarget) {
  const auto cohort = generate_simplified(3000, parse_scenario("common_informative"), 16);
  const auto view = feature_view(cohort);
  const auto model = map_fit(view, MapConfig{});
  const auto s = map_predict(model, view);
  EXPECT_NEAR(mean(s.calibrated), model.target_theta, 1e-6);
  EXPECT_NEAR(model.target_theta, model.poisson[2].theta * model.n_fit / static_cast<double>(view.size()), 1e-12);
  EXPECT_EQ(s.calibration_constant_c, model.c);
}

TEST(Map, TargetOverride) {
  const auto cohort = generate_simplified(1500, parse_scenario("common_informative"), 17);
  MapConfig c;
  c.target_theta = 0.25;
  const auto s = map_fit_predict(feature_view(cohort), c);
  EXPECT_NEAR(mean(s.calibrated), 0.25, 1e-6);
}

TEST(Map, EmptyFilterSet) {
  FeatureView v;
  v.s_icd = {0, 0, 0};
  v.s_nlp = {0, 0, 0};
  v.s_icdnlp = {0, 0, 0};
  v.note_count = {1, 1, 1};
  try {
    map_fit(v, MapConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyFilterSet);
  }
}
