#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "weakpheno/core_stats.hpp"
#include "weakpheno/datagen.hpp"
#include "weakpheno/error.hpp"
#include "weakpheno/evaluation.hpp"

using namespace weakpheno;

namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        pairs += 1;
      }
  return pairs > 0 ? num / pairs : 0.5;
}

// Plain gradient descent on the mean negative log-likelihood plus 0.5*ridge*b1^2/n.
std::pair<double, double> gd_logistic(const std::vector<double>& x, const std::vector<int>& y, double ridge) {
  double b0 = 0, b1 = 0;
  const double n = static_cast<double>(x.size());
  for (int it = 0; it < 200000; ++it) {
    double g0 = 0, g1 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - 1.0 / (1.0 + std::exp(-(b0 + b1 * x[i])));
      g0 += r;
      g1 += r * x[i];
    }
    g1 -= ridge * b1;
    b0 += 0.5 * g0 / n;
    b1 += 0.5 * g1 / n;
    if (std::abs(g0) + std::abs(g1) < 1e-11 * n) break;
  }
  return {b0, b1};
}

}  // namespace

TEST(Auc, MatchesBruteForceOnSmallInputs) {
  std::mt19937_64 rng(3);
  for (int n = 1; n <= 12; ++n)
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<double> s(n);
      std::vector<int> y(n);
      for (int i = 0; i < n; ++i) {
        s[i] = static_cast<double>(rng() % 5);
        y[i] = static_cast<int>(rng() % 2);
      }
      ASSERT_NEAR(auc_midrank(s, y), brute_auc(s, y), 1e-12) << "n=" << n;
    }
}

TEST(Auc, EveryLabelingOfSixTiedScores) {
  const std::vector<double> s = {0.1, 0.4, 0.4, 0.35, 0.8, 0.1};
  for (int code = 0; code < 64; ++code) {
    std::vector<int> y(6);
    for (int i = 0; i < 6; ++i) y[i] = (code >> i) & 1;
    ASSERT_NEAR(auc_midrank(s, y), brute_auc(s, y), 1e-12);
  }
  EXPECT_EQ(auc_midrank(s, std::vector<int>(6, 1)), 0.5);
}

TEST(Metrics, ConfusionCountsAndErrors) {
  const std::vector<double> p = {0.9, 0.6, 0.4, 0.2, 0.5};
  const std::vector<int> y = {1, 0, 1, 0, 1};
  const std::vector<double> t = {1.0, 0.5, 0.5, 0.0, 0.5};
  const auto m = compute_metrics(p, y, t);
  // predicted positive: 0.9, 0.6, 0.5 -> tp 2, fp 1; fn 1, tn 1
  EXPECT_NEAR(m.precision, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.recall, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.f1, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.accuracy, 3.0 / 5.0, 1e-15);
  EXPECT_NEAR(m.prob_mse, (0.01 + 0.01 + 0.01 + 0.04 + 0.0) / 5.0, 1e-9);
  EXPECT_NEAR(m.prob_mae, (0.1 + 0.1 + 0.1 + 0.2 + 0.0) / 5.0, 1e-9);
  EXPECT_NEAR(m.auc, brute_auc(p, y), 1e-15);
  EXPECT_TRUE(m.auc_defined);
  EXPECT_FALSE(compute_metrics(p, std::vector<int>(5, 0), t).auc_defined);
}

TEST(Metrics, NoPredictedPositives) {
  const std::vector<double> p = {0.1, 0.2};
  const auto m = compute_metrics(p, std::vector<int>{1, 0}, p);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.f1, 0.0);
}

TEST(NaStrategy, EpsilonAndMeanImpute) {
  const std::vector<double> v = {0.2, std::nan(""), 0.0, 0.6};
  const auto e = apply_na_strategy(v, NaStrategy{});
  EXPECT_EQ(e.values, (std::vector<double>{0.2, 1e-10, 1e-10, 0.6}));
  EXPECT_EQ(e.keep, (std::vector<bool>(4, true)));
  const auto m = apply_na_strategy(v, NaStrategy{NaKind::MeanImputeNaRm, 1e-10});
  EXPECT_NEAR(m.values[1], (0.2 + 0.0 + 0.6) / 3.0, 1e-15);
  EXPECT_EQ(m.keep, (std::vector<bool>{true, false, true, true}));
  const std::vector<double> all_nan(3, std::nan(""));
  EXPECT_THROW(apply_na_strategy(all_nan, NaStrategy{NaKind::MeanImputeNaRm, 1e-10}), Error);
}

TEST(NaStrategy, UndefinedTruthExcludedFromErrorsUnderNaRm) {
  const std::vector<double> p = {0.5, 0.5, 0.5};
  const std::vector<double> t = {0.5, std::nan(""), 0.0};
  const auto m = compute_metrics(p, std::vector<int>{1, 0, 0}, t, 0.5, NaStrategy{NaKind::MeanImputeNaRm, 1e-10});
  EXPECT_NEAR(m.prob_mse, 0.25 / 2.0, 1e-15);
  EXPECT_EQ(m.n_undefined_handled, 1);
  const auto e = compute_metrics(p, std::vector<int>{1, 0, 0}, t);
  EXPECT_NEAR(e.prob_mse, (0.0 + std::pow(0.5 - 1e-10, 2) + std::pow(0.5 - 1e-10, 2)) / 3.0, 1e-15);
}

TEST(Split, SizesDisjointDeterministic) {
  const auto s = split_indices(10000, 200, 77);
  EXPECT_EQ(s.train.size(), 9800u);
  EXPECT_EQ(s.test.size(), 200u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 10000u);
  EXPECT_TRUE(std::is_sorted(s.test.begin(), s.test.end()));
  const auto again = split_indices(10000, 200, 77);
  EXPECT_EQ(s.test, again.test);
  EXPECT_NE(s.test, split_indices(10000, 200, 78).test);
  try {
    split_indices(10, 10, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidSplit);
  }
}

TEST(Split, CohortSplitCarriesMatchingRows) {
  const auto c = generate_simplified(300, parse_scenario("common_informative"), 2);
  const auto s = split_cohort(c, 50, 4);
  ASSERT_EQ(s.test.size(), 50u);
  for (std::size_t k = 0; k < s.rows.test.size(); ++k) {
    const auto i = s.rows.test[k];
    EXPECT_EQ(s.test.s_icd[k], c.s_icd[i]);
    EXPECT_EQ(s.test_labels.y[k], c.y[i]);
  }
}

TEST(Logistic, MatchesGradientDescent) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0, 1);
  std::vector<double> x(300);
  std::vector<int> y(300);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = z(rng);
    y[i] = std::uniform_real_distribution<double>(0, 1)(rng) < 1.0 / (1.0 + std::exp(-(-0.5 + 1.5 * x[i])));
  }
  const auto fit = fit_logistic_irls(x, y);
  const auto [b0, b1] = gd_logistic(x, y, 0.0);
  EXPECT_FALSE(fit.ridge_used);
  EXPECT_NEAR(fit.intercept, b0, 1e-4);
  EXPECT_NEAR(fit.slope, b1, 1e-4);
}

TEST(Logistic, SeparatedDataUsesRidge) {
  const std::vector<double> x = {0, 1, 2, 3, 4, 5};
  const std::vector<int> y = {0, 0, 0, 1, 1, 1};
  const auto fit = fit_logistic_irls(x, y, 1e-2);
  EXPECT_TRUE(fit.ridge_used);
  EXPECT_TRUE(std::isfinite(fit.slope));
  EXPECT_GT(fit.slope, 0.0);
  // stationarity of the penalized likelihood
  double g0 = 0, g1 = -1e-2 * fit.slope;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - logistic(fit.intercept + fit.slope * x[i]);
    g0 += r;
    g1 += r * x[i];
  }
  EXPECT_NEAR(g0, 0.0, 1e-8);
  EXPECT_NEAR(g1, 0.0, 1e-8);
  EXPECT_THROW(fit_logistic_irls(x, std::vector<int>(6, 1)), Error);
}

TEST(Logistic, BaselineUsesLogIcd) {
  const auto c = generate_simplified(2000, parse_scenario("common_informative"), 6);
  const auto s = split_cohort(c, 200, 1);
  const auto b = icd_logit_baseline(s.train, s.train_labels.y, s.test);
  ASSERT_EQ(b.test.size(), 200u);
  EXPECT_NEAR(b.test[0], logistic(b.fit.intercept + b.fit.slope * std::log1p(s.test.s_icd[0])), 1e-15);
  EXPECT_GT(auc_midrank(b.test, s.test_labels.y), 0.85);
}
