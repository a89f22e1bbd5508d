#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "weakpheno/cohort.hpp"

namespace weakpheno {

enum class NaKind { EpsilonSmoothing, MeanImputeNaRm };

struct NaStrategy {
  NaKind kind = NaKind::EpsilonSmoothing;
  double epsilon = 1e-10;
};

struct MetricSet {
  double auc = 0.5;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  double prob_mse = 0.0;
  double prob_mae = 0.0;
  double threshold_used = 0.5;
  int n_undefined_handled = 0;
  bool auc_defined = true;  // false when truth has a single class
};

struct NaApplied {
  std::vector<double> values;
  std::vector<bool> keep;  // entries that stay in the evaluation set
};

/// Undefined entries are NaN.
NaApplied apply_na_strategy(std::span<const double> values, const NaStrategy& na);

/// Midrank AUC; 0.5 when either class is absent.
double auc_midrank(std::span<const double> scores, std::span<const int> truth);

MetricSet compute_metrics(std::span<const double> predicted, std::span<const int> truth,
                          std::span<const double> true_probs, double threshold = 0.5, const NaStrategy& na = {});

struct SplitIndices {
  std::vector<std::size_t> train, test;  // each sorted ascending
};

SplitIndices split_indices(std::size_t n, std::size_t test_size, std::uint64_t seed);

/// Train labels stay inside `train_labels`; algorithms only receive `train`.
struct CohortSplit {
  SplitIndices rows;
  FeatureView train, test;
  Labels train_labels, test_labels;
};

CohortSplit split_cohort(const Cohort& cohort, std::size_t test_size, std::uint64_t seed);

struct LogitFit {
  double intercept = 0.0;
  double slope = 0.0;
  bool ridge_used = false;
  int iterations = 0;
};

/// Logistic regression of y on x by IRLS; switches to a ridge penalty (on the
/// slope) of `ridge` when the classes are separated or the fit diverges.
LogitFit fit_logistic_irls(std::span<const double> x, std::span<const int> y, double ridge = 1e-4);

struct BaselinePredictions {
  LogitFit fit;
  std::vector<double> train, test;
};

/// Supervised reference: logistic regression of Y on log(1 + s_icd).
BaselinePredictions icd_logit_baseline(const FeatureView& train, std::span<const int> train_y, const FeatureView& test);

}  // namespace weakpheno
