#include "weakpheno/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "weakpheno/core_stats.hpp"
#include "weakpheno/error.hpp"
#include "weakpheno/rng.hpp"

namespace weakpheno {

NaApplied apply_na_strategy(std::span<const double> values, const NaStrategy& na) {
  NaApplied out;
  out.values.assign(values.begin(), values.end());
  out.keep.assign(values.size(), true);
  if (na.kind == NaKind::EpsilonSmoothing) {
    for (double& v : out.values) v = std::isnan(v) ? na.epsilon : std::max(v, na.epsilon);
    return out;
  }
  double s = 0.0;
  std::size_t k = 0;
  for (double v : values)
    if (!std::isnan(v)) {
      s += v;
      ++k;
    }
  if (k == 0) raise(ErrorKind::EmptyEvaluationSet, "every value is undefined");
  const double m = s / static_cast<double>(k);
  for (std::size_t i = 0; i < values.size(); ++i)
    if (std::isnan(values[i])) {
      out.values[i] = m;
      out.keep[i] = false;
    }
  return out;
}

double auc_midrank(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) raise(ErrorKind::InvalidInput, "scores and truth differ in length");
  const auto ranks = midranks(scores);
  double n1 = 0.0, n0 = 0.0, rs = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      n1 += 1.0;
      rs += ranks[i];
    } else {
      n0 += 1.0;
    }
  }
  if (n1 == 0.0 || n0 == 0.0) return 0.5;
  return (rs - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

MetricSet compute_metrics(std::span<const double> predicted, std::span<const int> truth, std::span<const double> true_probs,
                          double threshold, const NaStrategy& na) {
  const std::size_t n = predicted.size();
  if (truth.size() != n || true_probs.size() != n) raise(ErrorKind::InvalidInput, "metric inputs differ in length");
  if (n == 0) raise(ErrorKind::EmptyEvaluationSet, "nothing to evaluate");
  MetricSet m;
  m.threshold_used = threshold;
  for (std::size_t i = 0; i < n; ++i) m.n_undefined_handled += std::isnan(predicted[i]) + std::isnan(true_probs[i]);

  const NaApplied pred = apply_na_strategy(predicted, na);
  const NaApplied tp = apply_na_strategy(true_probs, na);

  m.auc = auc_midrank(pred.values, truth);
  const bool has1 = std::find(truth.begin(), truth.end(), 1) != truth.end();
  const bool has0 = std::any_of(truth.begin(), truth.end(), [](int v) { return v != 1; });
  m.auc_defined = has1 && has0;

  double tp_ = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = pred.values[i] >= threshold;
    const bool yes = truth[i] == 1;
    tp_ += pos && yes;
    fp += pos && !yes;
    fn += !pos && yes;
    tn += !pos && !yes;
  }
  m.precision = tp_ + fp > 0 ? tp_ / (tp_ + fp) : 0.0;
  m.recall = tp_ + fn > 0 ? tp_ / (tp_ + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = (tp_ + tn) / static_cast<double>(n);

  double se = 0.0, ae = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!tp.keep[i]) continue;
    const double d = pred.values[i] - tp.values[i];
    se += d * d;
    ae += std::abs(d);
    ++used;
  }
  if (used == 0) raise(ErrorKind::EmptyEvaluationSet, "no pair with a defined true probability");
  m.prob_mse = se / static_cast<double>(used);
  m.prob_mae = ae / static_cast<double>(used);
  return m;
}

SplitIndices split_indices(std::size_t n, std::size_t test_size, std::uint64_t seed) {
  if (test_size >= n) raise(ErrorKind::InvalidSplit, "test size must be smaller than the cohort");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = make_rng(seed);
  for (std::size_t i = 0; i < test_size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  SplitIndices s;
  s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(test_size));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(test_size), idx.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

CohortSplit split_cohort(const Cohort& cohort, std::size_t test_size, std::uint64_t seed) {
  CohortSplit s;
  s.rows = split_indices(cohort.size(), test_size, seed);
  s.train = feature_view(cohort, s.rows.train);
  s.test = feature_view(cohort, s.rows.test);
  s.train_labels = labels_of(cohort, s.rows.train);
  s.test_labels = labels_of(cohort, s.rows.test);
  return s;
}

namespace {

bool separated(std::span<const double> x, std::span<const int> y) {
  double min1 = INFINITY, max1 = -INFINITY, min0 = INFINITY, max0 = -INFINITY;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] == 1) {
      min1 = std::min(min1, x[i]);
      max1 = std::max(max1, x[i]);
    } else {
      min0 = std::min(min0, x[i]);
      max0 = std::max(max0, x[i]);
    }
  }
  return max0 <= min1 || max1 <= min0;
}

bool newton(std::span<const double> x, std::span<const int> y, double ridge, LogitFit& fit) {
  double b0 = 0.0, b1 = 0.0;
  for (int it = 0; it < 100; ++it) {
    double g0 = 0, g1 = -ridge * b1, h00 = 0, h01 = 0, h11 = ridge;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = logistic(b0 + b1 * x[i]);
      const double r = y[i] - p;
      const double w = p * (1.0 - p);
      g0 += r;
      g1 += r * x[i];
      h00 += w;
      h01 += w * x[i];
      h11 += w * x[i] * x[i];
    }
    const double det = h00 * h11 - h01 * h01;
    if (!(std::abs(det) > 1e-300)) return false;
    const double d0 = (h11 * g0 - h01 * g1) / det;
    const double d1 = (h00 * g1 - h01 * g0) / det;
    b0 += d0;
    b1 += d1;
    fit.iterations = it + 1;
    if (!std::isfinite(b0) || !std::isfinite(b1)) return false;
    if (std::abs(d0) + std::abs(d1) < 1e-10) {
      fit.intercept = b0;
      fit.slope = b1;
      return true;
    }
  }
  return false;
}

}  // namespace

LogitFit fit_logistic_irls(std::span<const double> x, std::span<const int> y, double ridge) {
  if (x.size() != y.size()) raise(ErrorKind::InvalidInput, "x and y differ in length");
  const bool has1 = std::find(y.begin(), y.end(), 1) != y.end();
  const bool has0 = std::any_of(y.begin(), y.end(), [](int v) { return v == 0; });
  if (!has1 || !has0) raise(ErrorKind::InsufficientData, "logistic baseline needs both classes in training");
  LogitFit fit;
  if (!separated(x, y) && newton(x, y, 0.0, fit)) return fit;
  fit = LogitFit{};
  fit.ridge_used = true;
  if (!newton(x, y, ridge, fit)) raise(ErrorKind::DegenerateInput, "ridge logistic regression failed to converge");
  return fit;
}

BaselinePredictions icd_logit_baseline(const FeatureView& train, std::span<const int> train_y, const FeatureView& test) {
  auto feature = [](const FeatureView& v) {
    std::vector<double> x(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) x[i] = std::log1p(v.s_icd[i]);
    return x;
  };
  const auto xtr = feature(train), xte = feature(test);
  BaselinePredictions out;
  out.fit = fit_logistic_irls(xtr, train_y, 1e-4);
  for (double v : xtr) out.train.push_back(logistic(out.fit.intercept + out.fit.slope * v));
  for (double v : xte) out.test.push_back(logistic(out.fit.intercept + out.fit.slope * v));
  return out;
}

}  // namespace weakpheno
