#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "weakpheno/core_stats.hpp"

namespace weakpheno {

struct NormalizedSilver {
  std::vector<double> values;
  double exponent_a = 0.0;
  double divergence_at_a = 0.0;
  std::vector<double> divergence;  // D(a) at every grid point, same order as the grid
};

struct DropoutConfig {
  double rate_r = 0.3;
  int repetitions = 10;
  std::uint64_t seed = 0;
};

std::vector<double> default_a_grid(int points = 101);

/// log(1 + count) - a * log(1 + note).
std::vector<double> log_normalize(std::span<const double> counts, std::span<const double> note_counts, double a);

/// Two-component Gaussian fit used as the reference law in D(a). Fitted on at
/// most 1000 evenly spaced order statistics of `values`.
GaussianMixtureFit divergence_reference_fit(std::span<const double> values);

/// Integral of |ECDF(z) - F(z)| over the real line, F the reference mixture CDF.
double cdf_l1_distance(std::span<const double> values, const GaussianMixtureFit& reference);

/// D for one normalized score vector; 0 for constant input.
double divergence(std::span<const double> values);

NormalizedSilver normalize_silver(std::span<const double> counts, std::span<const double> note_counts,
                                  std::span<const double> a_grid);

/// Entry kept with probability 1 - r, otherwise replaced by its column mean.
Eigen::MatrixXd corrupt_dropout(const Eigen::MatrixXd& matrix, const DropoutConfig& config);

/// Same as corrupt_dropout but only the columns flagged in `columns` are touched.
Eigen::MatrixXd corrupt_dropout(const Eigen::MatrixXd& matrix, const DropoutConfig& config,
                                const std::vector<bool>& columns);

struct DropoutRegression {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;  // one per design column
  bool degenerate = false;
  bool rank_deficient = false;
};

/// Regresses `response` on [1, corrupted design], averaging the coefficients
/// over config.repetitions corruption draws (seed per repetition derived from
/// config.seed and the repetition index).
DropoutRegression dropout_regression(const Eigen::VectorXd& response, const Eigen::MatrixXd& design,
                                     const std::vector<bool>& corrupt_columns, const DropoutConfig& config);

struct DenoiseModel {
  int target_index = 0;
  DropoutRegression regression;  // design order: target, other labels, covariates
};

struct DenoisedScores {
  std::vector<double> scores;
  DenoiseModel model;
};

/// Design (S_j, S_{-j}, X) in that column order.
Eigen::MatrixXd denoise_design(int target_index, const Eigen::MatrixXd& labels, const Eigen::MatrixXd& covariates);

DenoisedScores denoise_score(int target_index, const Eigen::MatrixXd& normalized_labels,
                             const Eigen::MatrixXd& covariates, const DropoutConfig& config);

/// Scores new rows with a fitted model; the intercept is not included.
std::vector<double> apply_denoise(const DenoiseModel& model, const Eigen::MatrixXd& normalized_labels,
                                  const Eigen::MatrixXd& covariates);

}  // namespace weakpheno
