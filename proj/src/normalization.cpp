#include "weakpheno/normalization.hpp"

#include <algorithm>
#include <cmath>

#include "weakpheno/error.hpp"
#include "weakpheno/rng.hpp"

namespace weakpheno {

namespace {

// Antiderivative of the mixture CDF: integral of F from -inf to t.
double cdf_integral(const GaussianMixtureFit& f, double t) {
  auto part = [t](double mu, double sigma) {
    const double u = (t - mu) / sigma;
    return sigma * (u * normal_cdf(u) + normal_pdf(u));
  };
  return f.lambda * part(f.mu0, f.sigma0) + (1.0 - f.lambda) * part(f.mu1, f.sigma1);
}

// Integral of 1 - F from t to +inf.
double survival_integral(const GaussianMixtureFit& f, double t) {
  auto part = [t](double mu, double sigma) {
    const double u = (t - mu) / sigma;
    return sigma * (normal_pdf(u) - u * normal_cdf(-u));
  };
  return f.lambda * part(f.mu0, f.sigma0) + (1.0 - f.lambda) * part(f.mu1, f.sigma1);
}

double mixture_cdf(const GaussianMixtureFit& f, double t) {
  return f.lambda * normal_cdf(t, f.mu0, f.sigma0) + (1.0 - f.lambda) * normal_cdf(t, f.mu1, f.sigma1);
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::vector<double> default_a_grid(int points) {
  if (points < 1) raise(ErrorKind::InvalidInput, "a grid needs at least one point");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) grid[i] = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
  return grid;
}

std::vector<double> log_normalize(std::span<const double> counts, std::span<const double> note_counts, double a) {
  if (counts.size() != note_counts.size()) raise(ErrorKind::InvalidInput, "counts and note counts differ in length");
  std::vector<double> out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = std::log1p(counts[i]) - a * std::log1p(note_counts[i]);
  return out;
}

GaussianMixtureFit divergence_reference_fit(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const std::size_t m = std::min<std::size_t>(n, 1000);
  std::vector<double> sub(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t idx = m == 1 ? 0 : (k * (n - 1)) / (m - 1);
    sub[k] = sorted[idx];
  }
  const double sd = population_sd(sorted);
  if (m < 10) {
    GaussianMixtureFit single;
    single.mu0 = single.mu1 = mean(sorted);
    single.sigma0 = single.sigma1 = sd > 0.0 ? sd : 1.0;
    single.lambda = 0.5;
    return single;
  }
  GaussianInit init = default_gaussian_init(sub, sd);
  EmSettings settings;
  settings.max_iter = 200;
  return fit_gaussian_mixture(sub, init, settings);
}

double cdf_l1_distance(std::span<const double> values, const GaussianMixtureFit& ref) {
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  double total = cdf_integral(ref, x.front()) + survival_integral(ref, x.back());
  double g_lo = cdf_integral(ref, x.front());
  for (std::size_t i = 1; i < n; ++i) {
    const double a = x[i - 1], b = x[i];
    const double g_hi = cdf_integral(ref, b);
    if (b > a) {
      const double c = static_cast<double>(i) / static_cast<double>(n);
      const double fa = c - mixture_cdf(ref, a);
      const double fb = c - mixture_cdf(ref, b);
      if (fa >= 0.0 && fb >= 0.0) {
        total += c * (b - a) - (g_hi - g_lo);
      } else if (fa <= 0.0 && fb <= 0.0) {
        total += (g_hi - g_lo) - c * (b - a);
      } else {
        // c - F is decreasing on [a, b]; locate the single crossing.
        double lo = a, hi = b;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (c - mixture_cdf(ref, mid) > 0.0) lo = mid; else hi = mid;
        }
        const double root = 0.5 * (lo + hi);
        const double g_root = cdf_integral(ref, root);
        total += c * (root - a) - (g_root - g_lo);
        total += (g_hi - g_root) - c * (b - root);
      }
    }
    g_lo = g_hi;
  }
  return std::max(total, 0.0);
}

double divergence(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (*mn == *mx) return 0.0;
  return cdf_l1_distance(values, divergence_reference_fit(values));
}

NormalizedSilver normalize_silver(std::span<const double> counts, std::span<const double> note_counts,
                                  std::span<const double> a_grid) {
  if (a_grid.empty()) raise(ErrorKind::InvalidInput, "a grid is empty");
  if (counts.size() != note_counts.size()) raise(ErrorKind::InvalidInput, "counts and note counts differ in length");
  NormalizedSilver out;
  out.divergence.resize(a_grid.size());
  std::size_t best = 0;
  for (std::size_t g = 0; g < a_grid.size(); ++g) {
    out.divergence[g] = divergence(log_normalize(counts, note_counts, a_grid[g]));
    const double d = out.divergence[g], db = out.divergence[best];
    const bool tie = std::abs(d - db) <= 1e-9 * std::max(std::abs(db), 1e-300);
    if (g > 0 && ((d < db && !tie) || (tie && a_grid[g] < a_grid[best]))) best = g;
  }
  out.exponent_a = a_grid[best];
  out.divergence_at_a = out.divergence[best];
  out.values = log_normalize(counts, note_counts, out.exponent_a);
  return out;
}

Eigen::MatrixXd corrupt_dropout(const Eigen::MatrixXd& matrix, const DropoutConfig& config,
                                const std::vector<bool>& columns) {
  if (!(config.rate_r >= 0.0 && config.rate_r <= 1.0)) raise(ErrorKind::InvalidInput, "dropout rate outside [0,1]");
  if (columns.size() != static_cast<std::size_t>(matrix.cols()))
    raise(ErrorKind::InvalidInput, "column mask does not match matrix width");
  Eigen::MatrixXd out = matrix;
  if (matrix.rows() == 0) return out;
  const Eigen::RowVectorXd means = matrix.colwise().mean();
  Rng rng = make_rng(config.seed);
  for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
    if (!columns[static_cast<std::size_t>(j)]) continue;
    for (Eigen::Index i = 0; i < matrix.rows(); ++i)
      if (uniform01(rng) < config.rate_r) out(i, j) = means(j);
  }
  return out;
}

Eigen::MatrixXd corrupt_dropout(const Eigen::MatrixXd& matrix, const DropoutConfig& config) {
  return corrupt_dropout(matrix, config, std::vector<bool>(static_cast<std::size_t>(matrix.cols()), true));
}

DropoutRegression dropout_regression(const Eigen::VectorXd& response, const Eigen::MatrixXd& design,
                                     const std::vector<bool>& corrupt_columns, const DropoutConfig& config) {
  if (response.size() != design.rows()) raise(ErrorKind::InvalidInput, "response and design differ in length");
  if (config.repetitions < 1) raise(ErrorKind::InvalidInput, "dropout repetitions must be positive");
  DropoutRegression out;
  out.coefficients = Eigen::VectorXd::Zero(design.cols());
  if (response.size() == 0) raise(ErrorKind::InsufficientData, "empty regression");
  if (response.maxCoeff() == response.minCoeff()) {
    out.degenerate = true;
    out.intercept = response(0);
    return out;
  }
  const Eigen::Index n = design.rows(), p = design.cols();
  Eigen::MatrixXd full(n, p + 1);
  full.col(0).setOnes();
  for (int rep = 0; rep < config.repetitions; ++rep) {
    DropoutConfig c = config;
    c.seed = derive_seed(config.seed, static_cast<std::uint64_t>(rep));
    full.rightCols(p) = corrupt_dropout(design, c, corrupt_columns);
    const auto ls = least_squares(full, response);
    out.intercept += ls.coefficients(0);
    out.coefficients += ls.coefficients.tail(p);
    out.rank_deficient = out.rank_deficient || ls.rank_deficient;
  }
  out.intercept /= config.repetitions;
  out.coefficients /= config.repetitions;
  return out;
}

Eigen::MatrixXd denoise_design(int target_index, const Eigen::MatrixXd& labels, const Eigen::MatrixXd& covariates) {
  const Eigen::Index n = labels.rows(), q = labels.cols();
  if (target_index < 0 || target_index >= q) raise(ErrorKind::InvalidInput, "target index out of range");
  if (covariates.cols() > 0 && covariates.rows() != n) raise(ErrorKind::InvalidInput, "covariate rows differ from labels");
  Eigen::MatrixXd d(n, q + covariates.cols());
  d.col(0) = labels.col(target_index);
  Eigen::Index c = 1;
  for (Eigen::Index j = 0; j < q; ++j)
    if (j != target_index) d.col(c++) = labels.col(j);
  if (covariates.cols() > 0) d.rightCols(covariates.cols()) = covariates;
  return d;
}

DenoisedScores denoise_score(int target_index, const Eigen::MatrixXd& normalized_labels,
                             const Eigen::MatrixXd& covariates, const DropoutConfig& config) {
  const Eigen::MatrixXd design = denoise_design(target_index, normalized_labels, covariates);
  std::vector<bool> mask(static_cast<std::size_t>(design.cols()), false);
  mask[0] = true;
  DenoisedScores out;
  out.model.target_index = target_index;
  out.model.regression = dropout_regression(normalized_labels.col(target_index), design, mask, config);
  out.scores = apply_denoise(out.model, normalized_labels, covariates);
  return out;
}

std::vector<double> apply_denoise(const DenoiseModel& model, const Eigen::MatrixXd& normalized_labels,
                                  const Eigen::MatrixXd& covariates) {
  const Eigen::MatrixXd design = denoise_design(model.target_index, normalized_labels, covariates);
  if (design.cols() != model.regression.coefficients.size())
    raise(ErrorKind::InvalidInput, "design width does not match the fitted model");
  const Eigen::VectorXd z = design * model.regression.coefficients;
  return std::vector<double>(z.data(), z.data() + z.size());
}

}  // namespace weakpheno
