#include "weakpheno/core_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "weakpheno/error.hpp"

namespace weakpheno {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

std::vector<double> finite_only(std::span<const double> values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values)
    if (std::isfinite(v)) out.push_back(v);
  return out;
}

double safe_log(double w) { return w > 0.0 ? std::log(w) : kNegInf; }

}  // namespace

double mean(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double population_sd(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) raise(ErrorKind::InsufficientData, "quantile of empty sample");
  p = std::clamp(p, 0.0, 1.0);
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double p) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, p);
}

double log_normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

double normal_pdf(double x, double mu, double sigma) { return std::exp(log_normal_pdf(x, mu, sigma)); }

double normal_cdf(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
}

double log_poisson_pmf(double k, double rate) {
  if (rate <= 0.0) return k == 0.0 ? 0.0 : kNegInf;
  return k * std::log(rate) - rate - std::lgamma(k + 1.0);
}

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

GaussianInit default_gaussian_init(std::span<const double> values, double sigma) {
  auto x = finite_only(values);
  if (x.empty()) raise(ErrorKind::InsufficientData, "no finite values");
  std::sort(x.begin(), x.end());
  GaussianInit init;
  init.mu0 = quantile_sorted(x, 0.1);
  init.mu1 = quantile_sorted(x, 0.9);
  init.sigma0 = init.sigma1 = sigma;
  init.lambda = 0.5;
  return init;
}

double gaussian_mixture_loglik(const GaussianMixtureFit& fit, std::span<const double> values) {
  const double lw0 = safe_log(fit.lambda), lw1 = safe_log(1.0 - fit.lambda);
  double ll = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    ll += log_add_exp(lw0 + log_normal_pdf(v, fit.mu0, fit.sigma0),
                      lw1 + log_normal_pdf(v, fit.mu1, fit.sigma1));
  }
  return ll;
}

GaussianMixtureFit fit_gaussian_mixture(std::span<const double> values, const GaussianInit& init,
                                        const EmSettings& settings) {
  const auto x = finite_only(values);
  if (x.size() < 10) raise(ErrorKind::InsufficientData, "gaussian mixture needs at least 10 finite values");
  if (!(init.sigma0 > 0.0) || !(init.sigma1 > 0.0))
    raise(ErrorKind::InvalidInput, "initial sigmas must be positive");
  if (!(settings.tol > 0.0)) raise(ErrorKind::InvalidInput, "tolerance must be positive");
  const double sd = population_sd(x);
  if (!(sd > 0.0)) raise(ErrorKind::DegenerateInput, "zero-variance input to gaussian mixture");
  const double floor = 1e-4 * sd;
  const std::size_t n = x.size();

  GaussianMixtureFit fit;
  fit.mu0 = init.mu0;
  fit.mu1 = init.mu1;
  fit.sigma0 = std::max(init.sigma0, floor);
  fit.sigma1 = init.tied_variance ? fit.sigma0 : std::max(init.sigma1, floor);
  fit.lambda = std::clamp(init.lambda, 0.0, 1.0);

  std::vector<double> r1(n);
  double prev = kNegInf;
  for (int it = 0; it < settings.max_iter; ++it) {
    const double lw0 = safe_log(fit.lambda), lw1 = safe_log(1.0 - fit.lambda);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a0 = lw0 + log_normal_pdf(x[i], fit.mu0, fit.sigma0);
      const double a1 = lw1 + log_normal_pdf(x[i], fit.mu1, fit.sigma1);
      const double lse = log_add_exp(a0, a1);
      ll += lse;
      r1[i] = std::exp(a1 - lse);
    }
    fit.loglik_trace.push_back(ll);
    fit.iterations = it + 1;
    if (it > 0 && std::abs(ll - prev) < settings.tol) {
      fit.converged = true;
      break;
    }
    prev = ll;

    double w0 = 0.0, w1 = 0.0, s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w1 += r1[i];
      w0 += 1.0 - r1[i];
      s1 += r1[i] * x[i];
      s0 += (1.0 - r1[i]) * x[i];
    }
    if (w0 > 0.0) fit.mu0 = s0 / w0;
    if (w1 > 0.0) fit.mu1 = s1 / w1;
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v0 += (1.0 - r1[i]) * (x[i] - fit.mu0) * (x[i] - fit.mu0);
      v1 += r1[i] * (x[i] - fit.mu1) * (x[i] - fit.mu1);
    }
    if (init.tied_variance) {
      fit.sigma0 = fit.sigma1 = std::max(std::sqrt((v0 + v1) / static_cast<double>(n)), floor);
    } else {
      if (w0 > 0.0) fit.sigma0 = std::max(std::sqrt(v0 / w0), floor);
      if (w1 > 0.0) fit.sigma1 = std::max(std::sqrt(v1 / w1), floor);
    }
    fit.lambda = w0 / static_cast<double>(n);
  }

  if (fit.mu1 < fit.mu0) {
    std::swap(fit.mu0, fit.mu1);
    std::swap(fit.sigma0, fit.sigma1);
    fit.lambda = 1.0 - fit.lambda;
  }
  return fit;
}

double poisson_mixture_loglik(const PoissonMixtureFit& fit, std::span<const double> counts) {
  const double lw0 = safe_log(1.0 - fit.theta), lw1 = safe_log(fit.theta);
  double ll = 0.0;
  for (double c : counts) {
    if (!std::isfinite(c)) continue;
    ll += log_add_exp(lw0 + log_poisson_pmf(c, fit.rate0), lw1 + log_poisson_pmf(c, fit.rate1));
  }
  return ll;
}

PoissonMixtureFit fit_poisson_mixture(std::span<const double> counts, double init_theta,
                                      const EmSettings& settings) {
  auto x = finite_only(counts);
  if (x.empty()) raise(ErrorKind::InsufficientData, "poisson mixture needs at least one count");
  for (double c : x)
    if (c < 0.0) raise(ErrorKind::InvalidInput, "counts must be nonnegative");
  if (!(init_theta > 0.0 && init_theta < 1.0)) raise(ErrorKind::InvalidInput, "init_theta must lie in (0,1)");
  if (!(settings.tol > 0.0)) raise(ErrorKind::InvalidInput, "tolerance must be positive");
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (*mn == *mx) raise(ErrorKind::DegenerateInput, "all counts identical");

  constexpr double kRateFloor = 1e-10;
  const std::size_t n = x.size();
  std::vector<double> lg(n);
  for (std::size_t i = 0; i < n; ++i) lg[i] = std::lgamma(x[i] + 1.0);

  PoissonMixtureFit fit;
  {
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const double m = mean(x);
    fit.rate0 = std::max(quantile_sorted(sorted, 0.1), 0.1 * m);
    fit.rate1 = std::max(quantile_sorted(sorted, 0.9), fit.rate0 + population_sd(x));
  }
  fit.theta = init_theta;

  std::vector<double> r1(n);
  double prev = kNegInf;
  for (int it = 0; it < settings.max_iter; ++it) {
    const double lw0 = safe_log(1.0 - fit.theta), lw1 = safe_log(fit.theta);
    const double lr0 = std::log(fit.rate0), lr1 = std::log(fit.rate1);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a0 = lw0 + x[i] * lr0 - fit.rate0 - lg[i];
      const double a1 = lw1 + x[i] * lr1 - fit.rate1 - lg[i];
      const double lse = log_add_exp(a0, a1);
      ll += lse;
      r1[i] = std::exp(a1 - lse);
    }
    fit.loglik_trace.push_back(ll);
    fit.iterations = it + 1;
    if (it > 0 && std::abs(ll - prev) < settings.tol) {
      fit.converged = true;
      break;
    }
    prev = ll;

    double w0 = 0.0, w1 = 0.0, s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w1 += r1[i];
      w0 += 1.0 - r1[i];
      s1 += r1[i] * x[i];
      s0 += (1.0 - r1[i]) * x[i];
    }
    if (w0 > 0.0) fit.rate0 = std::max(s0 / w0, kRateFloor);
    if (w1 > 0.0) fit.rate1 = std::max(s1 / w1, kRateFloor);
    fit.theta = w1 / static_cast<double>(n);
  }

  if (fit.rate1 < fit.rate0) {
    std::swap(fit.rate0, fit.rate1);
    fit.theta = 1.0 - fit.theta;
  }
  return fit;
}

double mixture_posterior(const GaussianMixtureFit& fit, double value) {
  const double a0 = safe_log(fit.lambda) + log_normal_pdf(value, fit.mu0, fit.sigma0);
  const double a1 = safe_log(1.0 - fit.lambda) + log_normal_pdf(value, fit.mu1, fit.sigma1);
  const double lse = log_add_exp(a0, a1);
  if (!std::isfinite(lse)) return 1.0 - fit.lambda;
  return std::clamp(std::exp(a1 - lse), 0.0, 1.0);
}

double mixture_posterior(const PoissonMixtureFit& fit, double value) {
  const double a0 = safe_log(1.0 - fit.theta) + log_poisson_pmf(value, fit.rate0);
  const double a1 = safe_log(fit.theta) + log_poisson_pmf(value, fit.rate1);
  const double lse = log_add_exp(a0, a1);
  if (!std::isfinite(lse)) return fit.theta;
  return std::clamp(std::exp(a1 - lse), 0.0, 1.0);
}

LeastSquaresResult least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& response) {
  if (design.rows() != response.size())
    raise(ErrorKind::InvalidInput, "design rows and response length differ");
  if (design.rows() == 0) raise(ErrorKind::InsufficientData, "empty least-squares system");
  LeastSquaresResult out;
  if (design.cols() == 0) {
    out.coefficients = Eigen::VectorXd(0);
    return out;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  out.coefficients = cod.solve(response);
  out.rank = cod.rank();
  out.rank_deficient = out.rank < design.cols();
  return out;
}

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

RankTestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) raise(ErrorKind::InvalidGrouping, "kruskal-wallis needs at least two groups");
  std::vector<double> pooled;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) raise(ErrorKind::InvalidGrouping, "group " + std::to_string(g) + " is empty");
    pooled.insert(pooled.end(), groups[g].begin(), groups[g].end());
  }
  const auto ranks = midranks(pooled);
  const double N = static_cast<double>(pooled.size());

  RankTestResult res;
  res.degrees_of_freedom = static_cast<int>(groups.size()) - 1;

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_sum = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_sum += t * t * t - t;
    i = j;
  }
  const double correction = 1.0 - tie_sum / (N * N * N - N);
  if (!(correction > 0.0)) return res;

  double acc = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rs = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) rs += ranks[offset + k];
    acc += rs * rs / static_cast<double>(g.size());
    offset += g.size();
  }
  const double h = (12.0 / (N * (N + 1.0)) * acc - 3.0 * (N + 1.0)) / correction;
  res.statistic = std::max(h, 0.0);
  boost::math::chi_squared dist(res.degrees_of_freedom);
  res.p_value = std::clamp(boost::math::cdf(boost::math::complement(dist, res.statistic)), 0.0, 1.0);
  return res;
}

}  // namespace weakpheno
