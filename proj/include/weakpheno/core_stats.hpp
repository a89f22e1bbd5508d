#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace weakpheno {

struct EmSettings {
  double tol = 1e-6;
  int max_iter = 500;
};

struct GaussianInit {
  double mu0 = 0.0;
  double mu1 = 1.0;
  double sigma0 = 1.0;
  double sigma1 = 1.0;
  double lambda = 0.5;
  bool tied_variance = false;  // one pooled sigma shared by both components
};

struct GaussianMixtureFit {
  double mu0 = 0.0;
  double sigma0 = 1.0;
  double mu1 = 0.0;
  double sigma1 = 1.0;
  double lambda = 0.5;  // weight of the control component
  std::vector<double> loglik_trace;
  bool converged = false;
  int iterations = 0;
};

struct PoissonMixtureFit {
  double rate0 = 1.0;
  double rate1 = 1.0;
  double theta = 0.5;  // weight of the case component
  std::vector<double> loglik_trace;
  bool converged = false;
  int iterations = 0;
};

struct RankTestResult {
  double statistic = 0.0;
  int degrees_of_freedom = 1;
  double p_value = 1.0;
};

struct LeastSquaresResult {
  Eigen::VectorXd coefficients;
  Eigen::Index rank = 0;
  bool rank_deficient = false;
};

/// Means at the 10th/90th percentiles, both SDs at `sigma`, lambda 0.5.
GaussianInit default_gaussian_init(std::span<const double> values, double sigma = 1.0);

GaussianMixtureFit fit_gaussian_mixture(std::span<const double> values, const GaussianInit& init,
                                        const EmSettings& settings = {});

/// Non-finite entries are ignored. `init_theta` is the starting case weight.
PoissonMixtureFit fit_poisson_mixture(std::span<const double> counts, double init_theta = 0.5,
                                      const EmSettings& settings = {});

double mixture_posterior(const GaussianMixtureFit& fit, double value);
double mixture_posterior(const PoissonMixtureFit& fit, double value);

double gaussian_mixture_loglik(const GaussianMixtureFit& fit, std::span<const double> values);
double poisson_mixture_loglik(const PoissonMixtureFit& fit, std::span<const double> counts);

LeastSquaresResult least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& response);

RankTestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

double mean(std::span<const double> values);
/// Population (divide by n) standard deviation.
double population_sd(std::span<const double> values);
/// Sample (divide by n-1) standard deviation; 0 for fewer than two values.
double sample_sd(std::span<const double> values);
/// Linear-interpolation quantile of an unsorted sample (type 7).
double quantile(std::span<const double> values, double p);
double quantile_sorted(std::span<const double> sorted, double p);

double normal_pdf(double x, double mu = 0.0, double sigma = 1.0);
double normal_cdf(double x, double mu = 0.0, double sigma = 1.0);
double log_normal_pdf(double x, double mu, double sigma);
double log_poisson_pmf(double k, double rate);

double logistic(double x);
double logit(double p);
/// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);

}  // namespace weakpheno
