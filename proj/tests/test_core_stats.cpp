#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "weakpheno/core_stats.hpp"
#include "weakpheno/error.hpp"
#include "weakpheno/rng.hpp"

using namespace weakpheno;

namespace {

std::vector<double> two_normals(std::size_t n, double m0, double m1, double s, double w1, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution pick(w1);
  std::vector<double> x(n);
  for (auto& v : x) v = (pick(rng) ? m1 : m0) + s * z(rng);
  return x;
}

// O(n^2) midranks, independent of the sorted implementation.
std::vector<double> naive_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, eq = 0;
    for (double v : x) {
      if (v < x[i]) less += 1;
      if (v == x[i]) eq += 1;
    }
    r[i] = less + (eq + 1.0) / 2.0;
  }
  return r;
}

double naive_h(const std::vector<std::vector<double>>& groups) {
  std::vector<double> all;
  for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
  const auto r = naive_ranks(all);
  const double n = static_cast<double>(all.size());
  double sum = 0.0;
  std::size_t pos = 0;
  for (const auto& g : groups) {
    double rs = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) rs += r[pos++];
    sum += rs * rs / static_cast<double>(g.size());
  }
  double h = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
  std::vector<double> s = all;
  std::sort(s.begin(), s.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double corr = 1.0 - ties / (n * n * n - n);
  return corr > 0 ? h / corr : 0.0;
}

}  // namespace

TEST(GaussianMixture, LoglikNeverDecreasesOnRandomInputs) {
  Rng rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = two_normals(50 + trial % 150, 0.0, 1.0 + 6.0 * u(rng), 0.3 + u(rng), 0.1 + 0.8 * u(rng), 100 + trial);
    GaussianInit init = default_gaussian_init(x, 0.2 + 2.0 * u(rng));
    init.tied_variance = trial % 2 == 0;
    const auto fit = fit_gaussian_mixture(x, init);
    for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t)
      ASSERT_GE(fit.loglik_trace[t], fit.loglik_trace[t - 1] - 1e-9) << "trial " << trial << " step " << t;
  }
}

TEST(GaussianMixture, RecoversWellSeparatedMeans) {
  const auto x = two_normals(1000, 0.0, 5.0, 1.0, 0.5, 3);
  const auto fit = fit_gaussian_mixture(x, default_gaussian_init(x, 1.0));
  EXPECT_NEAR(fit.mu0, 0.0, 0.2);
  EXPECT_NEAR(fit.mu1, 5.0, 0.2);
  EXPECT_NEAR(fit.lambda, 0.5, 0.05);
  EXPECT_TRUE(fit.converged);
  EXPECT_GE(fit.mu1, fit.mu0);
}

TEST(GaussianMixture, IdenticalStartingComponentsStayFlat) {
  const auto x = two_normals(300, 2.0, 2.0, 1.0, 0.5, 5);
  GaussianInit init;
  init.mu0 = init.mu1 = 2.0;
  init.sigma0 = init.sigma1 = 1.0;
  init.lambda = 0.3;
  const auto fit = fit_gaussian_mixture(x, init);
  EXPECT_NEAR(fit.lambda, 0.3, 1e-12);
  for (double v : {-1.0, 2.0, 6.0}) EXPECT_NEAR(mixture_posterior(fit, v), 0.7, 1e-9);
}

TEST(GaussianMixture, TiedVarianceSharesSigma) {
  const auto x = two_normals(500, 0.0, 3.0, 0.7, 0.3, 8);
  GaussianInit init = default_gaussian_init(x, 1.0);
  init.tied_variance = true;
  const auto fit = fit_gaussian_mixture(x, init);
  EXPECT_EQ(fit.sigma0, fit.sigma1);
  EXPECT_NEAR(fit.sigma0, 0.7, 0.1);
  double prev = 0.0;
  for (double v = -3.0; v <= 6.0; v += 0.25) {
    const double p = mixture_posterior(fit, v);
    EXPECT_GE(p, prev);
    prev = p;
  }
}

TEST(GaussianMixture, Errors) {
  std::vector<double> few(9, 1.0);
  few[0] = 2.0;
  EXPECT_THROW(fit_gaussian_mixture(few, GaussianInit{}), Error);
  try {
    fit_gaussian_mixture(few, GaussianInit{});
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
  }
  std::vector<double> flat(20, 3.0);
  try {
    fit_gaussian_mixture(flat, GaussianInit{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateInput);
  }
}

TEST(MixturePosterior, ClosedForm) {
  GaussianMixtureFit f;
  f.mu0 = 0;
  f.mu1 = 4;
  f.sigma0 = f.sigma1 = 1;
  f.lambda = 0.5;
  EXPECT_NEAR(mixture_posterior(f, 2.0), 0.5, 1e-12);
  // density ratio at 3: exp(-(1)/2) / exp(-(9)/2) = e^4
  EXPECT_NEAR(mixture_posterior(f, 3.0), 1.0 / (1.0 + std::exp(-4.0)), 1e-12);
  EXPECT_NEAR(mixture_posterior(f, 3.0), 0.98201379, 1e-8);
  f.mu1 = 0;
  EXPECT_NEAR(mixture_posterior(f, 17.0), 0.5, 1e-12);
  for (double v : {-1e6, -3.0, 0.0, 50.0, 1e6}) {
    const double p = mixture_posterior(f, v);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(PoissonMixture, RecoversRates) {
  Rng rng(21);
  std::poisson_distribution<int> lo(2.0), hi(8.0);
  std::vector<double> c;
  for (int i = 0; i < 2000; ++i) c.push_back(i % 2 ? hi(rng) : lo(rng));
  const auto fit = fit_poisson_mixture(c, 0.5);
  EXPECT_NEAR(fit.rate0, 2.0, 0.5);
  EXPECT_NEAR(fit.rate1, 8.0, 0.5);
  for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t) EXPECT_GE(fit.loglik_trace[t], fit.loglik_trace[t - 1] - 1e-9);
}

TEST(PoissonMixture, SmallCountsPosteriorMatchesDensityRatio) {
  const std::vector<double> c = {0, 0, 1, 9, 10, 11};
  const auto fit = fit_poisson_mixture(c, 0.5);
  for (double k : {9.0, 10.0, 11.0}) {
    const double l1 = fit.theta * std::pow(fit.rate1, k) * std::exp(-fit.rate1) / std::tgamma(k + 1);
    const double l0 = (1 - fit.theta) * std::pow(fit.rate0, k) * std::exp(-fit.rate0) / std::tgamma(k + 1);
    EXPECT_NEAR(mixture_posterior(fit, k), l1 / (l0 + l1), 1e-10);
    EXPECT_GT(mixture_posterior(fit, k), 0.95);
  }
}

TEST(PoissonMixture, AllZeroIsDegenerate) {
  std::vector<double> z(30, 0.0);
  try {
    fit_poisson_mixture(z, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateInput);
  }
}

TEST(LeastSquares, IdentityAndExactFit) {
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
  Eigen::VectorXd r(4);
  r << 1, -2, 3.5, 0;
  EXPECT_LT((least_squares(I, r).coefficients - r).norm(), 1e-12);

  Rng rng(4);
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(30, 3);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 3; ++j) X(i, j) = z(rng);
  Eigen::Vector3d b(0.5, -1.0, 2.0);
  const auto fit = least_squares(X, X * b);
  EXPECT_LT((X * fit.coefficients - X * b).norm(), 1e-10);
}

TEST(LeastSquares, MatchesNormalEquationsAndIsOptimal) {
  Rng rng(5);
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(50, 3);
  Eigen::VectorXd y(50);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = z(rng);
    y(i) = z(rng);
  }
  // Normal equations solved by Cramer's rule on the 3x3 system.
  const Eigen::Matrix3d A = X.transpose() * X;
  const Eigen::Vector3d c = X.transpose() * y;
  const double det = A.determinant();
  Eigen::Vector3d oracle;
  for (int k = 0; k < 3; ++k) {
    Eigen::Matrix3d Ak = A;
    Ak.col(k) = c;
    oracle(k) = Ak.determinant() / det;
  }
  const auto fit = least_squares(X, y);
  EXPECT_LT((fit.coefficients - oracle).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_FALSE(fit.rank_deficient);
  const double rss = (y - X * fit.coefficients).squaredNorm();
  for (int k = 0; k < 3; ++k)
    for (double d : {-1e-4, 1e-4}) {
      Eigen::VectorXd b = fit.coefficients;
      b(k) += d;
      EXPECT_GE((y - X * b).squaredNorm(), rss);
    }
}

TEST(LeastSquares, RankDeficientGivesMinimumNorm) {
  Eigen::MatrixXd X(4, 2);
  X << 1, 1, 2, 2, 3, 3, 4, 4;
  Eigen::VectorXd y(4);
  y << 2, 4, 6, 8;
  const auto fit = least_squares(X, y);
  EXPECT_TRUE(fit.rank_deficient);
  EXPECT_NEAR(fit.coefficients(0), 1.0, 1e-10);
  EXPECT_NEAR(fit.coefficients(1), 1.0, 1e-10);
}

TEST(KruskalWallis, HandComputed) {
  const auto r = kruskal_wallis({{1, 2, 3}, {4, 5, 6}});
  // rank sums 6 and 15: 12/42 * (36/3 + 225/3) - 21
  EXPECT_NEAR(r.statistic, 12.0 / 42.0 * (12.0 + 75.0) - 21.0, 1e-12);
  EXPECT_EQ(r.degrees_of_freedom, 1);
  EXPECT_NEAR(r.p_value, std::erfc(std::sqrt(r.statistic / 2.0)), 1e-10);
}

TEST(KruskalWallis, TiesMatchNaiveFormula) {
  const std::vector<std::vector<double>> g = {{1, 1, 2, 5}, {2, 2, 3}, {5, 5, 7, 1, 0}};
  EXPECT_NEAR(kruskal_wallis(g).statistic, naive_h(g), 1e-12);
}

TEST(KruskalWallis, ConstantGroupsAndErrors) {
  const auto r = kruskal_wallis({{3, 3}, {3, 3, 3}, {3}});
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.degrees_of_freedom, 2);
  try {
    kruskal_wallis({{1, 2}, {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidGrouping);
  }
  EXPECT_THROW(kruskal_wallis({{1, 2}}), Error);
}

TEST(KruskalWallis, ShiftedGroupsAreSignificant) {
  const auto a = two_normals(30, 0, 0, 1, 0, 1);
  const auto b = two_normals(30, 3, 3, 1, 0, 2);
  const auto c = two_normals(30, 6, 6, 1, 0, 3);
  EXPECT_LT(kruskal_wallis({a, b, c}).p_value, 0.05);
}

TEST(KruskalWallis, ChiSquareCloseToExactPermutation) {
  const std::vector<std::vector<std::vector<double>>> cases = {
      {{1.1, 2.3, 2.9}, {3.5, 4.2, 5.0}, {0.4, 6.1}},
      {{1, 2, 2}, {2, 3, 4}, {4, 5}},
      {{0.5, 1.5, 3.3, 4.1}, {2.0, 2.5, 6.0, 7.0}},
  };
  for (const auto& groups : cases) {
    std::vector<double> all;
    std::vector<int> label;
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (double v : groups[g]) {
        all.push_back(v);
        label.push_back(static_cast<int>(g));
      }
    const double h_obs = naive_h(groups);
    std::sort(label.begin(), label.end());
    int total = 0, extreme = 0;
    do {
      std::vector<std::vector<double>> perm(groups.size());
      for (std::size_t i = 0; i < all.size(); ++i) perm[label[i]].push_back(all[i]);
      ++total;
      if (naive_h(perm) >= h_obs - 1e-12) ++extreme;
    } while (std::next_permutation(label.begin(), label.end()));
    const double exact = static_cast<double>(extreme) / total;
    EXPECT_NEAR(kruskal_wallis(groups).p_value, exact, 0.1) << "exact " << exact;
  }
}

TEST(Ranks, Midranks) {
  const std::vector<double> x = {3, 1, 3, 2, 3};
  const auto r = midranks(x);
  EXPECT_EQ(r, naive_ranks(x));
  EXPECT_EQ(r[0], 4.0);
  EXPECT_EQ(r[1], 1.0);
}

TEST(Descriptive, QuantileAndSd) {
  const std::vector<double> x = {4, 1, 3, 2, 5};
  EXPECT_DOUBLE_EQ(quantile(x, 0.1), 1.4);
  EXPECT_DOUBLE_EQ(quantile(x, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile(x, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(mean(x), 3.0);
  EXPECT_DOUBLE_EQ(population_sd(x), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(sample_sd(x), std::sqrt(2.5));
}

TEST(Densities, Basics) {
  EXPECT_NEAR(normal_pdf(0.0), 1.0 / std::sqrt(2 * M_PI), 1e-15);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
  EXPECT_NEAR(std::exp(log_poisson_pmf(3, 2.0)), 8.0 * std::exp(-2.0) / 6.0, 1e-14);
  EXPECT_EQ(log_poisson_pmf(0, 0.0), 0.0);
  EXPECT_NEAR(logistic(logit(0.3)), 0.3, 1e-15);
  EXPECT_NEAR(log_add_exp(1000.0, 1000.0), 1000.0 + std::log(2.0), 1e-12);
}
