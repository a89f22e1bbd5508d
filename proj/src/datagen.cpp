#include "weakpheno/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "weakpheno/core_stats.hpp"
#include "weakpheno/error.hpp"
#include "weakpheno/rng.hpp"

namespace weakpheno {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kAuxFeatures = 150;

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

double poisson(Rng& rng, double rate) {
  if (rate <= 0.0) return 0.0;
  return static_cast<double>(std::poisson_distribution<long long>(rate)(rng));
}

double gamma(Rng& rng, double shape) { return std::gamma_distribution<double>(shape, 1.0)(rng); }

double normal(Rng& rng, double mu, double sigma) { return std::normal_distribution<double>(mu, sigma)(rng); }

double note_variable(Rng& rng) { return 1.0 + std::abs(normal(rng, 0.0, 0.001)); }

double log_gamma_pdf(double x, double shape) {
  if (x < 0.0) return -kInf;
  if (x == 0.0) {
    if (shape < 1.0) return kInf;
    if (shape == 1.0) return 0.0;
    return -kInf;
  }
  return (shape - 1.0) * std::log(x) - x - std::lgamma(shape);
}

void init_columns(Cohort& c, std::size_t n) {
  c.ids.resize(n);
  std::iota(c.ids.begin(), c.ids.end(), std::int64_t{1});
  c.y.assign(n, 0);
  c.true_prob.assign(n, kNaN);
  c.s_icd.assign(n, 0.0);
  c.s_nlp.assign(n, 0.0);
  c.s_icdnlp.assign(n, 0.0);
  c.note_count.assign(n, 1.0);
  c.h.assign(n, 1.0);
}

bool informative(const Scenario& s) { return s.informativeness == Informativeness::Informative; }
bool rare(const Scenario& s) { return s.prevalence == Prevalence::Rare; }

}  // namespace

std::optional<double> bayes_true_probability(double prior, double case_likelihood, double control_likelihood) {
  const double num = prior * case_likelihood;
  const double den = num + (1.0 - prior) * control_likelihood;
  if (num < 1e-300 && den < 1e-300) return std::nullopt;
  return std::clamp(num / den, 0.0, 1.0);
}

double lda_target_prevalence(Prevalence prevalence) {
  const double mu = prevalence == Prevalence::Rare ? -0.83 : -0.095;
  return 1.0 - normal_cdf(0.0, mu, 0.5);
}

Cohort generate_simplified(std::size_t n, const Scenario& scenario, std::uint64_t seed) {
  Cohort c;
  c.generator = Generator::Simplified;
  c.scenario = scenario;
  c.seed = seed;
  init_columns(c, n);
  c.covariates.resize(static_cast<Eigen::Index>(n), 0);
  c.aux_nlp.resize(static_cast<Eigen::Index>(n), 0);

  const double mu = rare(scenario) ? 0.05 : 0.4;
  const double icd1 = informative(scenario) ? 8.0 : 5.0;
  const double icd0 = informative(scenario) ? 2.0 : 5.0;
  const double nlp1 = 1.5 * icd1, nlp0 = 1.5 * icd0;

  Rng rng = make_rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::clamp(normal(rng, mu, 0.1), 0.0, 1.0);
    const int y = bernoulli(rng, q) ? 1 : 0;
    const double note = note_variable(rng);
    const double icd = poisson(rng, y ? icd1 : icd0);
    const double nlp = poisson(rng, y ? nlp1 : nlp0);
    const double l1 = std::exp(log_poisson_pmf(icd, icd1) + log_poisson_pmf(nlp, nlp1));
    const double l0 = std::exp(log_poisson_pmf(icd, icd0) + log_poisson_pmf(nlp, nlp0));
    c.y[i] = y;
    c.note_count[i] = note;
    c.s_icd[i] = icd;
    c.s_nlp[i] = nlp;
    c.s_icdnlp[i] = icd + nlp;
    c.true_prob[i] = bayes_true_probability(q, l1, l0).value_or(q);
  }
  return c;
}

Cohort generate_lda(std::size_t n, const Scenario& scenario, std::uint64_t seed) {
  Cohort c;
  c.generator = Generator::Lda;
  c.scenario = scenario;
  c.seed = seed;
  init_columns(c, n);
  c.covariates.resize(static_cast<Eigen::Index>(n), 0);
  c.aux_nlp.resize(static_cast<Eigen::Index>(n), kAuxFeatures);

  const double mu = rare(scenario) ? -0.83 : -0.095;
  const bool info = informative(scenario);
  const double icd_case = info ? 5.5 : 3.0, icd_ctrl = info ? 0.71 : 3.0;
  const double nlp_case = info ? 2.1 : 1.0, nlp_ctrl = info ? 0.81 : 1.0;
  const double floor_case = 1.0;
  const double floor_ctrl = info ? 0.0 : 1.0;

  Rng rng = make_rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double ycont = normal(rng, mu, 0.5);
    const int y = ycont > 0.0 ? 1 : 0;
    const double h = std::max(poisson(rng, 2.0), 1.0);
    const double note = note_variable(rng);
    const double fl = y ? floor_case : floor_ctrl;
    const double icd = std::max(gamma(rng, y ? icd_case : icd_ctrl) * std::pow(h, 0.3) - 1.0, fl);
    const double nlp = std::max(gamma(rng, y ? nlp_case : nlp_ctrl) * std::pow(h, 0.25) - 1.0, fl);
    const double b = y ? 1.25 : 0.9;
    const auto ii = static_cast<Eigen::Index>(i);
    for (int k = 0; k < kAuxFeatures; ++k) c.aux_nlp(ii, k) = std::max(gamma(rng, b) * std::pow(h, 0.2) - 1.0, 0.0);

    const double q = logistic(ycont);
    const double lc = log_gamma_pdf(icd, icd_case) + log_gamma_pdf(nlp, nlp_case);
    const double l0 = log_gamma_pdf(icd, icd_ctrl) + log_gamma_pdf(nlp, nlp_ctrl);
    double p = kNaN;
    if (std::isnan(lc) || std::isnan(l0) || (std::isinf(lc) && std::isinf(l0) && (lc > 0) == (l0 > 0))) {
      p = kNaN;
    } else if (lc == kInf || l0 == -kInf) {
      p = 1.0;
    } else if (lc == -kInf || l0 == kInf) {
      p = 0.0;
    } else {
      const double lnum = std::log(q) + lc;
      const double lden = log_add_exp(lnum, std::log1p(-q) + l0);
      p = std::clamp(std::exp(lnum - lden), 0.0, 1.0);
    }

    c.y[i] = y;
    c.h[i] = h;
    c.note_count[i] = note;
    c.s_icd[i] = icd;
    c.s_nlp[i] = nlp;
    c.s_icdnlp[i] = icd + nlp;
    c.true_prob[i] = p;
  }
  return c;
}

Cohort generate_complex(std::size_t n, const Scenario& scenario, std::uint64_t seed) {
  static const std::array<double, 7> kRaceProb = [] {
    std::array<double, 7> p = {0.61, 0.073, 0.13, 0.017, 0.015, 0.034, 0.12};
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= s;
    return p;
  }();
  static const std::array<const char*, 6> kRaceNames = {"race_black", "race_asian", "race_native_american",
                                                         "race_pacific_islander", "race_other", "race_unknown"};
  // Coefficients on [1, age, sex, race, exposure_1..7].
  static const std::array<double, 11> kBetaT = {-2, 0.03, -0.2, 0.1, 0.5, -0.5, 0.8, -0.5, 0.0, 0.2, 0.5};
  static const std::array<double, 11> kBetaS = {-2.5, 0.02, -0.1, 0.5, -0.02, 0.0, -0.3, 0.03, 0.0, 0.7, -0.3};
  constexpr int kSelected = 10;

  const bool info = informative(scenario);
  std::array<double, 11> beta_y = {rare(scenario) ? -5.7 : -2.8, 0.05, 0.03, 0.1, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2};
  std::array<double, 11> beta_t{}, beta_s{};
  if (info) {
    beta_t = kBetaT;
    beta_s = kBetaS;
  }
  const double text_off[2] = {0.1, info ? 0.4 : 0.1};
  const double nlp_off[2] = {0.1, info ? 0.3 : 0.1};
  const double icd_off[2] = {0.1, info ? 0.3 : 0.1};

  Cohort c;
  c.generator = Generator::Complex;
  c.scenario = scenario;
  c.seed = seed;
  init_columns(c, n);

  c.covariate_names = {"age", "sex"};
  for (const char* r : kRaceNames) c.covariate_names.emplace_back(r);
  for (int k = 1; k <= 7; ++k) c.covariate_names.push_back("exposure_" + std::to_string(k));
  c.covariate_names.insert(c.covariate_names.end(), {"text_t", "text_s", "nlp_silver_notes"});
  const std::size_t sel_offset = c.covariate_names.size();
  for (int k = 1; k <= kSelected; ++k) c.covariate_names.push_back("selected_nlp_" + std::to_string(k));
  const auto N = static_cast<Eigen::Index>(n);
  c.covariates = Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(c.covariate_names.size()));
  c.aux_nlp = Eigen::MatrixXd::Zero(N, kAuxFeatures);

  Rng rng = make_rng(seed);
  {
    std::vector<int> idx(kAuxFeatures);
    std::iota(idx.begin(), idx.end(), 0);
    for (int k = 0; k < kSelected; ++k) {
      const auto j = k + static_cast<int>(rng() % static_cast<std::uint64_t>(kAuxFeatures - k));
      std::swap(idx[k], idx[j]);
    }
    c.selected_nlp.assign(idx.begin(), idx.begin() + kSelected);
  }
  std::array<double, kSelected> beta_k{};
  for (double& b : beta_k) b = -0.2 + 0.4 * uniform01(rng);
  std::vector<bool> is_selected(kAuxFeatures, false);
  for (int j : c.selected_nlp) is_selected[j] = true;

  std::vector<double> p_initial(n), l_case(n), l_ctrl(n), p_x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    double age;
    do age = normal(rng, 40.7, 22.6); while (age < 0.0 || age > 120.0);
    const double sex = bernoulli(rng, 0.51) ? 1.0 : 0.0;
    int race = 0;
    {
      const double u = uniform01(rng);
      double acc = 0.0;
      race = 6;
      for (int r = 0; r < 7; ++r) {
        acc += kRaceProb[r];
        if (u < acc) { race = r; break; }
      }
    }
    std::array<double, 7> expo{};
    for (double& e : expo) e = bernoulli(rng, 0.3) ? 1.0 : 0.0;

    // Non-White categories share the single race coefficient.
    const double nonwhite = race == 0 ? 0.0 : 1.0;
    auto linear = [&](const std::array<double, 11>& b) {
      double v = b[0] + b[1] * age + b[2] * sex + b[3] * nonwhite;
      for (int k = 0; k < 7; ++k) v += b[4 + k] * expo[k];
      return v;
    };
    const double p0 = logistic(linear(beta_y));
    const int y = bernoulli(rng, p0) ? 1 : 0;
    const double h = std::max(poisson(rng, 5.0), 1.0);
    const double note = note_variable(rng);
    const double ri = normal(rng, 0.0, 0.5);

    const double pt[2] = {logistic(linear(beta_t) + text_off[0]), logistic(linear(beta_t) + text_off[1])};
    const double ps[2] = {logistic(linear(beta_s) + text_off[0]), logistic(linear(beta_s) + text_off[1])};
    const double pn[2] = {logistic(ri + 1.5 + nlp_off[0]), logistic(ri + 1.5 + nlp_off[1])};

    double t_sum = 0, s_sum = 0, c1_sum = 0, nlp_sum = 0, icd_sum = 0;
    double picd_mean[2] = {0.0, 0.0};
    std::array<double, kSelected> sel_sum{};
    const auto notes = static_cast<int>(h);
    for (int note_i = 0; note_i < notes; ++note_i) {
      const bool t = bernoulli(rng, pt[y]);
      const bool s = bernoulli(rng, ps[y]);
      const bool c1 = t || s;
      const double nlp1 = c1 ? poisson(rng, pn[y]) : 0.0;
      double lin = -0.5 + 0.3 * nlp1;
      for (int k = 0; k < kSelected; ++k) {
        const double cnt = poisson(rng, pn[y]);
        sel_sum[k] += cnt;
        lin += beta_k[k] * cnt;
      }
      const bool d = bernoulli(rng, logistic(lin + icd_off[y]));
      t_sum += t;
      s_sum += s;
      c1_sum += c1;
      nlp_sum += nlp1;
      icd_sum += d;
      picd_mean[0] += logistic(lin + icd_off[0]) / notes;
      picd_mean[1] += logistic(lin + icd_off[1]) / notes;
    }
    // Remaining features share the per-note law; their note totals are drawn directly.
    int sel_k = 0;
    for (int j = 0; j < kAuxFeatures; ++j) {
      if (is_selected[j]) continue;
      c.aux_nlp(ii, j) = poisson(rng, h * pn[y]);
    }
    for (int j : c.selected_nlp) c.aux_nlp(ii, j) = sel_sum[sel_k++];

    c.y[i] = y;
    c.h[i] = h;
    c.note_count[i] = note;
    c.s_icd[i] = icd_sum;
    c.s_nlp[i] = nlp_sum;
    c.s_icdnlp[i] = icd_sum + nlp_sum;
    c.covariates(ii, 0) = age;
    c.covariates(ii, 1) = sex;
    if (race > 0) c.covariates(ii, 1 + race) = 1.0;
    for (int k = 0; k < 7; ++k) c.covariates(ii, 8 + k) = expo[k];
    c.covariates(ii, 15) = t_sum;
    c.covariates(ii, 16) = s_sum;
    c.covariates(ii, 17) = c1_sum;
    for (int k = 0; k < kSelected; ++k) c.covariates(ii, static_cast<Eigen::Index>(sel_offset) + k) = sel_sum[k];

    p_initial[i] = p0;
    l_case[i] = pt[1] * ps[1] * pn[1] * picd_mean[1] + 0.001;
    l_ctrl[i] = pt[0] * ps[0] * pn[0] * picd_mean[0] + 0.001;
    p_x[i] = normal_pdf(age, 40.7, 22.6) * (sex == 1.0 ? 0.51 : 0.49) * kRaceProb[race] * 0.3 + 0.001;
  }

  if (n == 0) return c;
  const double theta = c.empirical_prevalence();
  std::vector<double> p_real(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double num = l_case[i] * p_initial[i] * p_x[i];
    const double den = l_ctrl[i] * (1.0 - theta) * p_x[i] + l_case[i] * theta * p_x[i];
    p_real[i] = num / den;
  }
  const auto [mn, mx] = std::minmax_element(p_real.begin(), p_real.end());
  const double lo = *mn, span = *mx - *mn;
  for (std::size_t i = 0; i < n; ++i) c.true_prob[i] = span > 0.0 ? (p_real[i] - lo) / span : p_real[i];
  return c;
}

Cohort generate_cohort(Generator generator, std::size_t n, const Scenario& scenario, std::uint64_t seed) {
  switch (generator) {
    case Generator::Simplified: return generate_simplified(n, scenario, seed);
    case Generator::Lda: return generate_lda(n, scenario, seed);
    case Generator::Complex: return generate_complex(n, scenario, seed);
  }
  raise(ErrorKind::InvalidConfig, "unknown generator");
}

}  // namespace weakpheno
