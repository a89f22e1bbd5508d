#include "weakpheno/map_algorithm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "weakpheno/error.hpp"

namespace weakpheno {

namespace {

double gaussian_feature(double count, double note) { return std::log1p(count) - std::log1p(note); }

double mean_shifted(std::span<const double> lp, double c) {
  double s = 0.0;
  for (double v : lp) s += logistic(v - c);
  return s / static_cast<double>(lp.size());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

FilterRule MapConfig::effective_filter() const {
  if (filter_rule) return *filter_rule;
  return variant == Variant::V1 ? FilterRule::IcdPositive : FilterRule::IcdOrNlpPositive;
}

RescaleResult prevalence_rescale(std::span<const double> probs, double target_theta) {
  if (!(target_theta > 0.0 && target_theta < 1.0)) raise(ErrorKind::InvalidInput, "target prevalence must lie in (0,1)");
  if (probs.empty()) raise(ErrorKind::InsufficientData, "no probabilities to rescale");
  std::vector<double> lp(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) lp[i] = logit(probs[i]);

  auto f = [&](double c) { return mean_shifted(lp, c) - target_theta; };
  double lo = -1.0, hi = 1.0;
  while (f(lo) < 0.0) {
    lo *= 2.0;
    if (lo < -1e4) raise(ErrorKind::CalibrationFailure, "cannot raise mean probability to the target");
  }
  while (f(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e4) raise(ErrorKind::CalibrationFailure, "cannot lower mean probability to the target");
  }
  double c = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    c = 0.5 * (lo + hi);
    const double v = f(c);
    if (v == 0.0) break;
    if (v > 0.0) lo = c; else hi = c;
    if (hi - lo < 1e-13) break;
  }
  if (std::abs(f(c)) > 1e-9) raise(ErrorKind::CalibrationFailure, "bisection did not reach the target prevalence");
  RescaleResult out;
  out.c = c;
  out.calibrated.resize(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) out.calibrated[i] = logistic(lp[i] - c);
  return out;
}

std::vector<bool> map_filter(const FeatureView& view, FilterRule rule) {
  std::vector<bool> keep(view.size());
  for (std::size_t i = 0; i < view.size(); ++i)
    keep[i] = view.s_icd[i] > 0.0 || (rule == FilterRule::IcdOrNlpPositive && view.s_nlp[i] > 0.0);
  return keep;
}

MapModel map_fit(const FeatureView& train, const MapConfig& config) {
  MapModel m;
  m.config = config;
  const auto keep = map_filter(train, config.effective_filter());
  const auto counts = silver_counts(train);
  std::array<std::vector<double>, 3> pc, gc;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!keep[i]) continue;
    for (int j = 0; j < 3; ++j) {
      pc[j].push_back(std::floor(counts[j][i]));
      gc[j].push_back(gaussian_feature(counts[j][i], train.note_count[i]));
    }
  }
  m.n_fit = pc[0].size();
  if (m.n_fit == 0) raise(ErrorKind::EmptyFilterSet, "no patient passes the MAP filter");

  for (int j = 0; j < 3; ++j) {
    try {
      m.poisson[j] = fit_poisson_mixture(pc[j], 0.5, config.em);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateInput && e.kind() != ErrorKind::InsufficientData) throw;
      m.poisson_flat[j] = true;
      m.metadata.warnings.push_back(std::string("flat poisson posterior for ") + kSilverLabels[j] + ": " + e.what());
    }
    try {
      const double sd = population_sd(gc[j]);
      GaussianInit init = default_gaussian_init(gc[j], sd > 0.0 ? sd : 1.0);
      init.tied_variance = config.tied_variance;
      m.gaussian[j] = fit_gaussian_mixture(gc[j], init, config.em);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateInput && e.kind() != ErrorKind::InsufficientData) throw;
      m.gaussian_flat[j] = true;
      m.metadata.warnings.push_back(std::string("flat gaussian posterior for ") + kSilverLabels[j] + ": " + e.what());
    }
  }

  MapModel probe = m;
  probe.c = 0.0;
  const MapScores raw = map_predict(probe, train);
  const double frac = static_cast<double>(m.n_fit) / static_cast<double>(train.size());
  if (config.target_theta) {
    m.target_theta = *config.target_theta;
  } else if (!m.poisson_flat[2]) {
    m.target_theta = m.poisson[2].theta * frac;
  } else {
    m.target_theta = mean(raw.ensemble);
    m.metadata.warnings.push_back("target prevalence taken from the ensemble mean");
  }
  m.target_theta = std::clamp(m.target_theta, config.epsilon, 1.0 - config.epsilon);
  std::vector<double> clamped(raw.ensemble);
  for (double& v : clamped) v = std::clamp(v, config.epsilon, 1.0 - config.epsilon);
  m.c = prevalence_rescale(clamped, m.target_theta).c;

  m.metadata.info.emplace_back("filter", config.effective_filter() == FilterRule::IcdPositive ? "s_icd>0" : "s_icd>0|s_nlp>0");
  m.metadata.info.emplace_back("n_fit", std::to_string(m.n_fit));
  m.metadata.info.emplace_back("target_theta", fmt(m.target_theta));
  m.metadata.info.emplace_back("target_theta_source", config.target_theta ? "override" : "poisson_icdnlp_theta");
  m.metadata.info.emplace_back("note_adjustment", "a=1");
  m.metadata.info.emplace_back("c", fmt(m.c));
  return m;
}

MapScores map_predict(const MapModel& model, const FeatureView& view) {
  const std::size_t n = view.size();
  const auto keep = map_filter(view, model.config.effective_filter());
  const auto counts = silver_counts(view);
  MapScores out;
  for (int j = 0; j < 3; ++j) {
    std::vector<double> pp(n, 0.0), gp(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[i]) continue;
      pp[i] = model.poisson_flat[j] ? 0.5 : mixture_posterior(model.poisson[j], std::floor(counts[j][i]));
      gp[i] = model.gaussian_flat[j] ? 0.5
                                     : mixture_posterior(model.gaussian[j], gaussian_feature(counts[j][i], view.note_count[i]));
    }
    out.per_model.emplace_back(std::string(kSilverLabels[j]) + "_poisson", std::move(pp));
    out.per_model.emplace_back(std::string(kSilverLabels[j]) + "_gaussian", std::move(gp));
  }
  const double eps = model.config.epsilon;
  out.ensemble.assign(n, 0.0);
  out.calibrated.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const auto& pm : out.per_model) s += pm.second[i];
    out.ensemble[i] = s / 6.0;
    out.calibrated[i] = logistic(logit(std::clamp(out.ensemble[i], eps, 1.0 - eps)) - model.c);
  }
  out.calibration_constant_c = model.c;
  out.metadata = model.metadata;
  out.metadata.info.emplace_back("variant", model.config.variant == Variant::V1 ? "v1" : "v2");
  return out;
}

MapScores map_fit_predict(const FeatureView& cohort, const MapConfig& config) {
  return map_predict(map_fit(cohort, config), cohort);
}

}  // namespace weakpheno
