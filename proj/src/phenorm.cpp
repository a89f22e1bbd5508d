#include "weakpheno/phenorm.hpp"

#include <cmath>
#include <cstdio>

#include "weakpheno/error.hpp"
#include "weakpheno/rng.hpp"

namespace weakpheno {

namespace {

Eigen::MatrixXd normalized_matrix(const FeatureView& view, const std::array<double, 3>& a) {
  const auto counts = silver_counts(view);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(view.size()), 3);
  for (int j = 0; j < 3; ++j) {
    const auto v = log_normalize(counts[j], view.note_count, a[j]);
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), j) = v[i];
  }
  return m;
}

std::string fmt_a(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", a);
  return buf;
}

}  // namespace

std::array<std::vector<double>, 3> silver_counts(const FeatureView& view) {
  return {view.s_icd, view.s_nlp, view.s_icdnlp};
}

PhenormScoreStage phenorm_score_stage(const FeatureView& train, const PhenormConfig& config) {
  PhenormScoreStage st;
  const auto counts = silver_counts(train);
  for (int j = 0; j < 3; ++j) {
    const auto ns = normalize_silver(counts[j], train.note_count, config.a_grid);
    st.exponent_a[j] = ns.exponent_a;
    st.metadata.info.emplace_back(std::string("a_") + kSilverLabels[j], fmt_a(ns.exponent_a));
  }
  const Eigen::MatrixXd labels = normalized_matrix(train, st.exponent_a);
  for (int j = 0; j < 3; ++j) {
    DropoutConfig dc = config.dropout;
    dc.seed = derive_seed(config.dropout.seed, kSilverLabels[j]);
    auto d = denoise_score(j, labels, train.denoise_covariates, dc);
    st.denoise[j] = d.model;
    st.z[j] = std::move(d.scores);
    st.degenerate[j] = d.model.regression.degenerate;
    if (st.degenerate[j]) st.metadata.warnings.push_back(std::string("constant silver label: ") + kSilverLabels[j]);
  }
  st.metadata.info.emplace_back("dropout_r", fmt_a(config.dropout.rate_r));
  st.metadata.info.emplace_back("dropout_repetitions", std::to_string(config.dropout.repetitions));
  st.metadata.info.emplace_back("covariates_in_mixture", "no");
  st.metadata.info.emplace_back("mixture_variance", "tied");
  return st;
}

PhenormModel phenorm_fit(const PhenormScoreStage& stage, Variant variant, const EmSettings& em) {
  PhenormModel m;
  m.variant = variant;
  m.stage = stage;
  for (int j = 0; j < 3; ++j) {
    if (stage.degenerate[j]) {
      m.flat[j] = true;
      continue;
    }
    const auto& z = stage.z[j];
    try {
      const double sigma = variant == Variant::V1 ? 1.0 : std::sqrt(population_sd(z) / 2.0);
      GaussianInit init = default_gaussian_init(z, sigma > 0.0 ? sigma : 1.0);
      init.tied_variance = true;
      m.fits[j] = fit_gaussian_mixture(z, init, em);
      if (!m.fits[j].converged)
        m.stage.metadata.warnings.push_back(std::string("mixture did not converge: ") + kSilverLabels[j]);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateInput && e.kind() != ErrorKind::InsufficientData) throw;
      m.flat[j] = true;
      m.stage.metadata.warnings.push_back(std::string("flat posterior for ") + kSilverLabels[j] + ": " + e.what());
    }
  }
  return m;
}

namespace {

PhenotypeScores score_from_z(const PhenormModel& model, const std::array<std::vector<double>, 3>& z, std::size_t n) {
  PhenotypeScores out;
  out.aggregate.assign(n, 0.0);
  for (int j = 0; j < 3; ++j) {
    std::vector<double> post(n, 0.5);
    if (!model.flat[j])
      for (std::size_t i = 0; i < n; ++i) post[i] = mixture_posterior(model.fits[j], z[j][i]);
    out.per_label.emplace_back(kSilverLabels[j], std::move(post));
  }
  for (std::size_t i = 0; i < n; ++i)
    out.aggregate[i] = (out.per_label[0].second[i] + out.per_label[1].second[i] + out.per_label[2].second[i]) / 3.0;
  out.metadata = model.stage.metadata;
  out.metadata.info.emplace_back("variant", model.variant == Variant::V1 ? "v1" : "v2");
  return out;
}

}  // namespace

PhenotypeScores phenorm_train_scores(const PhenormModel& model) {
  return score_from_z(model, model.stage.z, model.stage.z[0].size());
}

PhenotypeScores phenorm_predict(const PhenormModel& model, const FeatureView& view) {
  const Eigen::MatrixXd labels = normalized_matrix(view, model.stage.exponent_a);
  std::array<std::vector<double>, 3> z;
  for (int j = 0; j < 3; ++j) z[j] = apply_denoise(model.stage.denoise[j], labels, view.denoise_covariates);
  return score_from_z(model, z, view.size());
}

PhenotypeScores phenorm_fit_predict(const FeatureView& cohort, const PhenormConfig& config) {
  const auto stage = phenorm_score_stage(cohort, config);
  return phenorm_train_scores(phenorm_fit(stage, config.variant, config.em));
}

}  // namespace weakpheno
