#include "weakpheno/surelda.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "weakpheno/error.hpp"

namespace weakpheno {

namespace {

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int draw(Rng& rng, const std::vector<double>& w) {
  double total = 0.0;
  for (double v : w) total += v;
  double u = uniform01(rng) * total;
  for (std::size_t k = 0; k + 1 < w.size(); ++k) {
    if (u < w[k]) return static_cast<int>(k);
    u -= w[k];
  }
  return static_cast<int>(w.size()) - 1;
}

std::vector<double> utilization_adjusted(std::span<const double> counts, std::span<const double> notes) {
  return log_normalize(counts, notes, 1.0);
}

struct MixtureOrFlat {
  GaussianMixtureFit fit;
  bool flat = false;
};

MixtureOrFlat fit_or_flat(const std::vector<double>& x, const SureLdaConfig& config, const std::string& name,
                          RunMetadata& meta) {
  MixtureOrFlat out;
  try {
    const double sd = population_sd(x);
    GaussianInit init = default_gaussian_init(x, sd > 0.0 ? sd : 1.0);
    init.tied_variance = config.tied_variance;
    out.fit = fit_gaussian_mixture(x, init, config.em);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateInput && e.kind() != ErrorKind::InsufficientData) throw;
    out.flat = true;
    meta.warnings.push_back("flat posterior for " + name + ": " + e.what());
  }
  return out;
}

std::vector<double> posteriors(const MixtureOrFlat& m, const std::vector<double>& x) {
  std::vector<double> p(x.size(), 0.5);
  if (!m.flat)
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = mixture_posterior(m.fit, x[i]);
  return p;
}

std::vector<double> lda_feature(const Eigen::MatrixXd& n_mean, std::span<const double> notes) {
  std::vector<double> n0(static_cast<std::size_t>(n_mean.rows()));
  for (Eigen::Index i = 0; i < n_mean.rows(); ++i) n0[static_cast<std::size_t>(i)] = n_mean(i, 0);
  return utilization_adjusted(n0, notes);
}

}  // namespace

PriorVector compute_priors(const FeatureView& view, std::span<const double> upstream) {
  if (upstream.size() != view.size()) raise(ErrorKind::InvalidInput, "upstream probabilities do not match the cohort");
  PriorVector p;
  p.alpha.resize(view.size());
  for (std::size_t i = 0; i < view.size(); ++i) {
    const double u = std::isfinite(upstream[i]) ? std::clamp(upstream[i], 0.0, 1.0) : 0.0;
    p.alpha[i] = view.s_icd[i] > 0.0 ? u : 0.0;
  }
  return p;
}

Eigen::MatrixXd surelda_features(const FeatureView& view) {
  const auto n = static_cast<Eigen::Index>(view.size());
  Eigen::MatrixXd f(n, 3 + view.aux_nlp.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    f(i, 0) = view.s_icd[static_cast<std::size_t>(i)];
    f(i, 1) = view.s_nlp[static_cast<std::size_t>(i)];
    f(i, 2) = view.s_icdnlp[static_cast<std::size_t>(i)];
  }
  if (view.aux_nlp.cols() > 0) f.rightCols(view.aux_nlp.cols()) = view.aux_nlp;
  return f;
}

FeatureWeights feature_weights(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, const DropoutConfig& dropout) {
  const Eigen::MatrixXd xlog = features.unaryExpr([](double v) { return std::log1p(std::max(v, 0.0)); });
  const auto reg = dropout_regression(target, xlog, std::vector<bool>(static_cast<std::size_t>(xlog.cols()), true), dropout);
  FeatureWeights w;
  w.degenerate = reg.degenerate;
  w.weights.resize(static_cast<std::size_t>(xlog.cols()));
  for (Eigen::Index j = 0; j < xlog.cols(); ++j) {
    const double b = reg.coefficients(j);
    w.weights[static_cast<std::size_t>(j)] = b > 0.0 ? b : 0.0;
    if (b < 0.0) ++w.dropped_negative_count;
  }
  return w;
}

std::int64_t quantize_weight(double w) {
  if (!(w > 0.0)) return 0;
  return static_cast<std::int64_t>(std::llround(w / kWeightUnit));
}

TokenCorpus build_corpus(const Eigen::MatrixXd& features, std::span<const double> weights) {
  if (static_cast<Eigen::Index>(weights.size()) != features.cols())
    raise(ErrorKind::InvalidInput, "one weight per feature expected");
  TokenCorpus c;
  c.num_features = static_cast<int>(features.cols());
  c.patient_offsets.push_back(0);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      if (quantize_weight(weights[static_cast<std::size_t>(j)]) <= 0) continue;
      const double v = features(i, j);
      const auto k = v > 0.0 ? static_cast<std::size_t>(std::floor(v)) : 0;
      c.feature.insert(c.feature.end(), k, static_cast<int>(j));
    }
    c.patient_offsets.push_back(c.feature.size());
  }
  return c;
}

WeightedGibbsSampler::WeightedGibbsSampler(TokenCorpus corpus, std::vector<std::int64_t> feature_weight_units,
                                           Eigen::MatrixXd alpha, double beta, std::uint64_t seed)
    : corpus_(std::move(corpus)),
      w_(std::move(feature_weight_units)),
      alpha_(std::move(alpha)),
      beta_(beta),
      rng_(make_rng(seed)) {
  if (!(beta_ > 0.0)) raise(ErrorKind::InvalidInput, "dirichlet beta must be positive");
  if (static_cast<std::size_t>(alpha_.rows()) != corpus_.num_patients())
    raise(ErrorKind::InvalidInput, "alpha rows do not match patients");
  if (static_cast<int>(w_.size()) != corpus_.num_features) raise(ErrorKind::InvalidInput, "weight count mismatch");
  const std::size_t K = static_cast<std::size_t>(alpha_.cols());
  z_.assign(corpus_.num_tokens(), 0);
  n_.assign(corpus_.num_patients() * K, 0);
  m_.assign(static_cast<std::size_t>(corpus_.num_features) * K, 0);
  msum_.assign(K, 0);
  prob_.resize(K);
}

void WeightedGibbsSampler::initialize() {
  const int K = topics();
  std::fill(n_.begin(), n_.end(), 0);
  std::fill(m_.begin(), m_.end(), 0);
  std::fill(msum_.begin(), msum_.end(), 0);
  for (std::size_t i = 0; i < corpus_.num_patients(); ++i) {
    for (int k = 0; k < K; ++k) prob_[k] = alpha_(static_cast<Eigen::Index>(i), k);
    for (std::size_t t = corpus_.patient_offsets[i]; t < corpus_.patient_offsets[i + 1]; ++t) add_token(t, draw(rng_, prob_));
  }
}

void WeightedGibbsSampler::set_assignments(const std::vector<int>& z) {
  if (z.size() != z_.size()) raise(ErrorKind::InvalidInput, "assignment vector has the wrong length");
  std::fill(n_.begin(), n_.end(), 0);
  std::fill(m_.begin(), m_.end(), 0);
  std::fill(msum_.begin(), msum_.end(), 0);
  for (std::size_t t = 0; t < z.size(); ++t) add_token(t, z[t]);
}

void WeightedGibbsSampler::remove_token(std::size_t t) {
  const int K = topics();
  const int k = z_[t];
  const int j = corpus_.feature[t];
  const auto i = static_cast<std::size_t>(
      std::upper_bound(corpus_.patient_offsets.begin(), corpus_.patient_offsets.end(), t) - corpus_.patient_offsets.begin() - 1);
  const std::int64_t w = w_[static_cast<std::size_t>(j)];
  n_[i * K + k] -= w;
  m_[static_cast<std::size_t>(j) * K + k] -= w;
  msum_[k] -= w;
  z_[t] = -1;
}

void WeightedGibbsSampler::add_token(std::size_t t, int k) {
  const int K = topics();
  const int j = corpus_.feature[t];
  const auto i = static_cast<std::size_t>(
      std::upper_bound(corpus_.patient_offsets.begin(), corpus_.patient_offsets.end(), t) - corpus_.patient_offsets.begin() - 1);
  const std::int64_t w = w_[static_cast<std::size_t>(j)];
  n_[i * K + k] += w;
  m_[static_cast<std::size_t>(j) * K + k] += w;
  msum_[k] += w;
  z_[t] = k;
}

std::vector<double> WeightedGibbsSampler::conditional(std::size_t t) const {
  const int K = topics();
  const int j = corpus_.feature[t];
  const auto i = static_cast<std::size_t>(
      std::upper_bound(corpus_.patient_offsets.begin(), corpus_.patient_offsets.end(), t) - corpus_.patient_offsets.begin() - 1);
  const double jb = corpus_.num_features * beta_;
  std::vector<double> p(K);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    p[k] = (static_cast<double>(n_[i * K + k]) * kWeightUnit + alpha_(static_cast<Eigen::Index>(i), k)) *
           (static_cast<double>(m_[static_cast<std::size_t>(j) * K + k]) * kWeightUnit + beta_) /
           (static_cast<double>(msum_[k]) * kWeightUnit + jb);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return p;
}

void WeightedGibbsSampler::sweep() {
  const int K = topics();
  const double jb = corpus_.num_features * beta_;
  std::vector<double> inv(K), a(K);
  for (int c = 0; c < K; ++c) inv[c] = 1.0 / (static_cast<double>(msum_[c]) * kWeightUnit + jb);
  for (std::size_t i = 0; i < corpus_.num_patients(); ++i) {
    std::int64_t* ni = &n_[i * K];
    for (int c = 0; c < K; ++c) a[c] = alpha_(static_cast<Eigen::Index>(i), c);
    for (std::size_t t = corpus_.patient_offsets[i]; t < corpus_.patient_offsets[i + 1]; ++t) {
      const int j = corpus_.feature[t];
      const std::int64_t w = w_[static_cast<std::size_t>(j)];
      std::int64_t* mj = &m_[static_cast<std::size_t>(j) * K];
      const int old = z_[t];
      ni[old] -= w;
      mj[old] -= w;
      msum_[old] -= w;
      inv[old] = 1.0 / (static_cast<double>(msum_[old]) * kWeightUnit + jb);
      double total = 0.0;
      for (int c = 0; c < K; ++c) {
        prob_[c] = (static_cast<double>(ni[c]) * kWeightUnit + a[c]) * (static_cast<double>(mj[c]) * kWeightUnit + beta_) * inv[c];
        total += prob_[c];
      }
      double u = uniform01(rng_) * total;
      int k = K - 1;
      for (int c = 0; c + 1 < K; ++c) {
        if (u < prob_[c]) {
          k = c;
          break;
        }
        u -= prob_[c];
      }
      ni[k] += w;
      mj[k] += w;
      msum_[k] += w;
      inv[k] = 1.0 / (static_cast<double>(msum_[k]) * kWeightUnit + jb);
      z_[t] = k;
    }
  }
}

WeightedGibbsSampler::Counts WeightedGibbsSampler::recompute() const {
  const int K = topics();
  Counts c;
  c.N.assign(n_.size(), 0);
  c.M.assign(m_.size(), 0);
  c.Msum.assign(msum_.size(), 0);
  for (std::size_t i = 0; i < corpus_.num_patients(); ++i)
    for (std::size_t t = corpus_.patient_offsets[i]; t < corpus_.patient_offsets[i + 1]; ++t) {
      const int j = corpus_.feature[t];
      const int k = z_[t];
      const std::int64_t w = w_[static_cast<std::size_t>(j)];
      c.N[i * K + k] += w;
      c.M[static_cast<std::size_t>(j) * K + k] += w;
      c.Msum[k] += w;
    }
  return c;
}

Eigen::MatrixXd alpha_matrix(const PriorVector& priors, int null_topics) {
  if (null_topics < 1) raise(ErrorKind::InvalidInput, "at least one null topic is required");
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(priors.alpha.size()), 1 + null_topics);
  for (std::size_t i = 0; i < priors.alpha.size(); ++i) a(static_cast<Eigen::Index>(i), 0) = priors.alpha[i];
  return a;
}

GibbsResult weighted_gibbs(const TokenCorpus& corpus, const FeatureWeights& weights, const Eigen::MatrixXd& alpha,
                           const SureLdaConfig& config) {
  if (config.gibbs_samples < 1) raise(ErrorKind::InvalidInput, "gibbs_samples must be at least 1");
  if (config.gibbs_burn_in < 0) raise(ErrorKind::InvalidInput, "gibbs_burn_in must be nonnegative");
  std::vector<std::int64_t> units(weights.weights.size());
  for (std::size_t j = 0; j < units.size(); ++j) units[j] = quantize_weight(weights.weights[j]);
  WeightedGibbsSampler s(corpus, units, alpha, config.dirichlet_beta, config.seed);
  s.initialize();
  for (int it = 0; it < config.gibbs_burn_in; ++it) s.sweep();
  const int K = s.topics();
  const auto n = static_cast<Eigen::Index>(corpus.num_patients());
  const auto J = static_cast<Eigen::Index>(corpus.num_features);
  GibbsResult r;
  r.n_mean = Eigen::MatrixXd::Zero(n, K);
  r.m_mean = Eigen::MatrixXd::Zero(J, K);
  for (int it = 0; it < config.gibbs_samples; ++it) {
    s.sweep();
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k < K; ++k) r.n_mean(i, k) += static_cast<double>(s.N(static_cast<std::size_t>(i), k));
    for (Eigen::Index j = 0; j < J; ++j)
      for (int k = 0; k < K; ++k) r.m_mean(j, k) += static_cast<double>(s.M(static_cast<int>(j), k));
  }
  const double scale = kWeightUnit / config.gibbs_samples;
  r.n_mean *= scale;
  r.m_mean *= scale;
  return r;
}

Eigen::MatrixXd fold_in(const TokenCorpus& corpus, const std::vector<std::int64_t>& weight_units, const Eigen::MatrixXd& phi,
                        const Eigen::MatrixXd& alpha, int burn_in, int samples, std::uint64_t seed) {
  const int K = static_cast<int>(alpha.cols());
  const auto n = static_cast<Eigen::Index>(corpus.num_patients());
  if (phi.cols() != K || phi.rows() != corpus.num_features) raise(ErrorKind::InvalidInput, "phi has the wrong shape");
  Rng rng = make_rng(seed);
  std::vector<int> z(corpus.num_tokens());
  std::vector<double> prob(K);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, K);
  std::vector<std::int64_t> ni(K);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t b = corpus.patient_offsets[static_cast<std::size_t>(i)];
    const std::size_t e = corpus.patient_offsets[static_cast<std::size_t>(i) + 1];
    std::fill(ni.begin(), ni.end(), 0);
    for (int k = 0; k < K; ++k) prob[k] = alpha(i, k);
    for (std::size_t t = b; t < e; ++t) {
      z[t] = draw(rng, prob);
      ni[z[t]] += weight_units[static_cast<std::size_t>(corpus.feature[t])];
    }
    for (int it = 0; it < burn_in + samples; ++it) {
      for (std::size_t t = b; t < e; ++t) {
        const int j = corpus.feature[t];
        const std::int64_t w = weight_units[static_cast<std::size_t>(j)];
        ni[z[t]] -= w;
        for (int k = 0; k < K; ++k) prob[k] = (static_cast<double>(ni[k]) * kWeightUnit + alpha(i, k)) * phi(j, k);
        z[t] = draw(rng, prob);
        ni[z[t]] += w;
      }
      if (it >= burn_in)
        for (int k = 0; k < K; ++k) out(i, k) += static_cast<double>(ni[k]);
    }
  }
  if (samples > 0) out *= kWeightUnit / samples;
  return out;
}

SureLdaShared surelda_prepare(const FeatureView& train, const SureLdaConfig& config, std::span<const double> normalized_target) {
  SureLdaShared sh;
  std::vector<double> target(normalized_target.begin(), normalized_target.end());
  if (target.empty()) target = normalize_silver(train.s_icdnlp, train.note_count, config.a_grid).values;
  if (target.size() != train.size()) raise(ErrorKind::InvalidInput, "normalized target length mismatch");
  const Eigen::MatrixXd features = surelda_features(train);
  sh.weights = feature_weights(features, Eigen::Map<const Eigen::VectorXd>(target.data(), static_cast<Eigen::Index>(target.size())),
                               config.dropout);
  if (sh.weights.degenerate) sh.metadata.warnings.push_back("constant target score; all feature weights are zero");
  sh.corpus = build_corpus(features, sh.weights.weights);
  sh.weight_units.resize(sh.weights.weights.size());
  for (std::size_t j = 0; j < sh.weight_units.size(); ++j) sh.weight_units[j] = quantize_weight(sh.weights.weights[j]);

  const auto counts = silver_counts(train);
  for (int m = 0; m < 3; ++m) {
    const auto fit = fit_or_flat(utilization_adjusted(counts[m], train.note_count), config, kSilverLabels[m], sh.metadata);
    sh.surrogate_fits[m] = fit.fit;
    sh.surrogate_flat[m] = fit.flat;
  }
  sh.metadata.info.emplace_back("dropped_negative_weights", std::to_string(sh.weights.dropped_negative_count));
  sh.metadata.info.emplace_back("tokens", std::to_string(sh.corpus.num_tokens()));
  return sh;
}

namespace {

PhenotypeScores assemble(const std::vector<double>& lda_x, const MixtureOrFlat& lda, const FeatureView& view,
                         const std::array<GaussianMixtureFit, 3>& fits, const std::array<bool, 3>& flat, RunMetadata meta) {
  PhenotypeScores out;
  out.per_label.emplace_back("lda", posteriors(lda, lda_x));
  const auto counts = silver_counts(view);
  for (int m = 0; m < 3; ++m) {
    MixtureOrFlat s{fits[m], flat[m]};
    out.per_label.emplace_back(kSilverLabels[m], posteriors(s, utilization_adjusted(counts[m], view.note_count)));
  }
  out.aggregate.assign(view.size(), 0.0);
  for (std::size_t i = 0; i < view.size(); ++i) {
    double s = 0.0;
    for (const auto& pl : out.per_label) s += pl.second[i];
    out.aggregate[i] = s / 4.0;
  }
  out.metadata = std::move(meta);
  return out;
}

const char* source_name(PriorSource s) {
  switch (s) {
    case PriorSource::PhenormV1: return "phenorm_v1";
    case PriorSource::MapV1: return "map_v1";
    case PriorSource::PhenormV2: return "phenorm_v2";
    case PriorSource::MapV2: return "map_v2";
  }
  return "unknown";
}

}  // namespace

SureLdaModel surelda_fit(const FeatureView& train, const SureLdaShared& shared, std::span<const double> upstream_train,
                         const SureLdaConfig& config) {
  SureLdaModel model;
  model.config = config;
  model.weights = shared.weights;
  model.weight_units = shared.weight_units;
  model.surrogate_fits = shared.surrogate_fits;
  model.surrogate_flat = shared.surrogate_flat;
  RunMetadata meta = shared.metadata;

  const Eigen::MatrixXd alpha = alpha_matrix(compute_priors(train, upstream_train), config.null_topics_K0);
  const GibbsResult g = weighted_gibbs(shared.corpus, shared.weights, alpha, config);
  const int K = static_cast<int>(alpha.cols());
  const double J = shared.corpus.num_features;
  model.phi.resize(g.m_mean.rows(), K);
  for (int k = 0; k < K; ++k) {
    const double denom = g.m_mean.col(k).sum() + J * config.dirichlet_beta;
    model.phi.col(k) = (g.m_mean.col(k).array() + config.dirichlet_beta) / denom;
  }
  const auto x = lda_feature(g.n_mean, train.note_count);
  const auto lda = fit_or_flat(x, config, "lda", meta);
  model.lda_fit = lda.fit;
  model.lda_flat = lda.flat;
  meta.info.emplace_back("prior_source", source_name(config.prior_source));
  meta.info.emplace_back("gibbs_burn_in", std::to_string(config.gibbs_burn_in));
  meta.info.emplace_back("gibbs_samples", std::to_string(config.gibbs_samples));
  meta.info.emplace_back("null_topics", std::to_string(config.null_topics_K0));
  model.train_scores = assemble(x, lda, train, model.surrogate_fits, model.surrogate_flat, meta);
  return model;
}

PhenotypeScores surelda_predict(const SureLdaModel& model, const FeatureView& view, std::span<const double> upstream) {
  const Eigen::MatrixXd alpha = alpha_matrix(compute_priors(view, upstream), model.config.null_topics_K0);
  const TokenCorpus corpus = build_corpus(surelda_features(view), model.weights.weights);
  const Eigen::MatrixXd n_mean = fold_in(corpus, model.weight_units, model.phi, alpha, model.config.gibbs_burn_in,
                                         model.config.gibbs_samples, derive_seed(model.config.seed, "fold_in"));
  const auto x = lda_feature(n_mean, view.note_count);
  return assemble(x, MixtureOrFlat{model.lda_fit, model.lda_flat}, view, model.surrogate_fits, model.surrogate_flat,
                  model.train_scores.metadata);
}

PhenotypeScores surelda_fit_predict(const FeatureView& cohort, const SureLdaConfig& config, const PhenormConfig& phenorm,
                                    const MapConfig& map) {
  std::vector<double> upstream;
  switch (config.prior_source) {
    case PriorSource::PhenormV1:
    case PriorSource::PhenormV2: {
      PhenormConfig pc = phenorm;
      pc.variant = config.prior_source == PriorSource::PhenormV1 ? Variant::V1 : Variant::V2;
      upstream = phenorm_fit_predict(cohort, pc).aggregate;
      break;
    }
    case PriorSource::MapV1:
    case PriorSource::MapV2: {
      MapConfig mc = map;
      mc.variant = config.prior_source == PriorSource::MapV1 ? Variant::V1 : Variant::V2;
      upstream = map_fit_predict(cohort, mc).calibrated;
      break;
    }
  }
  const auto shared = surelda_prepare(cohort, config);
  return surelda_fit(cohort, shared, upstream, config).train_scores;
}

}  // namespace weakpheno
