#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "weakpheno/cohort.hpp"
#include "weakpheno/core_stats.hpp"
#include "weakpheno/map_algorithm.hpp"
#include "weakpheno/normalization.hpp"
#include "weakpheno/phenorm.hpp"
#include "weakpheno/rng.hpp"

namespace weakpheno {

enum class PriorSource { PhenormV1, MapV1, PhenormV2, MapV2 };

struct SureLdaConfig {
  PriorSource prior_source = PriorSource::PhenormV1;
  int null_topics_K0 = 2;
  double dirichlet_beta = 1.0;
  int gibbs_burn_in = 50;
  int gibbs_samples = 50;
  std::uint64_t seed = 0;
  DropoutConfig dropout;
  std::vector<double> a_grid = default_a_grid();
  EmSettings em;
  bool tied_variance = true;
};

struct PriorVector {
  std::vector<double> alpha;
};

struct FeatureWeights {
  std::vector<double> weights;
  int dropped_negative_count = 0;
  bool degenerate = false;
};

/// Zeroes upstream probabilities where S_ICD = 0 and clamps to [0,1].
PriorVector compute_priors(const FeatureView& view, std::span<const double> upstream);

/// Candidate features for topic modelling: s_icd, s_nlp, s_icdnlp, then the auxiliary NLP columns.
Eigen::MatrixXd surelda_features(const FeatureView& view);

/// max(b, 0) from the dropout regression of `target` on log(1 + features), all columns corrupted.
FeatureWeights feature_weights(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, const DropoutConfig& dropout);

/// Weights are held as integers in units of 2^-20 so that incremental and
/// recomputed counts agree bit for bit.
inline constexpr double kWeightUnit = 0x1.0p-20;
std::int64_t quantize_weight(double w);

/// Token list in patient-major order.
struct TokenCorpus {
  std::vector<std::size_t> patient_offsets;  // size n+1
  std::vector<int> feature;                  // per token
  int num_features = 0;

  std::size_t num_patients() const { return patient_offsets.empty() ? 0 : patient_offsets.size() - 1; }
  std::size_t num_tokens() const { return feature.size(); }
};

/// floor(count) tokens for every feature with positive weight.
TokenCorpus build_corpus(const Eigen::MatrixXd& features, std::span<const double> weights);

/// Collapsed Gibbs sampler over topic 0 (phenotype) and null topics 1..K0.
class WeightedGibbsSampler {
 public:
  WeightedGibbsSampler(TokenCorpus corpus, std::vector<std::int64_t> feature_weight_units,
                       Eigen::MatrixXd alpha, double beta, std::uint64_t seed);

  /// Draws initial assignments with probability proportional to each patient's alpha row.
  void initialize();
  void sweep();

  /// Removes token t from the counts; add_token puts it back with topic k.
  void remove_token(std::size_t t);
  void add_token(std::size_t t, int k);

  /// Full conditional of token t given all other assignments; token t must be removed.
  std::vector<double> conditional(std::size_t t) const;

  int topics() const { return static_cast<int>(alpha_.cols()); }
  const std::vector<int>& assignments() const { return z_; }
  void set_assignments(const std::vector<int>& z);

  /// Counts in weight units.
  const std::vector<std::int64_t>& N() const { return n_; }
  const std::vector<std::int64_t>& M() const { return m_; }
  const std::vector<std::int64_t>& Msum() const { return msum_; }
  std::int64_t N(std::size_t i, int k) const { return n_[i * topics() + k]; }
  std::int64_t M(int j, int k) const { return m_[static_cast<std::size_t>(j) * topics() + k]; }

  struct Counts {
    std::vector<std::int64_t> N, M, Msum;
  };
  Counts recompute() const;

  const TokenCorpus& corpus() const { return corpus_; }

 private:
  TokenCorpus corpus_;
  std::vector<std::int64_t> w_;
  Eigen::MatrixXd alpha_;
  double beta_;
  Rng rng_;
  std::vector<int> z_;
  std::vector<std::int64_t> n_, m_, msum_;
  std::vector<double> prob_;
};

struct GibbsResult {
  Eigen::MatrixXd n_mean;  // n x topics, averaged over sample sweeps, natural units
  Eigen::MatrixXd m_mean;  // J x topics
};

GibbsResult weighted_gibbs(const TokenCorpus& corpus, const FeatureWeights& weights, const Eigen::MatrixXd& alpha,
                           const SureLdaConfig& config);

/// Samples topic assignments for new patients with the feature-topic
/// distribution held fixed at the training estimate; returns averaged N.
Eigen::MatrixXd fold_in(const TokenCorpus& corpus, const std::vector<std::int64_t>& weight_units,
                        const Eigen::MatrixXd& phi, const Eigen::MatrixXd& alpha, int burn_in, int samples,
                        std::uint64_t seed);

/// Alpha matrix (prior, 1, ..., 1) with K0 null columns.
Eigen::MatrixXd alpha_matrix(const PriorVector& priors, int null_topics);

/// Upstream-independent part of sureLDA: features, weights, corpus.
struct SureLdaShared {
  FeatureWeights weights;
  TokenCorpus corpus;
  std::vector<std::int64_t> weight_units;
  std::array<GaussianMixtureFit, 3> surrogate_fits;
  std::array<bool, 3> surrogate_flat{};
  RunMetadata metadata;
};

/// `normalized_target` is the normalized S_ICDNLP on the training rows; when
/// empty it is computed with config.a_grid.
SureLdaShared surelda_prepare(const FeatureView& train, const SureLdaConfig& config,
                              std::span<const double> normalized_target = {});

struct SureLdaModel {
  SureLdaConfig config;
  FeatureWeights weights;
  std::vector<std::int64_t> weight_units;
  std::array<GaussianMixtureFit, 3> surrogate_fits;
  std::array<bool, 3> surrogate_flat{};
  Eigen::MatrixXd phi;  // J x topics
  GaussianMixtureFit lda_fit;
  bool lda_flat = false;
  PhenotypeScores train_scores;
};

/// Fits on training rows given upstream train probabilities (before filtering).
SureLdaModel surelda_fit(const FeatureView& train, const SureLdaShared& shared, std::span<const double> upstream_train,
                         const SureLdaConfig& config);
PhenotypeScores surelda_predict(const SureLdaModel& model, const FeatureView& view, std::span<const double> upstream);

/// Runs the upstream algorithm named by config.prior_source, then sureLDA, on one cohort.
PhenotypeScores surelda_fit_predict(const FeatureView& cohort, const SureLdaConfig& config,
                                    const PhenormConfig& phenorm = {}, const MapConfig& map = {});

}  // namespace weakpheno
