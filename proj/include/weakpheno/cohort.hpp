#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace weakpheno {

enum class Generator { Simplified, Lda, Complex };
enum class Prevalence { Rare, Common };
enum class Informativeness { Informative, NonInformative };

struct Scenario {
  Prevalence prevalence = Prevalence::Common;
  Informativeness informativeness = Informativeness::Informative;
  bool operator==(const Scenario&) const = default;
};

std::string to_string(Generator g);
std::string to_string(const Scenario& s);  // e.g. "rare_informative"
Generator parse_generator(std::string_view text);
Scenario parse_scenario(std::string_view text);

struct PatientRecord {
  std::int64_t id = 0;
  int y = 0;
  double true_probability = 0.0;  // NaN when undefined
  double s_icd = 0, s_nlp = 0, s_icdnlp = 0, note_count = 1, h = 1;
  std::vector<double> covariates;
  std::vector<double> aux_nlp;
};

/// Column-oriented patient table. Undefined true probabilities are NaN and
/// y is -1 when the outcome is unknown (cohorts read from real data).
struct Cohort {
  Generator generator = Generator::Simplified;
  Scenario scenario;
  std::uint64_t seed = 0;

  std::vector<std::int64_t> ids;
  std::vector<int> y;
  std::vector<double> true_prob;
  std::vector<double> s_icd, s_nlp, s_icdnlp, note_count, h;

  std::vector<std::string> covariate_names;
  Eigen::MatrixXd covariates;  // n x covariate_names.size()
  Eigen::MatrixXd aux_nlp;     // n x 150, or n x 0
  std::vector<int> selected_nlp;  // 0-based indices into aux_nlp

  std::size_t size() const { return ids.size(); }
  /// Mean of y; NaN for an empty cohort.
  double empirical_prevalence() const;
  double undefined_fraction() const;
  PatientRecord record(std::size_t i) const;
  /// Columns of `covariates` named selected_nlp_*.
  Eigen::MatrixXd selected_nlp_totals() const;
};

/// What a weakly supervised algorithm may see: no outcome, no true probability.
struct FeatureView {
  std::vector<double> s_icd, s_nlp, s_icdnlp, note_count;
  Eigen::MatrixXd denoise_covariates;  // X in the denoising regression
  Eigen::MatrixXd aux_nlp;

  std::size_t size() const { return s_icd.size(); }
};

struct Labels {
  std::vector<int> y;
  std::vector<double> true_prob;
};

FeatureView feature_view(const Cohort& cohort, std::span<const std::size_t> rows);
FeatureView feature_view(const Cohort& cohort);
Labels labels_of(const Cohort& cohort, std::span<const std::size_t> rows);

void write_cohort_csv(std::ostream& out, const Cohort& cohort);
Cohort read_cohort_csv(std::istream& in);

}  // namespace weakpheno
