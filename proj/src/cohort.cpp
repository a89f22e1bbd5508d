#include "weakpheno/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_map>

#include "text_util.hpp"
#include "weakpheno/error.hpp"

namespace weakpheno {

using detail::fmt;

std::string to_string(Generator g) {
  switch (g) {
    case Generator::Simplified: return "simplified";
    case Generator::Lda: return "lda";
    case Generator::Complex: return "complex";
  }
  return "unknown";
}

std::string to_string(const Scenario& s) {
  return std::string(s.prevalence == Prevalence::Rare ? "rare" : "common") + "_" +
         (s.informativeness == Informativeness::Informative ? "informative" : "noninformative");
}

Generator parse_generator(std::string_view text) {
  if (text == "simplified") return Generator::Simplified;
  if (text == "lda") return Generator::Lda;
  if (text == "complex") return Generator::Complex;
  raise(ErrorKind::InvalidConfig, "unknown generator '" + std::string(text) + "'");
}

Scenario parse_scenario(std::string_view text) {
  for (auto p : {Prevalence::Rare, Prevalence::Common})
    for (auto i : {Informativeness::Informative, Informativeness::NonInformative}) {
      Scenario s{p, i};
      if (to_string(s) == text) return s;
    }
  raise(ErrorKind::InvalidConfig, "unknown scenario '" + std::string(text) + "'");
}

double Cohort::empirical_prevalence() const {
  if (y.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (int v : y) s += v;
  return s / static_cast<double>(y.size());
}

double Cohort::undefined_fraction() const {
  if (true_prob.empty()) return 0.0;
  std::size_t k = 0;
  for (double p : true_prob) k += std::isnan(p) ? 1 : 0;
  return static_cast<double>(k) / static_cast<double>(true_prob.size());
}

PatientRecord Cohort::record(std::size_t i) const {
  PatientRecord r;
  r.id = ids.at(i);
  r.y = y[i];
  r.true_probability = true_prob[i];
  r.s_icd = s_icd[i];
  r.s_nlp = s_nlp[i];
  r.s_icdnlp = s_icdnlp[i];
  r.note_count = note_count[i];
  r.h = h[i];
  for (Eigen::Index j = 0; j < covariates.cols(); ++j) r.covariates.push_back(covariates(i, j));
  for (Eigen::Index j = 0; j < aux_nlp.cols(); ++j) r.aux_nlp.push_back(aux_nlp(i, j));
  return r;
}

Eigen::MatrixXd Cohort::selected_nlp_totals() const {
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < covariate_names.size(); ++j)
    if (covariate_names[j].rfind("selected_nlp_", 0) == 0) cols.push_back(static_cast<Eigen::Index>(j));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = covariates.col(cols[c]);
  return out;
}

FeatureView feature_view(const Cohort& cohort, std::span<const std::size_t> rows) {
  FeatureView v;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const Eigen::MatrixXd sel = cohort.selected_nlp_totals();
  v.denoise_covariates.resize(n, sel.cols());
  v.aux_nlp.resize(n, cohort.aux_nlp.cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::size_t i = rows[static_cast<std::size_t>(k)];
    if (i >= cohort.size()) raise(ErrorKind::InvalidInput, "row index out of range");
    v.s_icd.push_back(cohort.s_icd[i]);
    v.s_nlp.push_back(cohort.s_nlp[i]);
    v.s_icdnlp.push_back(cohort.s_icdnlp[i]);
    v.note_count.push_back(cohort.note_count[i]);
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < sel.cols(); ++j) v.denoise_covariates(k, j) = std::log1p(sel(ii, j));
    if (cohort.aux_nlp.cols() > 0) v.aux_nlp.row(k) = cohort.aux_nlp.row(ii);
  }
  return v;
}

FeatureView feature_view(const Cohort& cohort) {
  std::vector<std::size_t> rows(cohort.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return feature_view(cohort, rows);
}

Labels labels_of(const Cohort& cohort, std::span<const std::size_t> rows) {
  Labels l;
  for (std::size_t i : rows) {
    l.y.push_back(cohort.y.at(i));
    l.true_prob.push_back(cohort.true_prob.at(i));
  }
  return l;
}

void write_cohort_csv(std::ostream& out, const Cohort& c) {
  out << "id,y,true_prob,s_icd,s_nlp,s_icdnlp,note_count,h";
  for (const auto& name : c.covariate_names) out << ',' << name;
  for (Eigen::Index j = 0; j < c.aux_nlp.cols(); ++j) out << ",aux_nlp_" << (j + 1);
  out << '\n';
  for (std::size_t i = 0; i < c.size(); ++i) {
    out << c.ids[i] << ',';
    if (c.y[i] >= 0) out << c.y[i];
    out << ',' << fmt(c.true_prob[i]) << ',' << fmt(c.s_icd[i]) << ',' << fmt(c.s_nlp[i]) << ','
        << fmt(c.s_icdnlp[i]) << ',' << fmt(c.note_count[i]) << ',' << fmt(c.h[i]);
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < c.covariates.cols(); ++j) out << ',' << fmt(c.covariates(ii, j));
    for (Eigen::Index j = 0; j < c.aux_nlp.cols(); ++j) out << ',' << fmt(c.aux_nlp(ii, j));
    out << '\n';
  }
}

namespace {

double parse_number(const std::string& field, std::size_t line, const std::string& column) {
  if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    raise(ErrorKind::Io, "line " + std::to_string(line) + ", column " + column + ": not a number '" + field + "'");
  }
}

}  // namespace

Cohort read_cohort_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    header = detail::split(line);
    break;
  }
  if (header.empty()) raise(ErrorKind::Io, "cohort file has no header");
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t j = 0; j < header.size(); ++j) pos[detail::trim(header[j])] = j;
  for (const char* req : {"id", "s_icd", "s_nlp", "note_count"})
    if (!pos.count(req)) raise(ErrorKind::Io, std::string("cohort file lacks column '") + req + "'");

  static const std::vector<std::string> core = {"id", "y", "true_prob", "s_icd", "s_nlp", "s_icdnlp", "note_count", "h"};
  std::vector<std::size_t> cov_cols, aux_cols;
  Cohort c;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name = detail::trim(header[j]);
    if (std::find(core.begin(), core.end(), name) != core.end()) continue;
    if (name.rfind("aux_nlp_", 0) == 0) {
      aux_cols.push_back(j);
    } else {
      cov_cols.push_back(j);
      c.covariate_names.push_back(name);
    }
  }

  std::vector<std::vector<double>> cov_rows, aux_rows;
  auto get = [&](const std::vector<std::string>& f, const char* name, double fallback) {
    auto it = pos.find(name);
    if (it == pos.end()) return fallback;
    return parse_number(f.at(it->second), lineno, name);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto f = detail::split(line);
    if (f.size() != header.size())
      raise(ErrorKind::Io, "line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " fields");
    c.ids.push_back(static_cast<std::int64_t>(get(f, "id", 0.0)));
    const double yv = get(f, "y", std::numeric_limits<double>::quiet_NaN());
    c.y.push_back(std::isnan(yv) ? -1 : static_cast<int>(yv));
    c.true_prob.push_back(get(f, "true_prob", std::numeric_limits<double>::quiet_NaN()));
    c.s_icd.push_back(get(f, "s_icd", 0.0));
    c.s_nlp.push_back(get(f, "s_nlp", 0.0));
    const double sum = get(f, "s_icdnlp", std::numeric_limits<double>::quiet_NaN());
    c.s_icdnlp.push_back(std::isnan(sum) ? c.s_icd.back() + c.s_nlp.back() : sum);
    c.note_count.push_back(get(f, "note_count", 1.0));
    c.h.push_back(get(f, "h", 1.0));
    if (std::isnan(c.s_icd.back()) || std::isnan(c.s_nlp.back()) || std::isnan(c.note_count.back()))
      raise(ErrorKind::Io, "line " + std::to_string(lineno) + ": missing silver label or note count");
    std::vector<double> cr, ar;
    for (std::size_t j : cov_cols) cr.push_back(parse_number(f[j], lineno, header[j]));
    for (std::size_t j : aux_cols) ar.push_back(parse_number(f[j], lineno, header[j]));
    cov_rows.push_back(std::move(cr));
    aux_rows.push_back(std::move(ar));
  }
  const auto n = static_cast<Eigen::Index>(c.ids.size());
  c.covariates.resize(n, static_cast<Eigen::Index>(cov_cols.size()));
  c.aux_nlp.resize(n, static_cast<Eigen::Index>(aux_cols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < cov_cols.size(); ++j) c.covariates(i, static_cast<Eigen::Index>(j)) = cov_rows[i][j];
    for (std::size_t j = 0; j < aux_cols.size(); ++j) c.aux_nlp(i, static_cast<Eigen::Index>(j)) = aux_rows[i][j];
  }
  return c;
}

}  // namespace weakpheno
