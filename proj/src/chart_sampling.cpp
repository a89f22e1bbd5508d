#include "weakpheno/chart_sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "text_util.hpp"
#include "weakpheno/error.hpp"
#include "weakpheno/rng.hpp"

namespace weakpheno {

std::string to_string(Stratum s) {
  switch (s) {
    case Stratum::Top: return "top";
    case Stratum::Middle: return "middle";
    case Stratum::Bottom: return "bottom";
  }
  return "unknown";
}

StrataAssignment assign_strata(std::span<const double> probs, std::span<const std::int64_t> ids, const SamplingPlan& plan) {
  if (probs.size() != ids.size()) raise(ErrorKind::InvalidInput, "probabilities and ids differ in length");
  if (!(plan.bottom_quantile > 0.0 && plan.bottom_quantile < 1.0 && plan.top_quantile > 0.0 && plan.top_quantile < 1.0 &&
        plan.bottom_quantile <= plan.top_quantile))
    raise(ErrorKind::InvalidInput, "sampling quantiles must satisfy 0 < bottom <= top < 1");
  const std::size_t n = probs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (probs[a] != probs[b]) return probs[a] < probs[b];
    return ids[a] < ids[b];
  });
  const auto nb = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * plan.bottom_quantile - 1e-9));
  const auto nt = std::min(n - std::min(nb, n), static_cast<std::size_t>(std::ceil(static_cast<double>(n) * (1.0 - plan.top_quantile) - 1e-9)));
  StrataAssignment s;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = order[r];
    if (r < nb) {
      s.bottom.push_back(i);
    } else if (r >= n - nt) {
      s.top.push_back(i);
    } else if (plan.middle_mode == MiddleMode::Quantile || std::abs(probs[i] - 0.5) <= plan.middle_band_halfwidth) {
      s.middle.push_back(i);
    }
  }
  return s;
}

std::vector<SampledEncounter> probability_guided_sample(std::span<const double> probs, std::span<const std::int64_t> ids,
                                                        const SamplingPlan& plan, std::uint64_t seed) {
  if (plan.top_count < 0 || plan.bottom_count < 0 || plan.middle_count < 0)
    raise(ErrorKind::InvalidInput, "stratum counts must be nonnegative");
  const StrataAssignment strata = assign_strata(probs, ids, plan);
  Rng rng = make_rng(seed);
  std::vector<SampledEncounter> out;
  auto take = [&](std::vector<std::size_t> pool, int count, Stratum st) {
    if (static_cast<std::size_t>(count) > pool.size())
      raise(ErrorKind::StratumExhausted, to_string(st) + " stratum has " + std::to_string(pool.size()) +
                                             " encounters, " + std::to_string(count) + " requested");
    for (int k = 0; k < count; ++k) {
      const std::size_t j = static_cast<std::size_t>(k) + static_cast<std::size_t>(rng() % (pool.size() - static_cast<std::size_t>(k)));
      std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
      const std::size_t i = pool[static_cast<std::size_t>(k)];
      out.push_back({ids[i], probs[i], st});
    }
  };
  take(strata.top, plan.top_count, Stratum::Top);
  take(strata.bottom, plan.bottom_count, Stratum::Bottom);
  take(strata.middle, plan.middle_count, Stratum::Middle);
  return out;
}

std::vector<FeatureComparison> compare_samples(const std::vector<std::string>& feature_names,
                                               const std::vector<std::vector<double>>& rows,
                                               const std::vector<std::string>& group_labels) {
  if (rows.size() != group_labels.size()) raise(ErrorKind::InvalidInput, "one group label per row expected");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < group_labels.size(); ++i) groups[group_labels[i]].push_back(i);
  if (groups.size() < 2) raise(ErrorKind::InvalidGrouping, "comparison needs at least two groups");
  std::vector<FeatureComparison> out;
  for (std::size_t f = 0; f < feature_names.size(); ++f) {
    std::vector<std::vector<double>> g;
    for (const auto& [label, members] : groups) {
      std::vector<double> vals;
      for (std::size_t i : members) {
        if (rows[i].size() != feature_names.size()) raise(ErrorKind::InvalidInput, "row width differs from feature count");
        vals.push_back(rows[i][f]);
      }
      g.push_back(std::move(vals));
    }
    out.push_back({feature_names[f], kruskal_wallis(g)});
  }
  std::stable_sort(out.begin(), out.end(), [](const FeatureComparison& a, const FeatureComparison& b) {
    if (a.result.p_value != b.result.p_value) return a.result.p_value < b.result.p_value;
    return a.feature < b.feature;
  });
  return out;
}

void write_sample_csv(std::ostream& out, const std::vector<SampledEncounter>& sample) {
  out << "id,prob,stratum\n";
  for (const auto& s : sample) out << s.id << ',' << detail::fmt(s.prob) << ',' << to_string(s.stratum) << '\n';
}

void write_comparison_csv(std::ostream& out, const std::vector<FeatureComparison>& results) {
  out << "feature,H,df,p\n";
  for (const auto& r : results)
    out << r.feature << ',' << detail::fmt(r.result.statistic) << ',' << r.result.degrees_of_freedom << ','
        << detail::fmt(r.result.p_value) << '\n';
}

}  // namespace weakpheno
