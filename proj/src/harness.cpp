#include "weakpheno/harness.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "weakpheno/core_stats.hpp"
#include "weakpheno/datagen.hpp"
#include "weakpheno/error.hpp"
#include "weakpheno/rng.hpp"

namespace weakpheno {

using detail::fmt;

const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> all = {Algorithm::IcdLogit,  Algorithm::PhenormV1, Algorithm::PhenormV2,
                                             Algorithm::MapV1,     Algorithm::MapV2,     Algorithm::SureldaV1,
                                             Algorithm::SureldaV2, Algorithm::SureldaV3, Algorithm::SureldaV4};
  return all;
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::IcdLogit: return "icd_logit";
    case Algorithm::PhenormV1: return "phenorm_v1";
    case Algorithm::PhenormV2: return "phenorm_v2";
    case Algorithm::MapV1: return "map_v1";
    case Algorithm::MapV2: return "map_v2";
    case Algorithm::SureldaV1: return "surelda_v1";
    case Algorithm::SureldaV2: return "surelda_v2";
    case Algorithm::SureldaV3: return "surelda_v3";
    case Algorithm::SureldaV4: return "surelda_v4";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view text) {
  for (Algorithm a : all_algorithms())
    if (to_string(a) == text) return a;
  raise(ErrorKind::InvalidConfig, "unknown algorithm '" + std::string(text) + "'");
}

std::string to_string(SplitKind s) { return s == SplitKind::Train ? "train" : "test"; }

std::array<double, 8> metric_values(const MetricSet& m) {
  return {m.auc, m.f1, m.precision, m.recall, m.accuracy, m.prob_mse, m.prob_mae, static_cast<double>(m.n_undefined_handled)};
}

std::uint64_t replicate_seed(std::uint64_t base, int replicate) {
  return derive_seed(base, static_cast<std::uint64_t>(replicate));
}

namespace {

bool wants(const std::vector<Algorithm>& algs, std::initializer_list<Algorithm> any) {
  for (Algorithm a : algs)
    for (Algorithm b : any)
      if (a == b) return true;
  return false;
}

PriorSource prior_of(Algorithm a) {
  switch (a) {
    case Algorithm::SureldaV1: return PriorSource::PhenormV1;
    case Algorithm::SureldaV2: return PriorSource::MapV1;
    case Algorithm::SureldaV3: return PriorSource::PhenormV2;
    default: return PriorSource::MapV2;
  }
}

struct Upstream {
  std::vector<double> train, test;
  std::optional<std::string> error;
};

}  // namespace

std::vector<AlgorithmOutput> run_algorithms(const CohortSplit& split, const std::vector<Algorithm>& algorithms,
                                            const AlgorithmSettings& settings, std::uint64_t seed) {
  const auto& train = split.train;
  const auto& test = split.test;
  const bool any_lda = wants(algorithms, {Algorithm::SureldaV1, Algorithm::SureldaV2, Algorithm::SureldaV3, Algorithm::SureldaV4});

  PhenormConfig pc;
  pc.dropout.rate_r = settings.dropout_r;
  pc.dropout.repetitions = settings.dropout_repetitions;
  pc.dropout.seed = derive_seed(seed, "phenorm_dropout");
  pc.a_grid = default_a_grid(settings.a_grid_points);

  std::optional<PhenormScoreStage> stage;
  std::optional<std::string> stage_error;
  if (any_lda || wants(algorithms, {Algorithm::PhenormV1, Algorithm::PhenormV2})) {
    try {
      stage = phenorm_score_stage(train, pc);
    } catch (const std::exception& e) {
      stage_error = e.what();
    }
  }

  std::array<Upstream, 2> phen, map;  // index 0 = v1, 1 = v2
  std::array<bool, 2> phen_done{}, map_done{};
  std::array<RunMetadata, 2> phen_meta, map_meta;

  auto need_phen = [&](int v) -> Upstream& {
    if (!phen_done[v]) {
      phen_done[v] = true;
      if (!stage) {
        phen[v].error = stage_error.value_or("phenorm score stage unavailable");
      } else {
        try {
          const auto model = phenorm_fit(*stage, v == 0 ? Variant::V1 : Variant::V2);
          auto tr = phenorm_train_scores(model);
          phen[v].train = std::move(tr.aggregate);
          phen[v].test = phenorm_predict(model, test).aggregate;
          phen_meta[v] = std::move(tr.metadata);
        } catch (const std::exception& e) {
          phen[v].error = e.what();
        }
      }
    }
    return phen[v];
  };
  auto need_map = [&](int v) -> Upstream& {
    if (!map_done[v]) {
      map_done[v] = true;
      try {
        MapConfig mc;
        mc.variant = v == 0 ? Variant::V1 : Variant::V2;
        const auto model = map_fit(train, mc);
        auto tr = map_predict(model, train);
        map[v].train = std::move(tr.calibrated);
        map[v].test = map_predict(model, test).calibrated;
        map_meta[v] = std::move(tr.metadata);
      } catch (const std::exception& e) {
        map[v].error = e.what();
      }
    }
    return map[v];
  };

  SureLdaConfig sc;
  sc.null_topics_K0 = settings.null_topics;
  sc.dirichlet_beta = settings.dirichlet_beta;
  sc.gibbs_burn_in = settings.gibbs_burn_in;
  sc.gibbs_samples = settings.gibbs_samples;
  sc.dropout.rate_r = settings.dropout_r;
  sc.dropout.repetitions = settings.dropout_repetitions;
  sc.dropout.seed = derive_seed(seed, "surelda_dropout");
  sc.a_grid = pc.a_grid;
  std::optional<SureLdaShared> shared;
  std::optional<std::string> shared_error;
  if (any_lda) {
    try {
      std::vector<double> target;
      if (stage) target = log_normalize(train.s_icdnlp, train.note_count, stage->exponent_a[2]);
      shared = surelda_prepare(train, sc, target);
    } catch (const std::exception& e) {
      shared_error = e.what();
    }
  }

  std::vector<AlgorithmOutput> outputs;
  for (Algorithm a : all_algorithms()) {
    if (!wants(algorithms, {a})) continue;
    AlgorithmOutput out;
    out.algorithm = a;
    auto take = [&](const Upstream& u, const RunMetadata& meta) {
      if (u.error) {
        out.error = *u.error;
      } else {
        out.train = u.train;
        out.test = u.test;
        out.metadata = meta;
      }
    };
    try {
      switch (a) {
        case Algorithm::IcdLogit: {
          auto b = icd_logit_baseline(train, split.train_labels.y, test);
          out.train = std::move(b.train);
          out.test = std::move(b.test);
          if (b.fit.ridge_used) out.metadata.warnings.push_back("separation: ridge fallback used");
          break;
        }
        case Algorithm::PhenormV1: take(need_phen(0), phen_meta[0]); break;
        case Algorithm::PhenormV2: take(need_phen(1), phen_meta[1]); break;
        case Algorithm::MapV1: take(need_map(0), map_meta[0]); break;
        case Algorithm::MapV2: take(need_map(1), map_meta[1]); break;
        default: {
          if (!shared) {
            out.error = shared_error.value_or("sureLDA preparation unavailable");
            break;
          }
          const PriorSource src = prior_of(a);
          const Upstream& up = src == PriorSource::PhenormV1   ? need_phen(0)
                               : src == PriorSource::PhenormV2 ? need_phen(1)
                               : src == PriorSource::MapV1     ? need_map(0)
                                                               : need_map(1);
          if (up.error) {
            out.error = "prior failed: " + *up.error;
            break;
          }
          SureLdaConfig c = sc;
          c.prior_source = src;
          c.seed = derive_seed(seed, "gibbs_" + to_string(a));
          const auto model = surelda_fit(train, *shared, up.train, c);
          out.train = model.train_scores.aggregate;
          out.test = surelda_predict(model, test, up.test).aggregate;
          out.metadata = model.train_scores.metadata;
          break;
        }
      }
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    outputs.push_back(std::move(out));
  }
  return outputs;
}

std::vector<SummaryRow> summarize(const std::vector<ReplicateRow>& rows, const std::vector<ReplicateFailure>& failures,
                                  const std::vector<Algorithm>& algorithms) {
  std::vector<SummaryRow> out;
  for (Algorithm a : all_algorithms()) {
    if (!wants(algorithms, {a})) continue;
    for (SplitKind s : {SplitKind::Test, SplitKind::Train}) {
      SummaryRow row;
      row.algorithm = a;
      row.split = s;
      for (const auto& f : failures) row.n_failed += f.algorithm == a;
      std::array<std::vector<double>, 8> cols;
      for (const auto& r : rows) {
        if (r.algorithm != a || r.split != s) continue;
        const auto v = metric_values(r.metrics);
        for (int k = 0; k < 8; ++k) cols[k].push_back(v[k]);
      }
      row.n_ok = static_cast<int>(cols[0].size());
      for (int k = 0; k < 8; ++k) {
        row.mean[k] = cols[k].empty() ? NAN : mean(cols[k]);
        row.sd[k] = cols[k].empty() ? NAN : population_sd(cols[k]);
      }
      out.push_back(row);
    }
  }
  return out;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(w, count); ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

SimulationReport run_replications(const SimulationConfig& config) {
  if (config.replicates < 1) raise(ErrorKind::InvalidConfig, "replicates must be at least 1");
  if (config.algorithms.empty()) raise(ErrorKind::InvalidConfig, "no algorithms requested");
  const auto R = static_cast<std::size_t>(config.replicates);

  struct Slot {
    std::vector<ReplicateRow> rows;
    std::vector<ReplicateFailure> failures;
    double prevalence = NAN, undefined = NAN;
    RunMetadata metadata;
  };
  std::vector<Slot> slots(R);

  parallel_for(R, config.workers, [&](std::size_t r) {
    Slot& slot = slots[r];
    const std::uint64_t rs = replicate_seed(config.seed, static_cast<int>(r));
    try {
      const Cohort cohort = generate_cohort(config.generator, config.n, config.scenario, derive_seed(rs, "cohort"));
      slot.prevalence = cohort.empirical_prevalence();
      slot.undefined = cohort.undefined_fraction();
      const CohortSplit split = split_cohort(cohort, config.test_size, derive_seed(rs, "split"));
      const auto outputs = run_algorithms(split, config.algorithms, config.settings, rs);
      for (const auto& o : outputs) {
        if (o.error) {
          slot.failures.push_back({static_cast<int>(r), o.algorithm, *o.error});
          continue;
        }
        try {
          const MetricSet te = compute_metrics(o.test, split.test_labels.y, split.test_labels.true_prob, config.threshold, config.na);
          const MetricSet tr =
              compute_metrics(o.train, split.train_labels.y, split.train_labels.true_prob, config.threshold, config.na);
          slot.rows.push_back({static_cast<int>(r), o.algorithm, SplitKind::Test, te});
          slot.rows.push_back({static_cast<int>(r), o.algorithm, SplitKind::Train, tr});
        } catch (const std::exception& e) {
          slot.failures.push_back({static_cast<int>(r), o.algorithm, e.what()});
        }
        if (r == 0) {
          for (const auto& w : o.metadata.warnings) slot.metadata.warnings.push_back(to_string(o.algorithm) + ": " + w);
          for (const auto& kv : o.metadata.info) slot.metadata.info.emplace_back(to_string(o.algorithm) + "." + kv.first, kv.second);
        }
      }
    } catch (const std::exception& e) {
      for (Algorithm a : config.algorithms) slot.failures.push_back({static_cast<int>(r), a, e.what()});
    }
  });

  SimulationReport rep;
  rep.config = config;
  for (std::size_t r = 0; r < R; ++r) {
    rep.replicate_seeds.push_back(replicate_seed(config.seed, static_cast<int>(r)));
    rep.per_replicate.insert(rep.per_replicate.end(), slots[r].rows.begin(), slots[r].rows.end());
    rep.failures.insert(rep.failures.end(), slots[r].failures.begin(), slots[r].failures.end());
    rep.empirical_prevalence.push_back(slots[r].prevalence);
    rep.undefined_fraction.push_back(slots[r].undefined);
  }
  rep.metadata = slots[0].metadata;
  rep.summary = summarize(rep.per_replicate, rep.failures, config.algorithms);
  return rep;
}

std::string canonical_config(const SimulationConfig& c) {
  std::ostringstream s;
  s << "generator=" << to_string(c.generator) << ";scenario=" << to_string(c.scenario) << ";algorithms=";
  for (std::size_t i = 0; i < c.algorithms.size(); ++i) s << (i ? "," : "") << to_string(c.algorithms[i]);
  s << ";replicates=" << c.replicates << ";n=" << c.n << ";test_size=" << c.test_size << ";seed=" << c.seed
    << ";na=" << (c.na.kind == NaKind::EpsilonSmoothing ? "epsilon" : "narm") << ";epsilon=" << fmt(c.na.epsilon)
    << ";threshold=" << fmt(c.threshold) << ";dropout_r=" << fmt(c.settings.dropout_r)
    << ";dropout_repetitions=" << c.settings.dropout_repetitions << ";a_grid_points=" << c.settings.a_grid_points
    << ";gibbs_burn_in=" << c.settings.gibbs_burn_in << ";gibbs_samples=" << c.settings.gibbs_samples
    << ";null_topics=" << c.settings.null_topics << ";dirichlet_beta=" << fmt(c.settings.dirichlet_beta);
  return s.str();
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

void provenance_line(std::ostream& out, const SimulationConfig& c) {
  out << "# weakpheno seed=" << c.seed << " config_hash=" << hex64(fnv1a64(canonical_config(c))) << '\n';
}

}  // namespace

void write_report_csv(std::ostream& out, const SimulationReport& rep) {
  provenance_line(out, rep.config);
  out << "replicate,algorithm,split,auc,f1,precision,recall,accuracy,prob_mse,prob_mae,n_undefined\n";
  for (const auto& r : rep.per_replicate) {
    const auto& m = r.metrics;
    out << r.replicate << ',' << to_string(r.algorithm) << ',' << to_string(r.split) << ',' << fmt(m.auc) << ','
        << fmt(m.f1) << ',' << fmt(m.precision) << ',' << fmt(m.recall) << ',' << fmt(m.accuracy) << ','
        << fmt(m.prob_mse) << ',' << fmt(m.prob_mae) << ',' << m.n_undefined_handled << '\n';
  }
}

void write_summary_csv(std::ostream& out, const SimulationReport& rep) {
  provenance_line(out, rep.config);
  out << "generator,scenario,algorithm,split,n_ok,n_failed";
  for (const char* name : kMetricNames) out << ',' << name << "_mean," << name << "_sd";
  out << '\n';
  for (const auto& s : rep.summary) {
    out << to_string(rep.config.generator) << ',' << to_string(rep.config.scenario) << ',' << to_string(s.algorithm) << ','
        << to_string(s.split) << ',' << s.n_ok << ',' << s.n_failed;
    for (int k = 0; k < 8; ++k) out << ',' << fmt(s.mean[k]) << ',' << fmt(s.sd[k]);
    out << '\n';
  }
}

void write_provenance_json(std::ostream& out, const SimulationReport& rep) {
  using nlohmann::json;
  const auto& c = rep.config;
  json j;
  j["tool"] = "weakpheno";
  j["seed"] = c.seed;
  j["config_hash"] = hex64(fnv1a64(canonical_config(c)));
  j["config"] = {
      {"generator", to_string(c.generator)},
      {"scenario", to_string(c.scenario)},
      {"replicates", c.replicates},
      {"n", c.n},
      {"test_size", c.test_size},
      {"na", c.na.kind == NaKind::EpsilonSmoothing ? "epsilon" : "narm"},
      {"epsilon", c.na.epsilon},
      {"threshold", c.threshold},
      {"dropout_r", c.settings.dropout_r},
      {"dropout_repetitions", c.settings.dropout_repetitions},
      {"a_grid_points", c.settings.a_grid_points},
      {"gibbs_burn_in", c.settings.gibbs_burn_in},
      {"gibbs_samples", c.settings.gibbs_samples},
      {"null_topics", c.settings.null_topics},
      {"dirichlet_beta", c.settings.dirichlet_beta},
      {"em_tol", 1e-6},
      {"em_max_iter", 500},
  };
  json algs = json::array();
  for (Algorithm a : c.algorithms) algs.push_back(to_string(a));
  j["config"]["algorithms"] = algs;
  json reps = json::array();
  for (std::size_t r = 0; r < rep.replicate_seeds.size(); ++r) {
    const std::uint64_t rs = rep.replicate_seeds[r];
    reps.push_back({{"replicate", r},
                    {"seed", rs},
                    {"cohort_seed", derive_seed(rs, "cohort")},
                    {"split_seed", derive_seed(rs, "split")},
                    {"empirical_prevalence", rep.empirical_prevalence[r]},
                    {"undefined_fraction", rep.undefined_fraction[r]}});
  }
  j["replicates"] = reps;
  json fails = json::array();
  for (const auto& f : rep.failures)
    fails.push_back({{"replicate", f.replicate}, {"algorithm", to_string(f.algorithm)}, {"error", f.message}});
  j["failures"] = fails;
  json info = json::object();
  for (const auto& kv : rep.metadata.info) info[kv.first] = kv.second;
  j["metadata"] = info;
  j["warnings"] = rep.metadata.warnings;
  out << j.dump(2) << '\n';
}

}  // namespace weakpheno
