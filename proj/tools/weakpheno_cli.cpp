#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli_config.hpp"
#include "weakpheno/chart_sampling.hpp"
#include "weakpheno/cohort.hpp"
#include "weakpheno/datagen.hpp"
#include "weakpheno/error.hpp"
#include "weakpheno/harness.hpp"

namespace fs = std::filesystem;
using namespace weakpheno;
using weakpheno::cli::ConfigError;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kUsage = 2, kPartial = 3 };

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  }
};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

Table read_table(const std::string& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) throw ConfigError(field, "cannot open '" + path + "'");
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(f);
    } else {
      if (f.size() != t.header.size()) raise(ErrorKind::Io, path + ": row with " + std::to_string(f.size()) + " fields");
      t.rows.push_back(std::move(f));
    }
  }
  if (t.header.empty()) raise(ErrorKind::Io, path + ": no header");
  return t;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  raise(ErrorKind::Io, where + ": not a number '" + s + "'");
}

std::string provenance(std::uint64_t seed, const std::string& canonical) {
  return "# weakpheno seed=" + std::to_string(seed) + " config_hash=" + hex64(fnv1a64(canonical)) + "\n";
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("--out", "cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + p.string());
  return out;
}

void warn(const std::string& what) { std::cerr << cli::error_json("Warning", "", what) << '\n'; }

int run_simulate(const cli::SimulateFlags& flags) {
  const cli::SimulateRun run = cli::resolve_simulate(flags);
  const fs::path dir = prepare_out(run.out_dir);
  const SimulationReport rep = run_replications(run.config);
  {
    auto out = open_out(dir / "report.csv");
    write_report_csv(out, rep);
  }
  {
    auto out = open_out(dir / "summary.csv");
    write_summary_csv(out, rep);
  }
  {
    auto out = open_out(dir / "provenance.json");
    write_provenance_json(out, rep);
  }
  for (const auto& f : rep.failures) warn("replicate " + std::to_string(f.replicate) + " " + to_string(f.algorithm) + ": " + f.message);
  if (!rep.failures.empty() && run.strict) return kPartial;
  return kOk;
}

struct GenerateFlags {
  std::string generator = "simplified", scenario = "common_informative", out = "out";
  long long n = 10000;
  std::uint64_t seed = 1;
};

int run_generate(const GenerateFlags& f) {
  Generator g;
  Scenario s;
  try {
    g = parse_generator(f.generator);
  } catch (const Error& e) {
    throw ConfigError("--generator", e.what());
  }
  try {
    s = parse_scenario(f.scenario);
  } catch (const Error& e) {
    throw ConfigError("--scenario", e.what());
  }
  if (f.n < 1) throw ConfigError("--n", "must be at least 1");
  const fs::path dir = prepare_out(f.out);
  const Cohort c = generate_cohort(g, static_cast<std::size_t>(f.n), s, f.seed);
  auto out = open_out(dir / "cohort.csv");
  out << provenance(f.seed, "generate;generator=" + f.generator + ";scenario=" + f.scenario + ";n=" + std::to_string(f.n) +
                                ";seed=" + std::to_string(f.seed));
  write_cohort_csv(out, c);
  return kOk;
}

struct FitFlags {
  std::string input, out = "out";
  std::string algorithms = "phenorm_v1,phenorm_v2,map_v1,map_v2,surelda_v1,surelda_v2,surelda_v3,surelda_v4";
  std::uint64_t seed = 1;
  bool strict = false;
  AlgorithmSettings settings;
};

int run_fit(const FitFlags& f) {
  const auto algs = cli::parse_algorithm_list(f.algorithms, "--algorithms");
  if (!(f.settings.dropout_r >= 0.0 && f.settings.dropout_r <= 1.0)) throw ConfigError("--dropout-r", "must lie in [0,1]");
  if (f.settings.gibbs_samples < 1) throw ConfigError("--gibbs-samples", "must be at least 1");
  if (f.settings.gibbs_burn_in < 0) throw ConfigError("--gibbs-burn-in", "must be nonnegative");
  if (f.settings.a_grid_points < 1) throw ConfigError("--a-grid-points", "must be at least 1");
  std::ifstream in(f.input);
  if (!in) throw ConfigError("--input", "cannot open '" + f.input + "'");
  const fs::path dir = prepare_out(f.out);
  const Cohort cohort = read_cohort_csv(in);
  if (cohort.size() == 0) raise(ErrorKind::InsufficientData, "cohort file has no rows");

  CohortSplit split;
  split.rows.train.resize(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) split.rows.train[i] = i;
  split.train = feature_view(cohort, split.rows.train);
  split.test = feature_view(cohort, split.rows.test);
  split.train_labels = labels_of(cohort, split.rows.train);
  const auto outputs = run_algorithms(split, algs, f.settings, f.seed);

  std::vector<const AlgorithmOutput*> ok;
  for (const auto& o : outputs) {
    if (o.error) {
      warn(to_string(o.algorithm) + ": " + *o.error);
    } else {
      ok.push_back(&o);
    }
  }
  auto out = open_out(dir / "predictions.csv");
  out << provenance(f.seed, "fit;input=" + fs::path(f.input).filename().string() + ";algorithms=" + f.algorithms +
                                ";seed=" + std::to_string(f.seed));
  out << "id";
  for (const auto* o : ok) out << ',' << to_string(o->algorithm);
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    out << cohort.ids[i];
    for (const auto* o : ok) {
      std::snprintf(buf, sizeof buf, "%.17g", o->train[i]);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (ok.empty()) return kRuntime;
  if (ok.size() != outputs.size() && f.strict) return kPartial;
  return kOk;
}

struct SelectFlags {
  std::string input, column, out = "out", middle_mode = "quantile";
  SamplingPlan plan;
  std::uint64_t seed = 1;
};

int run_select(const SelectFlags& f) {
  SamplingPlan plan = f.plan;
  if (f.middle_mode == "quantile") {
    plan.middle_mode = MiddleMode::Quantile;
  } else if (f.middle_mode == "band") {
    plan.middle_mode = MiddleMode::Band;
  } else {
    throw ConfigError("--middle-mode", "must be 'quantile' or 'band'");
  }
  if (plan.top_count < 0) throw ConfigError("--top", "must be nonnegative");
  if (plan.bottom_count < 0) throw ConfigError("--bottom", "must be nonnegative");
  if (plan.middle_count < 0) throw ConfigError("--middle", "must be nonnegative");
  if (!(plan.top_quantile > 0.0 && plan.top_quantile < 1.0)) throw ConfigError("--top-quantile", "must lie in (0,1)");
  if (!(plan.bottom_quantile > 0.0 && plan.bottom_quantile <= plan.top_quantile))
    throw ConfigError("--bottom-quantile", "must lie in (0, top-quantile]");
  const Table t = read_table(f.input, "--input");
  const int id_col = t.column("id");
  if (id_col < 0) throw ConfigError("--input", "file has no 'id' column");
  int p_col = -1;
  if (!f.column.empty()) {
    p_col = t.column(f.column);
    if (p_col < 0) throw ConfigError("--column", "no column named '" + f.column + "'");
  } else if (t.column("prob") >= 0) {
    p_col = t.column("prob");
  } else if (t.header.size() == 2) {
    p_col = id_col == 0 ? 1 : 0;
  } else {
    throw ConfigError("--column", "several probability columns present; name one");
  }
  std::vector<std::int64_t> ids;
  std::vector<double> probs;
  for (const auto& r : t.rows) {
    ids.push_back(static_cast<std::int64_t>(to_double(r[id_col], f.input)));
    probs.push_back(to_double(r[p_col], f.input));
  }
  const fs::path dir = prepare_out(f.out);
  const auto sample = probability_guided_sample(probs, ids, plan, f.seed);
  auto out = open_out(dir / "chart_sample.csv");
  std::ostringstream canon;
  canon << "select-charts;column=" << t.header[p_col] << ";top=" << plan.top_count << ";bottom=" << plan.bottom_count
        << ";middle=" << plan.middle_count << ";tq=" << plan.top_quantile << ";bq=" << plan.bottom_quantile
        << ";mode=" << f.middle_mode << ";band=" << plan.middle_band_halfwidth << ";seed=" << f.seed;
  out << provenance(f.seed, canon.str());
  write_sample_csv(out, sample);
  return kOk;
}

struct CompareFlags {
  std::string features, groups, group_column = "stratum", out = "out";
  std::vector<std::string> columns;
};

int run_compare(const CompareFlags& f) {
  const Table ft = read_table(f.features, "--features");
  std::vector<std::string> labels;
  std::vector<std::size_t> used_rows;
  std::vector<std::string> names;
  const int id_col = ft.column("id");
  int own_group = -1;
  if (f.groups.empty()) {
    own_group = ft.column(f.group_column);
    if (own_group < 0) throw ConfigError("--group-column", "features file has no column '" + f.group_column + "'");
    for (std::size_t i = 0; i < ft.rows.size(); ++i) {
      labels.push_back(ft.rows[i][own_group]);
      used_rows.push_back(i);
    }
  } else {
    if (id_col < 0) throw ConfigError("--features", "features file needs an 'id' column to join groups");
    const Table gt = read_table(f.groups, "--groups");
    const int gid = gt.column("id"), gcol = gt.column(f.group_column);
    if (gid < 0) throw ConfigError("--groups", "groups file has no 'id' column");
    if (gcol < 0) throw ConfigError("--group-column", "groups file has no column '" + f.group_column + "'");
    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < ft.rows.size(); ++i) row_of[ft.rows[i][id_col]] = i;
    for (const auto& r : gt.rows) {
      auto it = row_of.find(r[gid]);
      if (it == row_of.end()) raise(ErrorKind::InvalidInput, "id " + r[gid] + " missing from the features file");
      labels.push_back(r[gcol]);
      used_rows.push_back(it->second);
    }
  }
  std::vector<int> cols;
  if (!f.columns.empty()) {
    for (const auto& c : f.columns) {
      const int j = ft.column(c);
      if (j < 0) throw ConfigError("--columns", "no column named '" + c + "'");
      cols.push_back(j);
    }
  } else {
    static const std::vector<std::string> skip = {"id", "y", "true_prob"};
    for (std::size_t j = 0; j < ft.header.size(); ++j)
      if (static_cast<int>(j) != own_group && std::find(skip.begin(), skip.end(), ft.header[j]) == skip.end())
        cols.push_back(static_cast<int>(j));
  }
  for (int j : cols) names.push_back(ft.header[j]);
  std::vector<std::vector<double>> rows;
  for (std::size_t i : used_rows) {
    std::vector<double> r;
    for (int j : cols) r.push_back(to_double(ft.rows[i][j], f.features));
    rows.push_back(std::move(r));
  }
  const fs::path dir = prepare_out(f.out);
  const auto res = compare_samples(names, rows, labels);
  auto out = open_out(dir / "comparison.csv");
  out << provenance(0, "compare;features=" + fs::path(f.features).filename().string() + ";groups=" +
                           fs::path(f.groups).filename().string() + ";group_column=" + f.group_column);
  write_comparison_csv(out, res);
  return kOk;
}

void add_settings(CLI::App* app, AlgorithmSettings& s) {
  app->add_option("--dropout-r", s.dropout_r, "Dropout corruption rate");
  app->add_option("--dropout-repetitions", s.dropout_repetitions, "Corruption draws averaged in the denoising regression");
  app->add_option("--a-grid-points", s.a_grid_points, "Points on [0,1] searched for the utilization exponent");
  app->add_option("--gibbs-burn-in", s.gibbs_burn_in, "Gibbs burn-in sweeps");
  app->add_option("--gibbs-samples", s.gibbs_samples, "Gibbs sweeps averaged after burn-in");
}

std::string field_from_message(const std::string& msg) {
  std::smatch m;
  static const std::regex flag("--[a-z][a-z0-9-]*");
  if (std::regex_search(msg, m, flag)) return m.str();
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised EHR phenotyping: PheNorm, MAP, sureLDA, simulation and chart sampling"};
  app.require_subcommand(1);

  cli::SimulateFlags sim;
  auto* s = app.add_subcommand("simulate", "Run replicated simulations and write report, summary and provenance");
  s->add_option("--config", sim.config_file, "JSON file with default settings (flags win)");
  s->add_option("--generator", sim.generator, "simplified | lda | complex");
  s->add_option("--scenario", sim.scenario, "rare_informative | rare_noninformative | common_informative | common_noninformative");
  s->add_option("--algorithms", sim.algorithms, "Comma-separated algorithm names, or 'all'");
  s->add_option("--replicates", sim.replicates, "Number of replicates (default 50)");
  s->add_option("--n", sim.n, "Cohort size (default 10000)");
  s->add_option("--test-size", sim.test_size, "Held-out test patients (default 200)");
  s->add_option("--seed", sim.seed, "Base seed");
  s->add_option("--na", sim.na, "epsilon | narm");
  s->add_option("--threshold", sim.threshold, "Classification threshold");
  s->add_option("--out", sim.out, "Output directory");
  s->add_option("--workers", sim.workers, "Worker threads");
  s->add_option("--dropout-r", sim.dropout_r, "Dropout corruption rate");
  s->add_option("--dropout-repetitions", sim.dropout_repetitions, "Corruption draws averaged in the denoising regression");
  s->add_option("--a-grid-points", sim.a_grid_points, "Points on [0,1] searched for the utilization exponent");
  s->add_option("--gibbs-burn-in", sim.gibbs_burn_in, "Gibbs burn-in sweeps");
  s->add_option("--gibbs-samples", sim.gibbs_samples, "Gibbs sweeps averaged after burn-in");
  s->add_option("--null-topics", sim.null_topics, "Null topics in sureLDA");
  s->add_option("--dirichlet-beta", sim.dirichlet_beta, "Feature-topic Dirichlet concentration");
  s->add_flag("--strict", sim.strict, "Exit nonzero when any replicate fails");

  GenerateFlags gen;
  auto* g = app.add_subcommand("generate", "Write one synthetic cohort as CSV");
  g->add_option("--generator", gen.generator, "simplified | lda | complex");
  g->add_option("--scenario", gen.scenario, "Scenario name");
  g->add_option("--n", gen.n, "Cohort size");
  g->add_option("--seed", gen.seed, "Seed");
  g->add_option("--out", gen.out, "Output directory");

  FitFlags fit;
  auto* fc = app.add_subcommand("fit", "Fit algorithms on a cohort CSV and write per-patient probabilities");
  fc->add_option("--input", fit.input, "Cohort CSV")->required();
  fc->add_option("--algorithms", fit.algorithms, "Comma-separated algorithm names, or 'all'");
  fc->add_option("--seed", fit.seed, "Seed");
  fc->add_option("--out", fit.out, "Output directory");
  fc->add_flag("--strict", fit.strict, "Exit nonzero when any algorithm fails");
  add_settings(fc, fit.settings);

  SelectFlags sel;
  auto* sc = app.add_subcommand("select-charts", "Draw a probability-stratified chart review sample");
  sc->add_option("--input", sel.input, "CSV with an id column and a probability column")->required();
  sc->add_option("--column", sel.column, "Probability column name");
  sc->add_option("--top", sel.plan.top_count, "Encounters from the top stratum");
  sc->add_option("--bottom", sel.plan.bottom_count, "Encounters from the bottom stratum");
  sc->add_option("--middle", sel.plan.middle_count, "Encounters from the middle stratum");
  sc->add_option("--top-quantile", sel.plan.top_quantile, "Lower edge of the top stratum");
  sc->add_option("--bottom-quantile", sel.plan.bottom_quantile, "Upper edge of the bottom stratum");
  sc->add_option("--middle-mode", sel.middle_mode, "quantile | band");
  sc->add_option("--band", sel.plan.middle_band_halfwidth, "Half-width around 0.5 for band mode");
  sc->add_option("--seed", sel.seed, "Seed");
  sc->add_option("--out", sel.out, "Output directory");

  CompareFlags cmp;
  auto* cc = app.add_subcommand("compare", "Kruskal-Wallis comparison of feature distributions across groups");
  cc->add_option("--features", cmp.features, "CSV of per-encounter features")->required();
  cc->add_option("--groups", cmp.groups, "CSV with id and group columns (e.g. a chart sample)");
  cc->add_option("--group-column", cmp.group_column, "Group column name");
  cc->add_option("--columns", cmp.columns, "Feature columns to test")->delimiter(',');
  cc->add_option("--out", cmp.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << cli::error_json("InvalidConfig", field_from_message(e.what()), e.what()) << '\n';
    return kUsage;
  }

  try {
    if (*s) return run_simulate(sim);
    if (*g) return run_generate(gen);
    if (*fc) return run_fit(fit);
    if (*sc) return run_select(sel);
    if (*cc) return run_compare(cmp);
  } catch (const ConfigError& e) {
    std::cerr << cli::error_json("InvalidConfig", e.field, e.what()) << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << cli::error_json(std::string(to_string(e.kind())), "", e.what()) << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << cli::error_json("Internal", "", e.what()) << '\n';
    return kRuntime;
  }
  return kUsage;
}
