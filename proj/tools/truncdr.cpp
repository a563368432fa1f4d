/*
 * Copyright 2026 The truncdr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// truncdr command-line tool: estimate, curve, simulate, diagnose.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "truncdr/truncdr.hpp"

namespace {

using namespace truncdr;

constexpr int kExitInput = 2;
constexpr int kExitEstimation = 3;
constexpr int kExitOverlap = 4;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

// Options shared by estimate, curve and diagnose.
struct DataArgs {
  std::string path;
  std::string censoring = "none";
  std::string q_col = "q", x_col = "x", delta_col = "delta", weight_col;
  std::string z_cols;
  std::string z_prefix = "z";

  void add(CLI::App* app) {
    app->add_option("--data", path, "input CSV")->required();
    app->add_option("--censoring", censoring, "none, c1 or c2")->check(CLI::IsMember({"none", "c1", "c2"}));
    app->add_option("--q-col", q_col, "entry-time column");
    app->add_option("--x-col", x_col, "observed-time column");
    app->add_option("--delta-col", delta_col, "event-indicator column");
    app->add_option("--weight-col", weight_col, "case-weight column");
    app->add_option("--z-cols", z_cols, "comma-separated covariate columns");
    app->add_option("--z-prefix", z_prefix, "prefix of auto-detected covariate columns");
  }

  Dataset load() const {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::kBadArgument, "cannot open '" + path + "'");
    CsvSchema schema;
    schema.q_col = q_col;
    schema.x_col = x_col;
    schema.delta_col = delta_col;
    schema.z_cols = split_list(z_cols);
    schema.z_prefix = z_prefix;
    if (!weight_col.empty()) schema.weight_col = weight_col;
    return load_dataset(in, schema, parse_censoring(censoring), path);
  }
};

struct NuisanceArgs {
  std::string f = "cox", g = "cox";
  std::optional<double> clamp, tau;
  int bins = 3;
  int min_events = 5;
  std::optional<std::size_t> table_stratum;

  void add(CLI::App* app) {
    app->add_option("--f,--f-learner", f, "event-time learner: cox, cox2, spl, constant0, table:PATH");
    app->add_option("--g,--g-learner", g, "truncation-time learner: cox, cox2, spl, constant1, table:PATH");
    app->add_option("--clamp", clamp, "overlap clamp level for both CDFs")->check(CLI::Range(0.0, 0.4999));
    app->add_option("--tau", tau, "time-reversal constant (default max x + 1)");
    app->add_option("--bins", bins, "quantile bins per covariate for spl")->check(CLI::PositiveNumber);
    app->add_option("--min-events", min_events, "events per spl stratum before merging")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--table-stratum", table_stratum, "covariate index holding the table stratum id");
  }

  LearnerSpec learner(const std::string& token, bool event_role) const {
    if (token.rfind("table:", 0) == 0) {
      const std::string file = token.substr(6);
      std::ifstream in(file);
      if (!in) fail(ErrorCode::kBadArgument, "cannot open table '" + file + "'");
      return LearnerSpec::external(load_external_table(in, table_stratum));
    }
    if (token == "constant0" || token == "constant1") {
      if ((token == "constant0") != event_role) {
        fail(ErrorCode::kBadArgument, "'" + token + "' is not a valid " + (event_role ? "--f" : "--g") + " learner");
      }
      return LearnerSpec::constant();
    }
    LearnerSpec s = parse_learner_token(token);
    s.strata.bins_per_covariate = bins;
    s.strata.min_events = static_cast<std::size_t>(min_events);
    return s;
  }

  NuisanceOptions options() const {
    NuisanceOptions o;
    o.tau = tau;
    o.clamp_eps = clamp;
    return o;
  }
};

struct FunctionalArgs {
  std::string kind = "survival";
  std::optional<double> t0;

  void add(CLI::App* app) {
    app->add_option("--functional", kind, "survival or rmst")->check(CLI::IsMember({"survival", "rmst"}));
    app->add_option("--t0", t0, "time horizon");
  }

  Functional make() const {
    if (!t0) fail(ErrorCode::kBadArgument, "--t0 is required");
    return kind == "rmst" ? Functional::rmst(*t0) : Functional::survival(*t0);
  }
};

struct BootArgs {
  int B = 0;
  std::optional<std::uint64_t> seed;
  std::string method = "se_normal";
  std::optional<unsigned> threads;

  void add(CLI::App* app) {
    app->add_option("--boot", B, "bootstrap replicates (0 = none)")->check(CLI::NonNegativeNumber);
    app->add_option("--boot-seed", seed, "bootstrap seed (default --seed)");
    app->add_option("--boot-method", method, "se_normal or percentile")
        ->check(CLI::IsMember({"se_normal", "percentile"}));
    app->add_option("--threads", threads, "worker cap (default TRUNCDR_THREADS or all cores)");
  }
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) fail(ErrorCode::kBadArgument, "cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

EstimatorConfig make_config(const std::string& estimator, const NuisanceArgs& na, int k, std::uint64_t seed) {
  EstimatorConfig cfg;
  cfg.kind = parse_estimator_kind(estimator);
  cfg.f = na.learner(na.f, true);
  cfg.g = na.learner(na.g, false);
  cfg.folds = k;
  cfg.seed = seed;
  cfg.nuisance = na.options();
  cfg.overlap = true;
  return cfg;
}

// Reads "key = value" lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kBadArgument, "cannot open config '" + path + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kBadArgument, path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    std::replace(key.begin(), key.end(), '_', '-');
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::optional<std::string> find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return std::nullopt;
}

int run_estimate(const DataArgs& da, const NuisanceArgs& na, const FunctionalArgs& fa, const BootArgs& ba,
                 const std::string& estimator, int k, std::uint64_t seed, const std::string& format,
                 const std::string& out_path) {
  const Dataset ds = da.load();
  const Functional nu = fa.make();
  const EstimatorConfig cfg = make_config(estimator, na, k, seed);
  EstimateReport r = run_estimator(ds, cfg, nu);
  if (ba.B > 0) {
    attach(r, bootstrap(ds, cfg, nu, r.theta, ba.B, ba.seed.value_or(seed), parse_boot_method(ba.method),
                        ba.threads));
  }
  Output out(out_path);
  if (format == "csv") {
    write_report_csv(out.stream(), std::span<const EstimateReport>(&r, 1));
  } else {
    out.stream() << to_json(r).dump(2) << '\n';
  }
  return 0;
}

std::vector<double> make_grid(const std::string& grid, std::optional<double> from, std::optional<double> to,
                              std::optional<double> step) {
  std::vector<double> out;
  if (!grid.empty()) {
    for (const auto& tok : split_list(grid)) {
      auto v = detail::parse_double(tok);
      if (!v) fail(ErrorCode::kBadArgument, "bad grid value '" + tok + "'");
      out.push_back(*v);
    }
  } else {
    if (!from || !to || !step) fail(ErrorCode::kBadArgument, "give --grid or all of --from, --to, --step");
    if (!(*step > 0.0) || *to < *from) fail(ErrorCode::kBadArgument, "bad grid range");
    const auto m = static_cast<long>(std::floor((*to - *from) / *step + 1e-9));
    for (long j = 0; j <= m; ++j) out.push_back(*from + static_cast<double>(j) * *step);
  }
  if (out.empty()) fail(ErrorCode::kBadArgument, "empty grid");
  return out;
}

int run_curve(const DataArgs& da, const NuisanceArgs& na, const BootArgs& ba, const std::string& estimators,
              const std::vector<double>& grid, int k, std::uint64_t seed, const std::string& out_path) {
  const Dataset ds = da.load();
  for (double t : grid) {
    if (!(t >= ds.min_q() && t <= ds.max_x())) {
      fail(ErrorCode::kBadArgument, "grid point " + format_number(t) + " outside the data range");
    }
  }
  std::vector<Functional> nus;
  for (double t : grid) nus.push_back(Functional::survival(t));
  Output out(out_path);
  auto& os = out.stream();
  os << "estimator,t,theta,se,lo,hi\n";
  for (const auto& name : split_list(estimators)) {
    const EstimatorConfig cfg = make_config(name, na, k, seed);
    auto reports = run_estimator(ds, cfg, nus);
    if (ba.B > 0) {
      std::vector<double> points;
      for (const auto& r : reports) points.push_back(r.theta);
      const auto boots = bootstrap(ds, cfg, nus, points, ba.B, ba.seed.value_or(seed),
                                   parse_boot_method(ba.method), ba.threads);
      for (std::size_t j = 0; j < reports.size(); ++j) attach(reports[j], boots[j]);
    }
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const auto& r = reports[j];
      const auto se = ba.B > 0 ? r.se_boot : r.se_model;
      const auto ci = ba.B > 0 ? r.ci_boot : r.ci_model;
      os << r.estimator << ',' << format_number(grid[j]) << ',' << format_number(r.theta) << ','
         << (se ? format_number(*se) : "") << ',' << (ci ? format_number(ci->lo) : "") << ','
         << (ci ? format_number(ci->hi) : "") << '\n';
    }
  }
  return 0;
}

int run_diagnose(const DataArgs& da, const NuisanceArgs& na, const std::string& out_path) {
  const Dataset ds = da.load();
  Json j = to_json(kendall_tau_conditional(ds));
  const NuisanceSet ns =
      fit_nuisances(ds, na.learner(na.f, true), na.learner(na.g, false), na.options());
  const OverlapReport ov = empirical_overlap_report(ns, ds);
  j["min_eta1"] = ov.min_eta1;
  j["min_eta2"] = ov.min_eta2;
  j["min_eta3"] = ov.min_eta3;
  j["overlap"] = to_json(ov);
  j["nuisance"] = ns.info;
  Output out(out_path);
  out.stream() << j.dump(2) << '\n';
  return 0;
}

struct SimArgs {
  std::string scenario = "1";
  std::size_t n = 1000;
  int reps = 200;
  std::string estimators = "dr,ipw,reg1,reg2,pl,naive,full";
  std::uint64_t seed = 1;
  std::string emit_data;
  std::optional<double> theta0;
};

int run_simulate(const SimArgs& sa, const FunctionalArgs& fa, const BootArgs& ba, const std::string& out_path) {
  const Scenario sc = parse_scenario(sa.scenario);
  if (!sa.emit_data.empty()) {
    const SimSample s = generate_scenario({sc, sa.n, sa.seed, {}, {}});
    std::ofstream f(sa.emit_data);
    if (!f) fail(ErrorCode::kBadArgument, "cannot write '" + sa.emit_data + "'");
    write_dataset(f, s.observed);
    std::fprintf(stderr, "wrote %zu of %zu subjects (truncation rate %.4f)\n", s.observed.size(), sa.n,
                 s.truncation_rate);
    return 0;
  }
  StudyConfig cfg;
  cfg.scenario = sc;
  cfg.n = sa.n;
  cfg.reps = sa.reps;
  cfg.boot = ba.B;
  cfg.boot_method = parse_boot_method(ba.method);
  cfg.seed = sa.seed;
  cfg.threads = ba.threads;
  cfg.theta0 = sa.theta0;
  if (fa.t0) cfg.functional = fa.make();
  for (const auto& id : split_list(sa.estimators)) cfg.estimators.push_back(parse_study_estimator(id));
  const StudyResult res = replicate_study(cfg);
  Output out(out_path);
  write_study_csv(out.stream(), res);
  std::fprintf(stderr, "scenario %s: theta0 %.6f, mean truncation rate %.4f, mean censoring rate %.4f\n",
               sa.scenario.c_str(), res.theta0, res.mean_truncation_rate, res.mean_censoring_rate);
  return 0;
}

int exit_code_for(const Error& e) {
  switch (classify(e.code())) {
    case ErrorClass::kInput: return kExitInput;
    case ErrorClass::kOverlap: return kExitOverlap;
    default: return kExitEstimation;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Doubly robust estimation under left truncation"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key=value file; command-line flags win");
  };

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate one functional on a CSV");
  DataArgs est_data;
  NuisanceArgs est_nuis;
  FunctionalArgs est_fun;
  BootArgs est_boot;
  std::string est_estimator = "dr", est_format = "json", est_out;
  int est_k = 10;
  std::uint64_t est_seed = 1;
  est_data.add(est);
  est_nuis.add(est);
  est_fun.add(est);
  est_boot.add(est);
  est->add_option("--estimator", est_estimator, "dr, cf, ipw, reg1, reg2, pl or naive");
  est->add_option("--k", est_k, "cross-fitting folds")->check(CLI::Range(2, 1000));
  est->add_option("--seed", est_seed, "seed for fold splits");
  est->add_option("--format", est_format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  est->add_option("--out", est_out, "output file (default stdout)");
  add_config(est);

  // curve
  auto* cur = app.add_subcommand("curve", "survival-probability estimates over a time grid");
  DataArgs cur_data;
  NuisanceArgs cur_nuis;
  BootArgs cur_boot;
  std::string cur_estimators = "dr", cur_grid, cur_out;
  std::optional<double> cur_from, cur_to, cur_step;
  int cur_k = 10;
  std::uint64_t cur_seed = 1;
  cur_data.add(cur);
  cur_nuis.add(cur);
  cur_boot.add(cur);
  cur->add_option("--estimators", cur_estimators, "comma-separated estimator names");
  cur->add_option("--grid", cur_grid, "comma-separated times");
  cur->add_option("--from", cur_from, "grid start");
  cur->add_option("--to", cur_to, "grid end");
  cur->add_option("--step", cur_step, "grid spacing");
  cur->add_option("--k", cur_k, "cross-fitting folds")->check(CLI::Range(2, 1000));
  cur->add_option("--seed", cur_seed, "seed for fold splits");
  cur->add_option("--out", cur_out, "output file (default stdout)");
  add_config(cur);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo study on a built-in scenario");
  SimArgs sim_args;
  FunctionalArgs sim_fun;
  BootArgs sim_boot;
  std::string sim_out;
  sim->add_option("--scenario", sim_args.scenario, "1-7, base62, c1 or c2");
  sim->add_option("--n", sim_args.n, "observed sample size")->check(CLI::PositiveNumber);
  sim->add_option("--reps", sim_args.reps, "replicates")->check(CLI::PositiveNumber);
  sim->add_option("--estimators", sim_args.estimators, "e.g. dr,dr-cox2-cox1,ipw,cf-spl-spl,pl,naive,full");
  sim->add_option("--seed", sim_args.seed, "master seed");
  sim->add_option("--theta0", sim_args.theta0, "true value (default computed)");
  sim->add_option("--emit-data", sim_args.emit_data, "write one observed sample to this CSV and stop");
  sim_fun.add(sim);
  sim_boot.add(sim);
  sim->add_option("--out", sim_out, "output CSV (default stdout)");
  add_config(sim);

  // diagnose
  auto* dia = app.add_subcommand("diagnose", "quasi-independence test and overlap minima");
  DataArgs dia_data;
  NuisanceArgs dia_nuis;
  std::string dia_out;
  dia_data.add(dia);
  dia_nuis.add(dia);
  dia->add_option("--out", dia_out, "output file (default stdout)");
  add_config(dia);

  // Config entries go in front of the user's flags so the flags take precedence.
  std::vector<std::string> args(argv, argv + argc);
  try {
    if (auto path = find_config_arg(argc, argv); path && argc > 1) {
      CLI::App* target = nullptr;
      for (auto* sub : app.get_subcommands({})) {
        if (sub->get_name() == args[1]) target = sub;
      }
      if (target) {
        std::vector<std::string> injected;
        for (const auto& [key, value] : read_config(*path)) {
          if (key == "config") continue;
          if (!target->get_option_no_throw("--" + key)) {
            std::fprintf(stderr, "config: ignoring unknown key '%s'\n", key.c_str());
            continue;
          }
          injected.push_back("--" + key + "=" + value);
        }
        args.insert(args.begin() + 2, injected.begin(), injected.end());
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }

  std::vector<const char*> cargs;
  for (const auto& a : args) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (*est) {
      return run_estimate(est_data, est_nuis, est_fun, est_boot, est_estimator, est_k, est_seed, est_format, est_out);
    }
    if (*cur) {
      return run_curve(cur_data, cur_nuis, cur_boot, cur_estimators, make_grid(cur_grid, cur_from, cur_to, cur_step),
                       cur_k, cur_seed, cur_out);
    }
    if (*sim) return run_simulate(sim_args, sim_fun, sim_boot, sim_out);
    if (*dia) return run_diagnose(dia_data, dia_nuis, dia_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitEstimation;
  }
  return 0;
}
