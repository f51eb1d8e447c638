#include "ebtraffic/cli.hpp"

#include "ebtraffic/effective_bandwidth.hpp"
#include "ebtraffic/errors.hpp"
#include "ebtraffic/experiments.hpp"
#include "ebtraffic/policies.hpp"
#include "ebtraffic/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>

namespace ebt {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<std::string> out_dir;
  unsigned threads = 0;
};

std::string file_tag(const std::string& label) {
  std::string out;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
      out += c;
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

void write_json(const json& j, const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream f(file);
  if (!f) throw std::runtime_error("cannot write '" + file.string() + "'");
  f << j.dump(2) << '\n';
}

json defaults_manifest() {
  return {{"version", kVersion},
          {"service_params", "free_flow = C, jam = 2C, floor = 10, inflow_limit = 2C - 10 (per arc)"},
          {"demand_curve", rush_hour_curve()},
          {"jump", cars_and_trucks()},
          {"replications", 10000},
          {"seed", 42},
          {"rng", "mt19937_64, replication r seeded with seed + r"}};
}

class Runner {
 public:
  Runner(std::vector<std::string> args, std::ostream& out) : args_(std::move(args)), out_(out) {}

  GlobalOptions globals;

  Scenario resolve(const std::optional<std::string>& file, Scenario fallback) const {
    Scenario s = file ? load_scenario(*file) : std::move(fallback);
    if (globals.seed) s.seed = *globals.seed;
    if (globals.reps) {
      if (*globals.reps < 1) throw ValidationError("--reps must be at least 1");
      s.replications = *globals.reps;
    }
    if (globals.out_dir) s.output_dir = *globals.out_dir;
    return s;
  }

  fs::path out_dir(const std::string& fallback) const { return globals.out_dir ? *globals.out_dir : fallback; }

  void manifest(const fs::path& dir, const std::string& command, json inputs) const {
    json m{{"command", command},
           {"argv", args_},
           {"inputs", std::move(inputs)},
           {"defaults", defaults_manifest()}};
    write_json(m, dir / "manifest.json");
  }

  std::ostream& out() const { return out_; }

 private:
  std::vector<std::string> args_;
  std::ostream& out_;
};

void write_experiment(const ExperimentResult& result, const Scenario& scenario, const fs::path& dir,
                      const std::string& prefix, int trace_reps, std::ostream& out) {
  write_table_csv(result.table, dir / (prefix + "table.csv"));
  write_json(table_to_json(result.table), dir / (prefix + "table.json"));
  for (const auto& run : result.runs) {
    const std::string tag = file_tag(run.policy.label());
    write_time_series_csv(run, result.table.arc_ids, dir / (prefix + "timeseries_" + tag + ".csv"));
    if (trace_reps > 0) {
      SimulationConfig cfg = scenario.simulation(run.policy);
      cfg.replications = std::min(trace_reps, scenario.replications);
      const auto traces = run_replications(cfg, run.plan);
      write_traces_csv(traces, cfg.delta, dir / (prefix + "traces_" + tag + ".csv"));
    }
  }
  out << format_table(result.table);
}

int cmd_simulate(const Runner& run, const std::string& file, int trace_reps) {
  const Scenario s = run.resolve(file, {});
  const fs::path dir = s.output_dir;
  const auto result = run_policies(s, s.name, run.globals.threads);
  write_experiment(result, s, dir, "", trace_reps, run.out());
  run.manifest(dir, "simulate", {{"scenario", scenario_to_json(s)}});
  return 0;
}

int cmd_exp1(const Runner& run, const std::optional<std::string>& file, int trace_reps) {
  const Scenario s = run.resolve(file, default_experiment_1_scenario());
  const fs::path dir = s.output_dir;
  const auto result = run_experiment_1(s, run.globals.threads);
  write_experiment(result, s, dir, "", trace_reps, run.out());
  run.manifest(dir, "exp1", {{"scenario", scenario_to_json(s)}});
  return 0;
}

int cmd_exp2(const Runner& run, const std::optional<std::string>& file, const std::vector<int>& m_values,
             int trace_reps) {
  const Scenario s = run.resolve(file, default_experiment_2_scenario());
  const fs::path dir = s.output_dir;
  const auto results = run_experiment_2(s, m_values, run.globals.threads);
  json summary = json::array();
  for (std::size_t k = 0; k < results.size(); ++k) {
    const std::string prefix = "m" + std::to_string(m_values[k]) + "_";
    write_experiment(results[k], s.with_linear_links(static_cast<std::size_t>(m_values[k])), dir, prefix, trace_reps,
                     run.out());
    run.out() << '\n';
    summary.push_back({{"m", m_values[k]}, {"table", table_to_json(results[k].table)}});
  }
  write_json(summary, dir / "tables.json");
  run.manifest(dir, "exp2", {{"scenario", scenario_to_json(s)}, {"m", m_values}});
  return 0;
}

int cmd_maxrate(const Runner& run, const std::optional<std::string>& file, const std::string& policy_text) {
  const Scenario s = run.resolve(file, default_experiment_1_scenario());
  const PolicySpec policy = parse_policy(policy_text);
  const IncidenceMatrix inc = build_incidence(s.network);
  const RateCap cap = policy_cap(policy, s.network, inc, s.traffic());
  json paths, arcs;
  for (Eigen::Index i = 0; i < cap.path.size(); ++i) {
    const double v = cap.path[i];
    paths[inc.path_ids[static_cast<std::size_t>(i)]] = std::isfinite(v) ? json(v) : json("inf");
    run.out() << inc.path_ids[static_cast<std::size_t>(i)] << ": " << std::setprecision(10) << v << '\n';
  }
  for (Eigen::Index j = 0; j < cap.arc.size(); ++j) {
    const double v = cap.arc[j];
    arcs[inc.arc_ids[static_cast<std::size_t>(j)]] = std::isfinite(v) ? json(v) : json("inf");
  }
  if (policy.kind == PolicySpec::Kind::RN) run.out() << "alpha: " << policy.rn_alpha << '\n';
  const fs::path dir = run.out_dir(s.output_dir);
  write_json({{"policy", policy.to_string()}, {"label", policy.label()}, {"path_cap", paths}, {"arc_cap", arcs}},
             dir / "maxrate.json");
  run.manifest(dir, "maxrate", {{"scenario", scenario_to_json(s)}, {"policy", policy.to_string()}});
  return 0;
}

struct ViolationArgs {
  std::optional<std::string> arc;
  std::optional<std::string> path;
  std::optional<double> rate;
  std::int64_t samples = 1000000;
  std::optional<double> gamma;
};

int cmd_violation(const Runner& run, const std::optional<std::string>& file, const ViolationArgs& a) {
  Scenario s = run.resolve(file, default_experiment_1_scenario());
  if (a.rate) {
    const std::string path = a.path.value_or(s.network.paths().front().id);
    bool found = false;
    for (auto& st : s.streams) {
      if (st.path == path) {
        st.rate = *a.rate;
        found = true;
      }
    }
    if (!found) throw LookupError("unknown path '" + path + "'");
  }
  if (a.samples < 1) throw ValidationError("--samples must be positive");
  const std::string arc = a.arc.value_or(s.network.arcs().front().id);
  const IncidenceMatrix inc = build_incidence(s.network);
  const TrafficStreamSet traffic = s.traffic();
  Rng rng(s.seed);
  const auto est = estimate_violation_probability(s.network, inc, traffic, arc, a.samples, rng);
  const auto chernoff = minimize_exponent(s.network, inc, traffic, arc);
  json j{{"arc", arc},
         {"p_hat", est.p_hat},
         {"half_width", est.half_width},
         {"samples", est.samples},
         {"seed", s.seed},
         {"chernoff", chernoff}};
  if (a.gamma) {
    j["gamma"] = *a.gamma;
    j["admissible"] = chernoff.exponent <= -*a.gamma;
  }
  run.out() << "P(Y > C) on " << arc << ": " << est.p_hat << " +- " << est.half_width << " (Chernoff bound "
            << chernoff.bound << ")\n";
  const fs::path dir = run.out_dir(s.output_dir);
  write_json(j, dir / "violation.json");
  run.manifest(dir, "violation-prob", {{"scenario", scenario_to_json(s)}, {"arc", arc}, {"samples", a.samples}});
  return 0;
}

struct LdpArgs {
  std::optional<std::string> spec_file;
  double lambda = 5.0;
  double jump_rate = 1.0;
  double threshold = 7.0;
  std::vector<double> horizons{10.0, 20.0, 40.0, 80.0};
  std::int64_t samples = 1000000;
  std::string method = "tilted";
};

int cmd_ldp(const Runner& run, const LdpArgs& a) {
  LdpReportSpec spec;
  spec.horizons = a.horizons;
  spec.samples = a.samples;
  spec.seed = run.globals.seed.value_or(42);
  if (a.method == "tilted") {
    spec.method = LdpMethod::Tilted;
  } else if (a.method == "plain") {
    spec.method = LdpMethod::Plain;
  } else {
    throw ValidationError("--method must be 'tilted' or 'plain'");
  }
  if (a.spec_file) {
    std::ifstream f(*a.spec_file);
    if (!f) throw ValidationError("cannot read '" + *a.spec_file + "'");
    json j;
    try {
      j = json::parse(f);
      for (const auto& st : j.at("streams")) {
        spec.streams.push_back({st.at("rate").get<double>(), st.at("jump").get<JumpDistribution>(),
                                st.at("threshold").get<double>()});
      }
      if (j.contains("horizons")) spec.horizons = j.at("horizons").get<std::vector<double>>();
      if (j.contains("samples")) spec.samples = j.at("samples").get<std::int64_t>();
    } catch (const json::exception& e) {
      throw ValidationError(*a.spec_file + ": " + e.what());
    }
  } else {
    spec.streams.push_back({a.lambda, Exponential{a.jump_rate}, a.threshold});
  }
  if (spec.samples < 1) throw ValidationError("--samples must be positive");
  if (spec.horizons.empty()) throw ValidationError("at least one horizon is needed");

  const LdpReport report = run_ldp_report(spec);
  run.out() << "infimum " << report.limit.value << " at s* = " << report.limit.s_star << '\n';
  for (const auto& r : report.rows) {
    run.out() << "t = " << r.horizon << ": " << r.empirical << " (gap " << r.gap << ", " << r.exceedances
              << " exceedances" << (r.reliable ? "" : ", unreliable") << ")\n";
  }
  const fs::path dir = run.out_dir("results/ldp");
  write_ldp_csv(report, dir / "ldp.csv");
  json streams = json::array();
  for (const auto& st : spec.streams) {
    streams.push_back({{"rate", st.rate}, {"jump", st.jump}, {"threshold", st.threshold}});
  }
  run.manifest(dir, "ldp-check",
               {{"streams", streams},
                {"horizons", spec.horizons},
                {"samples", spec.samples},
                {"seed", spec.seed},
                {"method", a.method}});
  return 0;
}

int cmd_admit(const Runner& run, const std::optional<std::string>& file, const std::string& path, double epsilon,
              double gamma) {
  const Scenario s = run.resolve(file, default_experiment_1_scenario());
  const IncidenceMatrix inc = build_incidence(s.network);
  const TrafficStreamSet traffic = s.traffic();
  const GammaSpec g = GammaSpec::of(gamma);
  const auto table = build_operating_points(s.network, inc, traffic, g);
  const IncreaseVerdict verdict = check_increase(table, inc, traffic, path, epsilon);
  const json j = verdict;
  run.out() << j.dump(2) << '\n';
  const fs::path dir = run.out_dir(s.output_dir);
  write_json(j, dir / "admit.json");
  run.manifest(dir, "admit",
               {{"scenario", scenario_to_json(s)}, {"path", path}, {"epsilon", epsilon}, {"gamma", gamma}});
  return 0;
}

int cmd_chernoff(const Runner& run, const std::optional<std::string>& file, const std::optional<std::string>& arc_opt,
                 int points) {
  const Scenario s = run.resolve(file, default_experiment_1_scenario());
  const std::string arc = arc_opt.value_or(s.network.arcs().front().id);
  const IncidenceMatrix inc = build_incidence(s.network);
  const TrafficStreamSet traffic = s.traffic();
  const json analysis = minimize_exponent(s.network, inc, traffic, arc);
  run.out() << analysis.dump(2) << '\n';
  const fs::path dir = run.out_dir(s.output_dir);
  write_json(analysis, dir / "chernoff.json");
  if (points > 1) {
    std::ofstream f(dir / "chernoff_grid.csv");
    f << std::setprecision(12) << "s,exponent\n";
    for (const auto& [sv, fv] : exponent_grid(s.network, inc, traffic, arc, points)) f << sv << ',' << fv << '\n';
  }
  run.manifest(dir, "chernoff", {{"scenario", scenario_to_json(s)}, {"arc", arc}, {"points", points}});
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  Runner runner(args, out);

  CLI::App app{"Effective-bandwidth admission control for stochastic road traffic"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int reps = 0;
  std::string out_dir;
  auto* seed_opt = app.add_option("--seed", seed, "Base random seed");
  auto* reps_opt = app.add_option("--reps", reps, "Number of replications");
  auto* out_opt = app.add_option("--out-dir", out_dir, "Output directory");
  app.add_option("--threads", runner.globals.threads, "Worker threads (0 = all cores)");

  std::function<int()> action;
  std::optional<std::string> scenario_file;
  int trace_reps = 5;

  std::string sim_file;
  auto* sim = app.add_subcommand("simulate", "Run every policy of a scenario file");
  sim->add_option("scenario", sim_file, "Scenario JSON")->required();
  sim->add_option("--trace-reps", trace_reps, "Replications written to the trace CSV");
  sim->callback([&] { action = [&] { return cmd_simulate(runner, sim_file, trace_reps); }; });

  auto* exp1 = app.add_subcommand("exp1", "Single-link experiment");
  exp1->add_option("--scenario", scenario_file, "Scenario JSON (default: built-in)");
  exp1->add_option("--trace-reps", trace_reps, "Replications written to the trace CSV");
  exp1->callback([&] { action = [&] { return cmd_exp1(runner, scenario_file, trace_reps); }; });

  std::vector<int> m_values{5, 10, 20, 30};
  auto* exp2 = app.add_subcommand("exp2", "Linear-network experiment");
  exp2->add_option("--scenario", scenario_file, "Scenario JSON (default: built-in)");
  exp2->add_option("--m", m_values, "Numbers of links")->delimiter(',');
  exp2->add_option("--trace-reps", trace_reps, "Replications written to the trace CSV");
  exp2->callback([&] { action = [&] { return cmd_exp2(runner, scenario_file, m_values, trace_reps); }; });

  std::string policy_text;
  auto* maxrate = app.add_subcommand("maxrate", "Maximum admissible rate per path under a policy");
  maxrate->add_option("--scenario", scenario_file, "Scenario JSON (default: exp1)");
  maxrate->add_option("--policy", policy_text, "nc | en | rn:alpha=A | rn:gamma=G | eb:gamma=G[,gamma_map={..}]")
      ->required();
  maxrate->callback([&] { action = [&] { return cmd_maxrate(runner, scenario_file, policy_text); }; });

  ViolationArgs vargs;
  auto* viol = app.add_subcommand("violation-prob", "Monte Carlo estimate of P(Y > C) on an arc");
  viol->add_option("--scenario", scenario_file, "Scenario JSON (default: exp1)");
  viol->add_option("--arc", vargs.arc, "Arc id (default: first arc)");
  viol->add_option("--path", vargs.path, "Path whose rate --rate sets (default: first path)");
  viol->add_option("--rate", vargs.rate, "Mean rate of the path");
  viol->add_option("--samples", vargs.samples, "Monte Carlo samples");
  viol->add_option("--gamma", vargs.gamma, "Also report the EB verdict for this tolerance");
  viol->callback([&] { action = [&] { return cmd_violation(runner, scenario_file, vargs); }; });

  LdpArgs largs;
  auto* ldp = app.add_subcommand("ldp-check", "Convergence of (1/t) log P to the large-deviations rate");
  ldp->add_option("--spec", largs.spec_file, "JSON with streams [{rate, jump, threshold}], horizons, samples");
  ldp->add_option("--lambda", largs.lambda, "Arrival rate (single exponential stream)");
  ldp->add_option("--jump-rate", largs.jump_rate, "Rate of the exponential jumps");
  ldp->add_option("--threshold", largs.threshold, "Threshold c");
  ldp->add_option("--horizons", largs.horizons, "Horizons t")->delimiter(',');
  ldp->add_option("--samples", largs.samples, "Samples per horizon");
  ldp->add_option("--method", largs.method, "tilted | plain");
  ldp->callback([&] { action = [&] { return cmd_ldp(runner, largs); }; });

  std::string admit_path;
  double epsilon = 0.0;
  double admit_gamma = 4.0;
  auto* admit = app.add_subcommand("admit", "Half-space test for a relative rate increase");
  admit->add_option("--scenario", scenario_file, "Scenario JSON (default: exp1)");
  admit->add_option("--path", admit_path, "Path id")->required();
  admit->add_option("--epsilon", epsilon, "Relative increase")->required();
  admit->add_option("--gamma", admit_gamma, "Tolerance gamma");
  admit->callback([&] { action = [&] { return cmd_admit(runner, scenario_file, admit_path, epsilon, admit_gamma); }; });

  std::optional<std::string> chernoff_arc;
  int grid_points = 200;
  auto* chern = app.add_subcommand("chernoff", "Minimized Chernoff exponent on an arc, plus the exponent curve");
  chern->add_option("--scenario", scenario_file, "Scenario JSON (default: exp1)");
  chern->add_option("--arc", chernoff_arc, "Arc id (default: first arc)");
  chern->add_option("--grid", grid_points, "Points of the exponent curve CSV");
  chern->callback([&] { action = [&] { return cmd_chernoff(runner, scenario_file, chernoff_arc, grid_points); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help() << '\n' << scenario_schema_help();
    return 1;
  }

  if (*seed_opt) runner.globals.seed = seed;
  if (*reps_opt) runner.globals.reps = reps;
  if (*out_opt) runner.globals.out_dir = out_dir;

  try {
    return action();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n\n" << scenario_schema_help();
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace ebt
