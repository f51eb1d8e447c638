#include "ebtraffic/experiments.hpp"

#include "ebtraffic/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ebt {
namespace {

std::ofstream open_output(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write '" + file.string() + "'");
  out << std::setprecision(12);
  return out;
}

}  // namespace

Scenario default_experiment_1_scenario() {
  Scenario s;
  s.name = "exp1";
  s.network = RoadNetwork({"n0", "n1"}, {{"a1", "n0", "n1", 50.0}}, {{"P1", {"a1"}, "n0", "n1"}});
  s.service = {ServiceParams::for_capacity(50.0)};
  s.streams = {{"P1", 0.0, cars_and_trucks(), rush_hour_curve()}};
  s.policies = {PolicySpec::nc(), PolicySpec::en(), PolicySpec::rn_from_gamma(4.0), PolicySpec::eb(GammaSpec::of(4.0))};
  s.delta = 1.0;
  s.horizon = 240.0;
  s.replications = 10000;
  s.seed = 42;
  s.output_dir = "results/exp1";
  return s;
}

Scenario default_experiment_2_scenario() {
  Scenario s = default_experiment_1_scenario().with_linear_links(5);
  s.name = "exp2";
  s.output_dir = "results/exp2";
  return s;
}

const ResultRow& ResultTable::row(const std::string& policy_label) const {
  for (const auto& r : rows) {
    if (r.policy == policy_label) return r;
  }
  throw LookupError("no row for policy '" + policy_label + "'");
}

ExperimentResult run_policies(const Scenario& scenario, const std::string& title, unsigned threads) {
  ExperimentResult out;
  out.table.title = title;
  out.table.links = scenario.network.arc_count();
  for (const auto& a : scenario.network.arcs()) out.table.arc_ids.push_back(a.id);
  for (const auto& policy : scenario.policies) {
    const SimulationConfig cfg = scenario.simulation(policy);
    PolicyRun run{policy, plan_admission(cfg), {}};
    run.report = simulate(cfg, run.plan, threads);

    ResultRow row;
    row.policy = policy.label();
    row.delay_proxy = run.report.delay_proxy;
    row.avg_in_system = run.report.avg_in_system;
    row.avg_arrival = run.report.avg_arrival;
    row.violation_step_fraction = run.report.violation_step_fraction;
    row.peak_violation_prob = run.report.peak_violation_prob;
    row.mean_buffer = run.report.mean_buffer_avg;
    row.max_buffer = run.report.max_buffer;
    out.table.rows.push_back(std::move(row));
    out.runs.push_back(std::move(run));
  }
  return out;
}

ExperimentResult run_experiment_1(const Scenario& scenario, unsigned threads) {
  if (scenario.network.arc_count() != 1 || scenario.network.path_count() != 1) {
    throw ValidationError("experiment 1 needs a single-link, single-path scenario");
  }
  return run_policies(scenario, "single link", threads);
}

std::vector<ExperimentResult> run_experiment_2(const Scenario& scenario, const std::vector<int>& m_values,
                                               unsigned threads) {
  std::vector<ExperimentResult> out;
  for (int m : m_values) {
    if (m < 1) throw ValidationError("m must be at least 1");
    out.push_back(run_policies(scenario.with_linear_links(static_cast<std::size_t>(m)),
                               "linear network, m = " + std::to_string(m), threads));
  }
  return out;
}

bool LdpReport::gaps_shrinking() const {
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (!(std::abs(rows[k].gap) < std::abs(rows[k - 1].gap))) return false;
  }
  return !rows.empty();
}

LdpReport run_ldp_report(const LdpReportSpec& spec) {
  LdpReport report;
  report.limit = ldp_theoretical_rate(spec.streams);
  Rng rng(spec.seed);
  for (const auto& s : ldp_empirical_rate(spec.streams, spec.horizons, spec.samples, rng, spec.method)) {
    LdpReportRow row;
    row.horizon = s.horizon;
    row.empirical = s.value;
    row.theoretical = report.limit.value;
    row.gap = s.value - report.limit.value;
    row.exceedances = s.exceedances;
    row.reliable = s.reliable;
    report.rows.push_back(row);
  }
  return report;
}

void write_table_csv(const ResultTable& table, const std::filesystem::path& file) {
  auto out = open_output(file);
  out << "policy,delay_proxy_min,avg_in_system,avg_arrival,mean_buffer,max_buffer";
  for (const auto& a : table.arc_ids) out << ",violation_fraction_" << a;
  for (const auto& a : table.arc_ids) out << ",peak_violation_prob_" << a;
  out << '\n';
  for (const auto& r : table.rows) {
    out << r.policy << ',' << r.delay_proxy << ',' << r.avg_in_system << ',' << r.avg_arrival << ',' << r.mean_buffer
        << ',' << r.max_buffer;
    for (double v : r.violation_step_fraction) out << ',' << v;
    for (double v : r.peak_violation_prob) out << ',' << v;
    out << '\n';
  }
}

nlohmann::json table_to_json(const ResultTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    nlohmann::json viol, peak;
    for (std::size_t j = 0; j < table.arc_ids.size(); ++j) {
      viol[table.arc_ids[j]] = r.violation_step_fraction[static_cast<Eigen::Index>(j)];
      peak[table.arc_ids[j]] = r.peak_violation_prob[static_cast<Eigen::Index>(j)];
    }
    rows.push_back({{"policy", r.policy},
                    {"delay_proxy_min", r.delay_proxy},
                    {"avg_in_system", r.avg_in_system},
                    {"avg_arrival", r.avg_arrival},
                    {"mean_buffer", r.mean_buffer},
                    {"max_buffer", r.max_buffer},
                    {"violation_step_fraction", viol},
                    {"peak_violation_prob", peak}});
  }
  return {{"title", table.title}, {"links", table.links}, {"rows", rows}};
}

void write_time_series_csv(const PolicyRun& run, const std::vector<std::string>& arc_ids,
                           const std::filesystem::path& file) {
  auto out = open_output(file);
  const auto& r = run.report;
  out << "t,demand,cap,admitted_load,mean_buffer";
  for (const auto& a : arc_ids) out << ",mean_queue_count_" << a;
  for (const auto& a : arc_ids) out << ",mean_queued_need_" << a;
  for (const auto& a : arc_ids) out << ",load_violation_prob_" << a;
  for (const auto& a : arc_ids) out << ",queue_violation_prob_" << a;
  out << '\n';
  for (Eigen::Index m = 0; m < r.mean_demand.size(); ++m) {
    out << r.delta * static_cast<double>(m + 1) << ',' << run.plan.demand.row(m).sum() << ','
        << run.plan.cap.row(m).minCoeff() << ',' << run.plan.admitted.row(m).sum() << ',' << r.mean_buffer[m];
    for (const auto* mat : {&r.mean_queue_count, &r.mean_queued_need, &r.load_violation_prob, &r.queue_violation_prob}) {
      for (Eigen::Index j = 0; j < mat->cols(); ++j) out << ',' << (*mat)(m, j);
    }
    out << '\n';
  }
}

void write_traces_csv(std::span<const Trace> traces, double delta, const std::filesystem::path& file) {
  auto out = open_output(file);
  const Eigen::Index J = traces.empty() ? 0 : traces.front().queue_count.cols();
  out << "replication,t,buffer";
  for (Eigen::Index j = 0; j < J; ++j) out << ",queue_count_link_" << j + 1;
  for (Eigen::Index j = 0; j < J; ++j) out << ",queued_need_link_" << j + 1;
  out << ",admitted,violations_cum\n";
  for (const auto& tr : traces) {
    for (Eigen::Index m = 0; m < tr.demand.size(); ++m) {
      out << tr.replication << ',' << delta * static_cast<double>(m + 1) << ',' << tr.buffer[m];
      for (Eigen::Index j = 0; j < J; ++j) out << ',' << tr.queue_count(m, j);
      for (Eigen::Index j = 0; j < J; ++j) out << ',' << tr.queued_need(m, j);
      out << ',' << tr.admitted[m] << ',' << tr.violations_cum[m] << '\n';
    }
  }
}

void write_ldp_csv(const LdpReport& report, const std::filesystem::path& file) {
  auto out = open_output(file);
  out << "t,empirical_rate,theoretical_rate,gap,exceedances,reliable\n";
  for (const auto& r : report.rows) {
    out << r.horizon << ',' << r.empirical << ',' << r.theoretical << ',' << r.gap << ',' << r.exceedances << ','
        << (r.reliable ? 1 : 0) << '\n';
  }
}

std::string format_table(const ResultTable& table) {
  std::ostringstream os;
  os << table.title << '\n';
  os << std::left << std::setw(12) << "policy" << std::right << std::setw(12) << "delay[min]" << std::setw(12)
     << "L~" << std::setw(12) << "buffer" << std::setw(12) << "max buf";
  for (const auto& a : table.arc_ids) {
    if (table.arc_ids.size() <= 5 || &a == &table.arc_ids.back()) os << std::setw(12) << ("viol " + a);
  }
  os << '\n' << std::fixed << std::setprecision(4);
  for (const auto& r : table.rows) {
    os << std::left << std::setw(12) << r.policy << std::right << std::setw(12) << r.delay_proxy << std::setw(12)
       << r.avg_in_system << std::setw(12) << r.mean_buffer << std::setw(12) << r.max_buffer;
    for (std::size_t j = 0; j < table.arc_ids.size(); ++j) {
      if (table.arc_ids.size() <= 5 || j + 1 == table.arc_ids.size()) {
        os << std::setw(12) << r.violation_step_fraction[static_cast<Eigen::Index>(j)];
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace ebt
