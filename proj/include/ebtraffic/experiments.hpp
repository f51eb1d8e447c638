#pragma once

#include "ebtraffic/compound_poisson.hpp"
#include "ebtraffic/scenario.hpp"
#include "ebtraffic/simulator.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ebt {

/// Single link, C = 50, cars/trucks needs, rush-hour demand, delta = 1,
/// policies NC, EN, RN(alpha_4), EB(4).
Scenario default_experiment_1_scenario();

/// Linear template (capacity 100, last link 50) with the experiment-1 stream.
Scenario default_experiment_2_scenario();

struct ResultRow {
  std::string policy;
  double delay_proxy = 0.0;
  double avg_in_system = 0.0;
  double avg_arrival = 0.0;
  Eigen::VectorXd violation_step_fraction;  // per arc
  Eigen::VectorXd peak_violation_prob;      // per arc
  double mean_buffer = 0.0;
  double max_buffer = 0.0;
};

struct ResultTable {
  std::string title;
  std::size_t links = 0;
  std::vector<std::string> arc_ids;
  std::vector<ResultRow> rows;

  const ResultRow& row(const std::string& policy_label) const;
};

struct PolicyRun {
  PolicySpec policy;
  AdmissionPlan plan;
  SimulationReport report;
};

struct ExperimentResult {
  ResultTable table;
  std::vector<PolicyRun> runs;  // same order as table.rows
};

/// Runs every policy of the scenario on its network.
ExperimentResult run_policies(const Scenario& scenario, const std::string& title, unsigned threads = 0);

/// Requires a single-link, single-path scenario.
ExperimentResult run_experiment_1(const Scenario& scenario, unsigned threads = 0);

/// One table per m, on the scenario's linear template.
std::vector<ExperimentResult> run_experiment_2(const Scenario& scenario, const std::vector<int>& m_values,
                                               unsigned threads = 0);

struct LdpReportSpec {
  std::vector<LdpStream> streams;
  std::vector<double> horizons{10.0, 20.0, 40.0, 80.0};
  std::int64_t samples = 1000000;
  std::uint64_t seed = 42;
  LdpMethod method = LdpMethod::Tilted;
};

struct LdpReportRow {
  double horizon = 0.0;
  double empirical = 0.0;
  double theoretical = 0.0;
  double gap = 0.0;  // empirical - theoretical
  std::int64_t exceedances = 0;
  bool reliable = false;
};

struct LdpReport {
  LdpLimit limit;
  std::vector<LdpReportRow> rows;

  /// |gap| strictly decreasing along the horizons.
  bool gaps_shrinking() const;
};

LdpReport run_ldp_report(const LdpReportSpec& spec);

// Output writers.
void write_table_csv(const ResultTable& table, const std::filesystem::path& file);
nlohmann::json table_to_json(const ResultTable& table);
/// Replication-averaged per-step series of one policy run: demand, cap,
/// admitted load, buffer, queue counts and needs, violation probabilities.
void write_time_series_csv(const PolicyRun& run, const std::vector<std::string>& arc_ids,
                           const std::filesystem::path& file);
/// Columns: replication, t, buffer, queue_count_link_1..m, queued_need_link_1..m,
/// admitted, violations_cum.
void write_traces_csv(std::span<const Trace> traces, double delta, const std::filesystem::path& file);
void write_ldp_csv(const LdpReport& report, const std::filesystem::path& file);

/// Text table for terminal output.
std::string format_table(const ResultTable& table);

}  // namespace ebt
