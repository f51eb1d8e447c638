#pragma once

#include "ebtraffic/demand_curve.hpp"
#include "ebtraffic/jump_distribution.hpp"
#include "ebtraffic/network.hpp"
#include "ebtraffic/policies.hpp"
#include "ebtraffic/simulator.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ebt {

/// Network given as a template: `links` arcs in series, all with
/// `capacity` except the last one.
struct LinearTemplate {
  std::size_t links = 1;
  double capacity = 100.0;
  double last_capacity = 50.0;
};

struct StreamSpec {
  std::string path;
  double rate = 0.0;  // current mean rate, used by maxrate / admit / violation-prob
  JumpDistribution jump;
  DemandCurve demand;
};

struct Scenario {
  std::string name = "scenario";
  std::optional<LinearTemplate> linear;
  RoadNetwork network;
  std::vector<ServiceParams> service;  // per arc, network order
  std::vector<StreamSpec> streams;     // per path, network order
  std::vector<PolicySpec> policies;
  double delta = 1.0;
  double horizon = 240.0;
  int replications = 10000;
  std::uint64_t seed = 42;
  std::string output_dir = "results";

  TrafficStreamSet traffic() const;
  SimulationConfig simulation(const PolicySpec& policy) const;

  /// Same scenario on a linear network with `links` arcs; requires a
  /// linear template or a single-link network.
  Scenario with_linear_links(std::size_t links) const;
};

/// Field-level ValidationError on schema violations.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);

Scenario load_scenario(const std::filesystem::path& file);
void save_scenario(const Scenario& s, const std::filesystem::path& file);

bool operator==(const Scenario& a, const Scenario& b);

/// Human-readable description of the scenario file format.
std::string scenario_schema_help();

}  // namespace ebt
