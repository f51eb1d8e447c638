#pragma once

#include "ebtraffic/demand_curve.hpp"
#include "ebtraffic/jump_distribution.hpp"
#include "ebtraffic/network.hpp"
#include "ebtraffic/policies.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

namespace ebt {

/// Congestion-dependent service curve of one link, in per-minute units
/// (multiplied by the step size):
///   c(y) = y                              if y <= free_flow
///          max(floor, jam - y)            otherwise
/// `inflow_limit` caps what upstream links may push into this link per step.
struct ServiceParams {
  double free_flow = 50.0;
  double jam = 100.0;
  double floor = 10.0;
  double inflow_limit = 90.0;

  /// (C, 2C, 10, 2C - 10): (50, 100, 10, 90) and (100, 200, 10, 190) for
  /// the capacities used in the experiments.
  static ServiceParams for_capacity(double capacity);
  void validate() const;
};

double service_curve_single(double y, double delta, const ServiceParams& params = {});

/// Linear chain of links 1..m: c_m = c(y_m) and, backwards,
/// c_i = max(0, min(u_{i+1} - y_{i+1} + c_{i+1}, c(y_i))).
std::vector<double> service_curve_chain(std::span<const double> y, double delta,
                                        std::span<const ServiceParams> params);

/// Successor structure of the arcs, derived from the network's paths.
struct ArcTopology {
  std::vector<std::vector<std::size_t>> successors;
  std::vector<std::vector<std::size_t>> predecessors;
  std::vector<std::size_t> reverse_order;  // downstream arcs first

  /// Throws ValidationError if the successor relation has a cycle.
  static ArcTopology from(const RoadNetwork& network);
};

/// Service budgets for a general acyclic arc graph. Reduces to
/// service_curve_chain on a linear network; where several links feed one
/// successor, its headroom is shared in proportion to their queued need.
std::vector<double> service_budgets(const ArcTopology& topology, std::span<const double> y, double delta,
                                    std::span<const ServiceParams> params);

struct Vehicle {
  double need = 0.0;
  std::uint32_t path = 0;
  std::uint32_t hop = 0;  // index into the path's arc list
};

/// FCFS link queue served against a fluid budget; a partially served head
/// keeps its residual need.
class LinkQueue {
 public:
  void push(const Vehicle& v);
  /// Removes fully served vehicles in admission order and appends them to `departed`.
  void serve(double budget, std::vector<Vehicle>& departed);

  std::size_t size() const { return q_.size(); }
  bool empty() const { return q_.empty(); }
  double total_need() const { return total_; }
  double head_residual() const { return q_.empty() ? 0.0 : q_.front().need - head_served_; }
  const std::deque<Vehicle>& vehicles() const { return q_; }

 private:
  std::deque<Vehicle> q_;
  double head_served_ = 0.0;
  double total_ = 0.0;
};

struct ServeResult {
  std::vector<Vehicle> departed;
  LinkQueue queue;
};
ServeResult serve_queue(LinkQueue queue, double budget);

struct BufferUpdate {
  double admitted = 0.0;
  double buffer = 0.0;
};

/// admitted = min(cap, B + r), B' = B + r - admitted. Loads are per step.
BufferUpdate advance_buffer(double buffer, double demand, double cap);

/// Poisson(admitted_load) vehicles with independent capacity needs.
std::vector<double> admit_vehicles(double admitted_load, const JumpDistribution& jump, Rng& rng);

struct SimulationConfig {
  RoadNetwork network;
  std::vector<JumpDistribution> jumps;  // per path
  std::vector<DemandCurve> demand;      // per path
  std::vector<ServiceParams> service;   // per arc
  PolicySpec policy;
  double delta = 1.0;
  double horizon = 240.0;
  int replications = 1;
  std::uint64_t seed = 42;

  long steps() const;
  void validate() const;
};

/// The mean-demand side of a run. Buffers, caps and admitted loads do not
/// depend on the random vehicle draws, so they are computed once per config.
struct AdmissionPlan {
  double delta = 1.0;
  Eigen::MatrixXd demand;    // steps x paths, vehicles per step
  Eigen::MatrixXd cap;       // steps x paths, vehicles per minute (may be +inf)
  Eigen::MatrixXd admitted;  // steps x paths, vehicles per step
  Eigen::MatrixXd buffer;    // steps x paths, after the update

  long steps() const { return static_cast<long>(demand.rows()); }
};

/// Caps at step m use the admitted rates of step m - 1 as the current rates.
AdmissionPlan plan_admission(const SimulationConfig& config);

/// One replication. Per-step quantities are recorded after admission and
/// before service, the moment the service curves are evaluated.
struct Trace {
  int replication = 0;
  Eigen::VectorXd demand;          // total over paths
  Eigen::VectorXd buffer;          // total over paths
  Eigen::VectorXd admitted_load;   // total mean load admitted
  Eigen::VectorXd admitted;        // vehicles admitted
  Eigen::VectorXd departed;        // vehicles leaving the network
  Eigen::VectorXd in_network_end;  // vehicles queued after service
  Eigen::MatrixXd queue_count;     // steps x arcs
  Eigen::MatrixXd queued_need;     // steps x arcs
  Eigen::MatrixXd queue_violation; // steps x arcs: queued need > C delta
  Eigen::MatrixXd load_violation;  // steps x arcs: need admitted this step > C delta
  Eigen::VectorXd violations_cum;  // cumulative queue violations over all arcs

  long steps() const { return static_cast<long>(demand.size()); }
};

Trace run_replication(const SimulationConfig& config, const AdmissionPlan& plan, std::uint64_t seed,
                      int replication = 0);
Trace run_replication(const SimulationConfig& config, std::uint64_t seed);

struct SimulationReport {
  int replications = 0;
  double delta = 1.0;
  Eigen::VectorXd mean_demand;
  Eigen::VectorXd mean_buffer;
  Eigen::MatrixXd mean_queue_count;
  Eigen::MatrixXd mean_queued_need;
  Eigen::MatrixXd load_violation_prob;   // fraction of replications, per step and arc
  Eigen::MatrixXd queue_violation_prob;
  double avg_in_system = 0.0;            // L~
  double avg_arrival = 0.0;              // r~, per step
  double delay_proxy = 0.0;              // L~ / r~ * delta, minutes
  Eigen::VectorXd violation_step_fraction;  // per arc, over steps and replications
  Eigen::VectorXd peak_violation_prob;      // per arc, max over steps of load_violation_prob
  double mean_buffer_avg = 0.0;
  double max_buffer = 0.0;
};

/// Streaming reduction of traces; merge order is the caller's responsibility.
class ReportAccumulator {
 public:
  void add(const Trace& trace);
  void merge(const ReportAccumulator& other);
  SimulationReport finish(double delta) const;
  int count() const { return count_; }

 private:
  int count_ = 0;
  Eigen::VectorXd demand_, buffer_;
  Eigen::MatrixXd queue_count_, queued_need_, load_violation_, queue_violation_;
};

SimulationReport aggregate(std::span<const Trace> traces, double delta);

/// Runs config.replications replications (seed + index) across worker
/// threads; the result does not depend on the thread count.
SimulationReport simulate(const SimulationConfig& config, const AdmissionPlan& plan, unsigned threads = 0);
SimulationReport simulate(const SimulationConfig& config, unsigned threads = 0);

std::vector<Trace> run_replications(const SimulationConfig& config, const AdmissionPlan& plan);

}  // namespace ebt
