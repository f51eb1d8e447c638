#include "ebtraffic/simulator.hpp"

#include "ebtraffic/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace ebt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kChunk = 64;

void budgets_into(const ArcTopology& topo, std::span<const double> y, double delta,
                  std::span<const ServiceParams> params, std::vector<double>& c) {
  c.assign(y.size(), 0.0);
  for (std::size_t i : topo.reverse_order) {
    double limit = kInf;
    for (std::size_t j : topo.successors[i]) {
      const double headroom = std::max(0.0, params[j].inflow_limit * delta - y[j] + c[j]);
      double share = 1.0;
      const auto& preds = topo.predecessors[j];
      if (preds.size() > 1) {
        double total = 0.0;
        for (std::size_t p : preds) total += y[p];
        share = total > 0.0 ? y[i] / total : 1.0 / static_cast<double>(preds.size());
      }
      limit = std::min(limit, headroom * share);
    }
    c[i] = std::max(0.0, std::min(limit, service_curve_single(y[i], delta, params[i])));
  }
}

}  // namespace

ServiceParams ServiceParams::for_capacity(double capacity) {
  return {capacity, 2.0 * capacity, 10.0, 2.0 * capacity - 10.0};
}

void ServiceParams::validate() const {
  if (!(free_flow > 0.0) || !(jam >= free_flow) || !(floor > 0.0) || !(inflow_limit > 0.0)) {
    throw ValidationError("service curve needs free_flow > 0, jam >= free_flow, floor > 0, inflow_limit > 0");
  }
}

double service_curve_single(double y, double delta, const ServiceParams& params) {
  if (y <= params.free_flow * delta) return y;
  return std::max(params.floor * delta, params.jam * delta - y);
}

std::vector<double> service_curve_chain(std::span<const double> y, double delta,
                                        std::span<const ServiceParams> params) {
  if (y.size() != params.size()) throw ValidationError("one service curve per link required");
  ArcTopology topo;
  const std::size_t m = y.size();
  topo.successors.resize(m);
  topo.predecessors.resize(m);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    topo.successors[i].push_back(i + 1);
    topo.predecessors[i + 1].push_back(i);
  }
  for (std::size_t i = m; i-- > 0;) topo.reverse_order.push_back(i);
  std::vector<double> c;
  budgets_into(topo, y, delta, params, c);
  return c;
}

ArcTopology ArcTopology::from(const RoadNetwork& network) {
  const std::size_t J = network.arc_count();
  ArcTopology t;
  t.successors.resize(J);
  t.predecessors.resize(J);
  for (std::size_t p = 0; p < network.path_count(); ++p) {
    const auto arcs = network.path_arc_indices(p);
    for (std::size_t k = 0; k + 1 < arcs.size(); ++k) {
      auto& succ = t.successors[arcs[k]];
      if (std::find(succ.begin(), succ.end(), arcs[k + 1]) == succ.end()) {
        succ.push_back(arcs[k + 1]);
        t.predecessors[arcs[k + 1]].push_back(arcs[k]);
      }
    }
  }
  // Kahn's algorithm from the sinks backwards.
  std::vector<std::size_t> remaining(J);
  std::vector<std::size_t> ready;
  for (std::size_t j = 0; j < J; ++j) {
    remaining[j] = t.successors[j].size();
    if (remaining[j] == 0) ready.push_back(j);
  }
  std::reverse(ready.begin(), ready.end());
  while (!ready.empty()) {
    const std::size_t j = ready.back();
    ready.pop_back();
    t.reverse_order.push_back(j);
    for (std::size_t p : t.predecessors[j]) {
      if (--remaining[p] == 0) ready.push_back(p);
    }
  }
  if (t.reverse_order.size() != J) throw ValidationError("arc successor relation contains a cycle");
  return t;
}

std::vector<double> service_budgets(const ArcTopology& topology, std::span<const double> y, double delta,
                                    std::span<const ServiceParams> params) {
  std::vector<double> c;
  budgets_into(topology, y, delta, params, c);
  return c;
}

void LinkQueue::push(const Vehicle& v) {
  q_.push_back(v);
  total_ += v.need;
}

void LinkQueue::serve(double budget, std::vector<Vehicle>& departed) {
  while (budget > 0.0 && !q_.empty()) {
    const double residual = q_.front().need - head_served_;
    if (residual <= budget * (1.0 + 1e-12) + 1e-12) {
      budget -= residual;
      total_ -= residual;
      departed.push_back(q_.front());
      q_.pop_front();
      head_served_ = 0.0;
    } else {
      head_served_ += budget;
      total_ -= budget;
      budget = 0.0;
    }
  }
  if (q_.empty()) total_ = 0.0;  // drop accumulated rounding
}

ServeResult serve_queue(LinkQueue queue, double budget) {
  if (!(budget >= 0.0)) throw ValidationError("service budget must be non-negative");
  ServeResult r;
  queue.serve(budget, r.departed);
  r.queue = std::move(queue);
  return r;
}

BufferUpdate advance_buffer(double buffer, double demand, double cap) {
  const double offered = buffer + demand;
  const double admitted = std::min(cap, offered);
  return {admitted, offered - admitted};
}

std::vector<double> admit_vehicles(double admitted_load, const JumpDistribution& jump, Rng& rng) {
  std::vector<double> needs;
  if (!(admitted_load > 0.0)) return needs;
  const auto n = std::poisson_distribution<long long>(admitted_load)(rng);
  needs.reserve(static_cast<std::size_t>(n));
  for (long long k = 0; k < n; ++k) needs.push_back(jump.sample(rng));
  return needs;
}

long SimulationConfig::steps() const { return std::lround(horizon / delta); }

void SimulationConfig::validate() const {
  if (!(delta > 0.0)) throw ValidationError("delta must be positive");
  if (!(horizon > 0.0)) throw ValidationError("horizon must be positive");
  if (std::abs(horizon / delta - static_cast<double>(steps())) > 1e-9 * static_cast<double>(steps()) ||
      steps() < 1) {
    throw ValidationError("delta must divide the horizon");
  }
  if (replications < 1) throw ValidationError("replications must be at least 1");
  if (jumps.size() != network.path_count() || demand.size() != network.path_count()) {
    throw ValidationError("one jump distribution and one demand curve per path required");
  }
  for (std::size_t i = 0; i < demand.size(); ++i) {
    if (demand[i].horizon() < horizon * (1.0 - 1e-12)) {
      throw ValidationError("demand curve of path '" + network.paths()[i].id + "' ends before the horizon");
    }
  }
  if (service.size() != network.arc_count()) throw ValidationError("one service curve per arc required");
  for (const auto& s : service) s.validate();
  policy.validate();
  ArcTopology::from(network);
}

AdmissionPlan plan_admission(const SimulationConfig& config) {
  config.validate();
  const long N = config.steps();
  const auto I = static_cast<Eigen::Index>(config.network.path_count());
  const IncidenceMatrix inc = build_incidence(config.network);

  AdmissionPlan plan;
  plan.delta = config.delta;
  plan.demand.resize(N, I);
  plan.cap.resize(N, I);
  plan.admitted.resize(N, I);
  plan.buffer.resize(N, I);

  TrafficStreamSet current(Eigen::VectorXd::Zero(I), config.jumps);
  Eigen::VectorXd buffer = Eigen::VectorXd::Zero(I);
  for (long m = 0; m < N; ++m) {
    const RateCap cap = policy_cap(config.policy, config.network, inc, current);
    for (Eigen::Index i = 0; i < I; ++i) {
      const double d = step_demand(config.demand[static_cast<std::size_t>(i)], m + 1, config.delta);
      const BufferUpdate u = advance_buffer(buffer[i], d, cap.path[i] * config.delta);
      plan.demand(m, i) = d;
      plan.cap(m, i) = cap.path[i];
      plan.admitted(m, i) = u.admitted;
      plan.buffer(m, i) = u.buffer;
      buffer[i] = u.buffer;
      current.rates[i] = u.admitted / config.delta;
    }
  }
  return plan;
}

Trace run_replication(const SimulationConfig& config, const AdmissionPlan& plan, std::uint64_t seed,
                      int replication) {
  const long N = plan.steps();
  const std::size_t I = config.network.path_count();
  const std::size_t J = config.network.arc_count();
  const double delta = config.delta;
  const ArcTopology topo = ArcTopology::from(config.network);

  std::vector<std::vector<std::size_t>> route(I);
  for (std::size_t i = 0; i < I; ++i) route[i] = config.network.path_arc_indices(i);
  std::vector<double> cap_step(J);
  for (std::size_t j = 0; j < J; ++j) cap_step[j] = config.network.arcs()[j].capacity * delta;

  Trace tr;
  tr.replication = replication;
  tr.demand = plan.demand.rowwise().sum();
  tr.buffer = plan.buffer.rowwise().sum();
  tr.admitted_load = plan.admitted.rowwise().sum();
  tr.admitted.setZero(N);
  tr.departed.setZero(N);
  tr.in_network_end.setZero(N);
  tr.violations_cum.setZero(N);
  tr.queue_count.setZero(N, static_cast<Eigen::Index>(J));
  tr.queued_need.setZero(N, static_cast<Eigen::Index>(J));
  tr.queue_violation.setZero(N, static_cast<Eigen::Index>(J));
  tr.load_violation.setZero(N, static_cast<Eigen::Index>(J));

  Rng rng(seed);
  std::vector<LinkQueue> queues(J);
  std::vector<double> y(J), budgets, arc_load(J);
  std::vector<std::vector<Vehicle>> departures(J);
  double in_network = 0.0;
  double violations = 0.0;

  for (long m = 0; m < N; ++m) {
    std::fill(arc_load.begin(), arc_load.end(), 0.0);
    double admitted_now = 0.0;
    for (std::size_t i = 0; i < I; ++i) {
      const double load = plan.admitted(m, static_cast<Eigen::Index>(i));
      if (!(load > 0.0)) continue;
      const auto n = std::poisson_distribution<long long>(load)(rng);
      const JumpDistribution& jump = config.jumps[i];
      double path_need = 0.0;
      LinkQueue& entry = queues[route[i].front()];
      for (long long k = 0; k < n; ++k) {
        const double need = jump.sample(rng);
        path_need += need;
        entry.push({need, static_cast<std::uint32_t>(i), 0});
      }
      for (std::size_t j : route[i]) arc_load[j] += path_need;
      admitted_now += static_cast<double>(n);
    }
    in_network += admitted_now;
    tr.admitted[m] = admitted_now;

    for (std::size_t j = 0; j < J; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      y[j] = queues[j].total_need();
      tr.queue_count(m, col) = static_cast<double>(queues[j].size());
      tr.queued_need(m, col) = y[j];
      if (y[j] > cap_step[j]) {
        tr.queue_violation(m, col) = 1.0;
        violations += 1.0;
      }
      if (arc_load[j] > cap_step[j]) tr.load_violation(m, col) = 1.0;
    }
    tr.violations_cum[m] = violations;

    budgets_into(topo, y, delta, config.service, budgets);
    for (std::size_t j = 0; j < J; ++j) {
      departures[j].clear();
      queues[j].serve(budgets[j], departures[j]);
    }
    double left = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      for (Vehicle v : departures[j]) {
        const auto& r = route[v.path];
        if (++v.hop < r.size()) {
          queues[r[v.hop]].push(v);
        } else {
          left += 1.0;
        }
      }
    }
    in_network -= left;
    tr.departed[m] = left;
    tr.in_network_end[m] = in_network;
  }
  return tr;
}

Trace run_replication(const SimulationConfig& config, std::uint64_t seed) {
  return run_replication(config, plan_admission(config), seed);
}

void ReportAccumulator::add(const Trace& t) {
  if (count_ == 0) {
    demand_ = t.demand;
    buffer_ = t.buffer;
    queue_count_ = t.queue_count;
    queued_need_ = t.queued_need;
    load_violation_ = t.load_violation;
    queue_violation_ = t.queue_violation;
  } else {
    demand_ += t.demand;
    buffer_ += t.buffer;
    queue_count_ += t.queue_count;
    queued_need_ += t.queued_need;
    load_violation_ += t.load_violation;
    queue_violation_ += t.queue_violation;
  }
  ++count_;
}

void ReportAccumulator::merge(const ReportAccumulator& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  demand_ += other.demand_;
  buffer_ += other.buffer_;
  queue_count_ += other.queue_count_;
  queued_need_ += other.queued_need_;
  load_violation_ += other.load_violation_;
  queue_violation_ += other.queue_violation_;
  count_ += other.count_;
}

SimulationReport ReportAccumulator::finish(double delta) const {
  if (count_ == 0) throw ValidationError("cannot aggregate an empty set of traces");
  const double n = count_;
  SimulationReport r;
  r.replications = count_;
  r.delta = delta;
  r.mean_demand = demand_ / n;
  r.mean_buffer = buffer_ / n;
  r.mean_queue_count = queue_count_ / n;
  r.mean_queued_need = queued_need_ / n;
  r.load_violation_prob = load_violation_ / n;
  r.queue_violation_prob = queue_violation_ / n;

  const double steps = static_cast<double>(r.mean_demand.size());
  r.avg_in_system = (r.mean_buffer.sum() + r.mean_queue_count.sum()) / steps;
  r.avg_arrival = r.mean_demand.sum() / steps;
  r.delay_proxy = r.avg_arrival > 0.0 ? r.avg_in_system / r.avg_arrival * delta : 0.0;
  r.violation_step_fraction = r.queue_violation_prob.colwise().mean().transpose();
  r.peak_violation_prob = r.load_violation_prob.colwise().maxCoeff().transpose();
  r.mean_buffer_avg = r.mean_buffer.mean();
  r.max_buffer = r.mean_buffer.maxCoeff();
  return r;
}

SimulationReport aggregate(std::span<const Trace> traces, double delta) {
  // Same chunked reduction as simulate(), so both give identical bits.
  ReportAccumulator total;
  for (std::size_t c = 0; c < traces.size(); c += kChunk) {
    ReportAccumulator acc;
    for (std::size_t r = c; r < std::min(traces.size(), c + kChunk); ++r) acc.add(traces[r]);
    total.merge(acc);
  }
  return total.finish(delta);
}

SimulationReport simulate(const SimulationConfig& config, const AdmissionPlan& plan, unsigned threads) {
  const int reps = config.replications;
  const int chunks = (reps + kChunk - 1) / kChunk;
  std::vector<ReportAccumulator> partial(static_cast<std::size_t>(chunks));
  std::atomic<int> next{0};

  auto worker = [&] {
    for (int c = next++; c < chunks; c = next++) {
      auto& acc = partial[static_cast<std::size_t>(c)];
      for (int r = c * kChunk; r < std::min(reps, (c + 1) * kChunk); ++r) {
        acc.add(run_replication(config, plan, config.seed + static_cast<std::uint64_t>(r), r));
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(chunks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  ReportAccumulator total;
  for (const auto& p : partial) total.merge(p);
  return total.finish(config.delta);
}

SimulationReport simulate(const SimulationConfig& config, unsigned threads) {
  return simulate(config, plan_admission(config), threads);
}

std::vector<Trace> run_replications(const SimulationConfig& config, const AdmissionPlan& plan) {
  std::vector<Trace> out;
  out.reserve(static_cast<std::size_t>(config.replications));
  for (int r = 0; r < config.replications; ++r) {
    out.push_back(run_replication(config, plan, config.seed + static_cast<std::uint64_t>(r), r));
  }
  return out;
}

}  // namespace ebt
