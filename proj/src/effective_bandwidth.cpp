#include "ebtraffic/effective_bandwidth.hpp"

#include "ebtraffic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ebt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Stay clear of the relative pole guard inside JumpDistribution::mgf.
constexpr double kEdge = 1.0 - 2e-9;

std::vector<StreamTerm> active_terms(std::span<const StreamTerm> terms) {
  std::vector<StreamTerm> out;
  for (const auto& t : terms) {
    if (t.rate < 0.0 || !std::isfinite(t.rate)) throw ValidationError("stream rates must be finite and non-negative");
    if (t.rate > 0.0) out.push_back(t);
  }
  return out;
}

}  // namespace

double effective_bandwidth_alpha(const JumpDistribution& dist, double s) {
  if (s == 0.0) return dist.mean();
  if (s < 0.0) throw DomainError("effective bandwidth needs s >= 0", dist.s_max());
  return (dist.mgf(s) - 1.0) / s;
}

double telecom_alpha(const JumpDistribution& dist, double s) {
  if (s == 0.0) return dist.mean();
  if (s < 0.0) throw DomainError("effective bandwidth needs s >= 0", dist.s_max());
  return std::log(dist.mgf(s)) / s;
}

double common_s_max(std::span<const StreamTerm> terms) {
  double s = kInf;
  for (const auto& t : terms) {
    if (t.rate > 0.0) s = std::min(s, t.jump->s_max());
  }
  return s;
}

double compound_exponent(std::span<const StreamTerm> terms, double capacity, double s) {
  double f = -s * capacity;
  for (const auto& t : terms) {
    if (t.rate > 0.0) f += t.rate * (t.jump->mgf(s) - 1.0);
  }
  return f;
}

double compound_exponent_derivative(std::span<const StreamTerm> terms, double capacity, double s) {
  double d = -capacity;
  for (const auto& t : terms) {
    if (t.rate > 0.0) d += t.rate * t.jump->mgf_derivative(s);
  }
  return d;
}

std::string to_string(OptimumKind kind) {
  switch (kind) {
    case OptimumKind::Interior: return "interior";
    case OptimumKind::BoundaryZero: return "boundary_zero";
    case OptimumKind::BoundarySmax: return "boundary_smax";
  }
  return "unknown";
}

ExponentMinimum minimize_compound_exponent(std::span<const StreamTerm> terms, double capacity) {
  const auto active = active_terms(terms);

  double mean_load = 0.0;
  for (const auto& t : active) mean_load += t.rate * t.jump->mean();
  if (mean_load >= capacity) return {0.0, 0.0, OptimumKind::BoundaryZero};

  if (active.empty()) {
    // No traffic: f(s) = -s C decreases on the whole domain of the contributing laws.
    double pole = kInf;
    for (const auto& t : terms) pole = std::min(pole, t.jump->s_max());
    return {pole, std::isfinite(pole) ? -pole * capacity : -kInf, OptimumKind::BoundarySmax};
  }

  const double pole = common_s_max(active);
  double lo = 0.0;
  double hi;
  if (std::isfinite(pole)) {
    hi = pole * kEdge;
    if (compound_exponent_derivative(active, capacity, hi) <= 0.0) {
      return {hi, compound_exponent(active, capacity, hi), OptimumKind::BoundarySmax};
    }
  } else {
    bool all_zero = std::all_of(active.begin(), active.end(),
                                [](const StreamTerm& t) { return t.jump->support_max() == 0.0; });
    if (all_zero) return {kInf, -kInf, OptimumKind::BoundarySmax};
    hi = 1.0;
    while (compound_exponent_derivative(active, capacity, hi) <= 0.0) {
      lo = hi;
      hi *= 2.0;
    }
  }

  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double d = compound_exponent_derivative(active, capacity, mid);
    if (std::abs(d) <= 1e-9 * capacity || hi - lo <= 1e-12) break;
    (d < 0.0 ? lo : hi) = mid;
  }
  return {mid, compound_exponent(active, capacity, mid), OptimumKind::Interior};
}

std::vector<StreamTerm> arc_terms(const IncidenceMatrix& incidence, const TrafficStreamSet& streams,
                                  Eigen::Index arc) {
  std::vector<StreamTerm> terms;
  for (Eigen::Index i : contributing_paths(incidence, arc)) {
    terms.push_back({streams.rates[i], &streams.jumps[static_cast<std::size_t>(i)]});
  }
  return terms;
}

double chernoff_exponent(const RoadNetwork& network, const IncidenceMatrix& incidence,
                         const TrafficStreamSet& streams, const std::string& arc_id, double s) {
  const auto terms = arc_terms(incidence, streams, incidence.arc_column(arc_id));
  return compound_exponent(terms, network.arc(arc_id).capacity, s);
}

ChernoffAnalysis minimize_exponent(const RoadNetwork& network, const IncidenceMatrix& incidence,
                                   const TrafficStreamSet& streams, const std::string& arc_id) {
  const Eigen::Index j = incidence.arc_column(arc_id);
  const auto terms = arc_terms(incidence, streams, j);
  const ExponentMinimum m = minimize_compound_exponent(terms, network.arc(arc_id).capacity);

  ChernoffAnalysis a;
  a.arc_id = arc_id;
  a.s_star = m.s_star;
  a.exponent = m.exponent;
  a.bound = std::exp(m.exponent);
  a.kind = m.kind;
  for (Eigen::Index i : contributing_paths(incidence, j)) {
    const auto& d = streams.jumps[static_cast<std::size_t>(i)];
    double alpha = kInf;
    if (std::isfinite(m.s_star) && m.s_star < d.s_max() * kEdge) alpha = effective_bandwidth_alpha(d, m.s_star);
    a.alphas[incidence.path_ids[static_cast<std::size_t>(i)]] = alpha;
  }
  return a;
}

GammaSpec GammaSpec::of(double gamma) {
  GammaSpec g;
  g.uniform = gamma;
  g.validate();
  return g;
}

void GammaSpec::validate() const {
  if (uniform && !(*uniform > 0.0)) throw ValidationError("gamma must be positive");
  for (const auto& [arc, g] : per_arc) {
    if (!(g > 0.0)) throw ValidationError("gamma for arc '" + arc + "' must be positive");
  }
  if (!uniform && per_arc.empty()) throw ValidationError("gamma specification is empty");
}

double GammaSpec::for_arc(const std::string& arc_id) const {
  if (auto it = per_arc.find(arc_id); it != per_arc.end()) return it->second;
  if (uniform) return *uniform;
  throw ValidationError("no gamma given for arc '" + arc_id + "'");
}

std::vector<ArcVerdict> admissible(const RoadNetwork& network, const IncidenceMatrix& incidence,
                                   const TrafficStreamSet& streams, const GammaSpec& gamma) {
  gamma.validate();
  std::vector<ArcVerdict> out;
  for (const auto& arc : network.arcs()) {
    ArcVerdict v;
    v.arc_id = arc.id;
    v.gamma = gamma.for_arc(arc.id);
    v.analysis = minimize_exponent(network, incidence, streams, arc.id);
    v.admissible = v.analysis.exponent <= -v.gamma;
    out.push_back(std::move(v));
  }
  return out;
}

const OperatingPoint& OperatingPointTable::at(const std::string& arc_id) const {
  auto it = std::find_if(points.begin(), points.end(), [&](const OperatingPoint& p) { return p.arc_id == arc_id; });
  if (it == points.end()) throw LookupError("unknown arc '" + arc_id + "'");
  return *it;
}

OperatingPointTable build_operating_points(const RoadNetwork& network, const IncidenceMatrix& incidence,
                                           const TrafficStreamSet& streams, const GammaSpec& gamma,
                                           double built_at) {
  gamma.validate();
  OperatingPointTable table;
  table.built_at = built_at;
  for (const auto& arc : network.arcs()) {
    const Eigen::Index j = incidence.arc_column(arc.id);
    const auto terms = arc_terms(incidence, streams, j);
    const ExponentMinimum m = minimize_compound_exponent(terms, arc.capacity);

    OperatingPoint p;
    p.arc_id = arc.id;
    p.gamma = gamma.for_arc(arc.id);
    p.capacity = arc.capacity;
    p.alphas = Eigen::VectorXd::Zero(incidence.paths());
    switch (m.kind) {
      case OptimumKind::BoundarySmax:
        p.status = OperatingPoint::Status::Idle;
        p.threshold = arc.capacity;
        break;
      case OptimumKind::BoundaryZero:
        p.status = OperatingPoint::Status::Overload;
        p.threshold = -kInf;
        break;
      case OptimumKind::Interior:
        p.status = OperatingPoint::Status::Active;
        p.s = m.s_star;
        p.threshold = arc.capacity - p.gamma / p.s;
        for (Eigen::Index i : contributing_paths(incidence, j)) {
          const auto& d = streams.jumps[static_cast<std::size_t>(i)];
          p.alphas[i] = p.s < d.s_max() * kEdge ? effective_bandwidth_alpha(d, p.s) : kInf;
        }
        break;
    }
    table.points.push_back(std::move(p));
  }
  return table;
}

IncreaseVerdict check_increase(const OperatingPointTable& table, const IncidenceMatrix& incidence,
                               const TrafficStreamSet& streams, const std::string& path_id, double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be non-negative");
  const Eigen::Index k = incidence.path_row(path_id);

  IncreaseVerdict v;
  v.accepted = true;
  for (const auto& p : table.points) {
    const Eigen::Index j = incidence.arc_column(p.arc_id);
    ArcSlack s;
    s.arc_id = p.arc_id;
    s.threshold = p.threshold;
    if (p.status == OperatingPoint::Status::Active) {
      for (Eigen::Index i = 0; i < incidence.paths(); ++i) {
        if (incidence.uses(i, j) && streams.rates[i] > 0.0) s.load += streams.rates[i] * p.alphas[i];
      }
      if (incidence.uses(k, j) && streams.rates[k] > 0.0) s.load += epsilon * streams.rates[k] * p.alphas[k];
    }
    s.slack = s.threshold - s.load;
    s.passes = p.status != OperatingPoint::Status::Overload && s.slack >= 0.0;
    v.accepted = v.accepted && s.passes;
    v.arcs.push_back(std::move(s));
  }
  return v;
}

MaxRate max_admissible_stream_rate(const IncidenceMatrix& incidence, const TrafficStreamSet& streams,
                                   Eigen::Index path, Eigen::Index arc, double capacity, double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
  auto terms = arc_terms(incidence, streams, arc);
  auto self = std::find_if(terms.begin(), terms.end(), [&](const StreamTerm& t) {
    return t.jump == &streams.jumps[static_cast<std::size_t>(path)];
  });
  if (self == terms.end()) return {kInf, true};  // path does not use the arc

  const double mean_k = self->jump->mean();
  double others_mean = 0.0;
  for (const auto& t : terms) {
    if (&t != &*self) others_mean += t.rate * t.jump->mean();
  }

  auto exceeds = [&](double r) {
    self->rate = r;
    return minimize_compound_exponent(terms, capacity).exponent > -gamma;
  };
  if (exceeds(0.0)) return {0.0, false};
  if (mean_k == 0.0) return {kInf, true};

  double lo = 0.0;
  double hi = (capacity - others_mean) / mean_k;  // exponent is 0 here
  while (hi - lo > 1e-13 * hi) {
    const double mid = 0.5 * (lo + hi);
    (exceeds(mid) ? hi : lo) = mid;
  }
  return {lo, false};
}

MaxRate max_admissible_rate(const JumpDistribution& dist, double capacity, double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
  IncidenceMatrix inc;
  inc.B = Eigen::MatrixXd::Ones(1, 1);
  inc.path_ids = {"P1"};
  inc.arc_ids = {"a1"};
  const TrafficStreamSet streams(Eigen::VectorXd::Zero(1), {dist});
  return max_admissible_stream_rate(inc, streams, 0, 0, capacity, gamma);
}

double counting_log_mgf(const CountingLaw& law, double theta) {
  if (const auto* p = std::get_if<PoissonCount>(&law)) return p->rate * std::expm1(theta);
  if (const auto* f = std::get_if<FixedCount>(&law)) return f->n * theta;
  const auto& g = std::get<GeometricCount>(law);
  const double q = g.success;
  if (!(q > 0.0 && q <= 1.0)) throw ValidationError("geometric success probability must lie in (0, 1]");
  const double tail = (1.0 - q) * std::exp(theta);
  if (tail >= 1.0) throw DomainError("geometric MGF infinite", -std::log1p(-q));
  return std::log(q) - std::log1p(-tail);
}

double general_m_exponent(std::span<const CountedStream> streams, double capacity, double s) {
  double f = -s * capacity;
  for (const auto& st : streams) f += counting_log_mgf(st.count, std::log(st.jump.mgf(s)));
  return f;
}

double general_m_exponent(const RoadNetwork& network, const IncidenceMatrix& incidence,
                          const std::vector<CountingLaw>& counts, const std::vector<JumpDistribution>& jumps,
                          const std::string& arc_id, double s) {
  if (counts.size() != static_cast<std::size_t>(incidence.paths()) || jumps.size() != counts.size()) {
    throw ValidationError("one counting law and one jump law per path required");
  }
  std::vector<CountedStream> on_arc;
  for (Eigen::Index i : contributing_paths(incidence, incidence.arc_column(arc_id))) {
    on_arc.push_back({counts[static_cast<std::size_t>(i)], jumps[static_cast<std::size_t>(i)]});
  }
  return general_m_exponent(on_arc, network.arc(arc_id).capacity, s);
}

std::vector<std::pair<double, double>> exponent_grid(const RoadNetwork& network, const IncidenceMatrix& incidence,
                                                     const TrafficStreamSet& streams, const std::string& arc_id,
                                                     int points, double s_hi) {
  if (points < 2) throw ValidationError("grid needs at least two points");
  const auto terms = arc_terms(incidence, streams, incidence.arc_column(arc_id));
  const double pole = common_s_max(terms);
  const double top = std::isfinite(pole) ? 0.999 * pole : s_hi;
  const double C = network.arc(arc_id).capacity;
  std::vector<std::pair<double, double>> grid;
  grid.reserve(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) {
    const double s = top * k / (points - 1);
    grid.emplace_back(s, compound_exponent(terms, C, s));
  }
  return grid;
}

void to_json(nlohmann::json& j, const ChernoffAnalysis& a) {
  j = {{"arc", a.arc_id},
       {"s_star", a.s_star},
       {"exponent", a.exponent},
       {"bound", a.bound},
       {"kind", to_string(a.kind)},
       {"alphas", a.alphas}};
}

void to_json(nlohmann::json& j, const IncreaseVerdict& v) {
  nlohmann::json arcs = nlohmann::json::array();
  for (const auto& s : v.arcs) {
    arcs.push_back({{"arc", s.arc_id}, {"load", s.load}, {"threshold", s.threshold}, {"slack", s.slack},
                    {"passes", s.passes}});
  }
  j = {{"accepted", v.accepted}, {"arcs", arcs}};
}

}  // namespace ebt
