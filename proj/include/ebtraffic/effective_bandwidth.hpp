#pragma once

#include "ebtraffic/compound_poisson.hpp"
#include "ebtraffic/jump_distribution.hpp"
#include "ebtraffic/network.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ebt {

/// alpha(s) = (E[e^{sD}] - 1) / s, continued by E[D] at s = 0.
double effective_bandwidth_alpha(const JumpDistribution& dist, double s);

/// Classical bandwidth log E[e^{sD}] / s, continued by E[D] at s = 0.
double telecom_alpha(const JumpDistribution& dist, double s);

/// One summand of a compound-Poisson Chernoff exponent.
struct StreamTerm {
  double rate = 0.0;
  const JumpDistribution* jump = nullptr;
};

/// Common MGF domain of the terms that carry traffic.
double common_s_max(std::span<const StreamTerm> terms);

/// f(s) = sum_i r_i (E e^{s D_i} - 1) - s C.
double compound_exponent(std::span<const StreamTerm> terms, double capacity, double s);
/// f'(s) = sum_i r_i E[D_i e^{s D_i}] - C.
double compound_exponent_derivative(std::span<const StreamTerm> terms, double capacity, double s);

enum class OptimumKind {
  Interior,      // f'(s*) = 0 inside (0, s_max)
  BoundaryZero,  // mean load >= capacity: infimum 0 at s = 0
  BoundarySmax,  // f decreasing on the whole domain (no effective traffic)
};

std::string to_string(OptimumKind kind);

struct ExponentMinimum {
  double s_star = 0.0;
  double exponent = 0.0;  // may be -inf when the domain is unbounded
  OptimumKind kind = OptimumKind::Interior;
};

/// inf_{s >= 0} f(s): geometric bracketing of the sign change of f', then
/// bisection on f' until |f'| <= 1e-9 C or the bracket is narrower than 1e-12.
ExponentMinimum minimize_compound_exponent(std::span<const StreamTerm> terms, double capacity);

/// Terms of all paths crossing `arc` (B(i, arc) = 1).
std::vector<StreamTerm> arc_terms(const IncidenceMatrix& incidence, const TrafficStreamSet& streams,
                                  Eigen::Index arc);

double chernoff_exponent(const RoadNetwork& network, const IncidenceMatrix& incidence,
                         const TrafficStreamSet& streams, const std::string& arc_id, double s);

struct ChernoffAnalysis {
  std::string arc_id;
  double s_star = 0.0;
  double exponent = 0.0;
  double bound = 1.0;  // exp(exponent), the bound on P(Y_a > C_a)
  OptimumKind kind = OptimumKind::Interior;
  std::map<std::string, double> alphas;  // per contributing path, at s_star
};

ChernoffAnalysis minimize_exponent(const RoadNetwork& network, const IncidenceMatrix& incidence,
                                   const TrafficStreamSet& streams, const std::string& arc_id);

/// Tolerance targets gamma_a > 0: uniform, per-arc, or both (map overrides).
struct GammaSpec {
  std::optional<double> uniform;
  std::map<std::string, double> per_arc;

  static GammaSpec of(double gamma);
  void validate() const;
  double for_arc(const std::string& arc_id) const;
};

struct ArcVerdict {
  std::string arc_id;
  double gamma = 0.0;
  bool admissible = false;
  ChernoffAnalysis analysis;
};

/// Per arc: admissible iff the minimized exponent is <= -gamma_a.
std::vector<ArcVerdict> admissible(const RoadNetwork& network, const IncidenceMatrix& incidence,
                                   const TrafficStreamSet& streams, const GammaSpec& gamma);

struct OperatingPoint {
  enum class Status {
    Active,    // interior minimizer, half-space test applies
    Idle,      // no traffic on the arc; always admissible
    Overload,  // mean load >= capacity; never admissible
  };

  std::string arc_id;
  Status status = Status::Active;
  double s = 0.0;
  double gamma = 0.0;
  double capacity = 0.0;
  Eigen::VectorXd alphas;  // alpha_i(s) for every path, 0 where B(i, j) = 0
  double threshold = 0.0;  // C_a - gamma_a / s
};

struct OperatingPointTable {
  std::vector<OperatingPoint> points;  // one per arc, in network arc order
  double built_at = 0.0;

  const OperatingPoint& at(const std::string& arc_id) const;
};

OperatingPointTable build_operating_points(const RoadNetwork& network, const IncidenceMatrix& incidence,
                                           const TrafficStreamSet& streams, const GammaSpec& gamma,
                                           double built_at = 0.0);

struct ArcSlack {
  std::string arc_id;
  double load = 0.0;       // sum_i B r_i alpha_i(s_j) + eps B_kj r_k alpha_k(s_j)
  double threshold = 0.0;
  double slack = 0.0;      // threshold - load
  bool passes = false;
};

struct IncreaseVerdict {
  bool accepted = false;
  std::vector<ArcSlack> arcs;
};

/// Half-space test for raising path k's rate to r_k (1 + epsilon) with the
/// operating points frozen.
IncreaseVerdict check_increase(const OperatingPointTable& table, const IncidenceMatrix& incidence,
                               const TrafficStreamSet& streams, const std::string& path_id, double epsilon);

struct MaxRate {
  double rate = 0.0;
  bool unbounded = false;
};

/// Largest rate of path k that keeps the minimized exponent on `arc` at or
/// below -gamma, other paths held at their current rates.
MaxRate max_admissible_stream_rate(const IncidenceMatrix& incidence, const TrafficStreamSet& streams,
                                   Eigen::Index path, Eigen::Index arc, double capacity, double gamma);

/// Single-stream arc version; throws ValidationError for gamma <= 0.
MaxRate max_admissible_rate(const JumpDistribution& dist, double capacity, double gamma);

// ---------------------------------------------------------------------------
// General counting laws for the number of vehicles M_i.

struct PoissonCount {
  double rate = 0.0;
};
struct FixedCount {
  double n = 0.0;
};
/// P(M = k) = q (1 - q)^k on {0, 1, ...}.
struct GeometricCount {
  double success = 1.0;
};
using CountingLaw = std::variant<PoissonCount, FixedCount, GeometricCount>;

/// log E[e^{theta M}]; throws DomainError where infinite.
double counting_log_mgf(const CountingLaw& law, double theta);

struct CountedStream {
  CountingLaw count;
  JumpDistribution jump;
};

/// sum_i log G_{M_i}(log G_{D_i}(s)) - s C.
double general_m_exponent(std::span<const CountedStream> streams, double capacity, double s);

double general_m_exponent(const RoadNetwork& network, const IncidenceMatrix& incidence,
                          const std::vector<CountingLaw>& counts, const std::vector<JumpDistribution>& jumps,
                          const std::string& arc_id, double s);

/// (s, f(s)) on `points` evenly spaced values in [0, 0.999 s_max) (or
/// [0, s_hi] when the domain is unbounded).
std::vector<std::pair<double, double>> exponent_grid(const RoadNetwork& network, const IncidenceMatrix& incidence,
                                                     const TrafficStreamSet& streams, const std::string& arc_id,
                                                     int points, double s_hi = 5.0);

void to_json(nlohmann::json& j, const ChernoffAnalysis& a);
void to_json(nlohmann::json& j, const IncreaseVerdict& v);

}  // namespace ebt
