#pragma once

#include "ebtraffic/jump_distribution.hpp"
#include "ebtraffic/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace ebt {

/// One traffic stream per network path: Poisson arrival rate r_i
/// (vehicles / minute) and the per-vehicle capacity-need law D_i.
struct TrafficStreamSet {
  Eigen::VectorXd rates;
  std::vector<JumpDistribution> jumps;

  TrafficStreamSet() = default;
  TrafficStreamSet(Eigen::VectorXd r, std::vector<JumpDistribution> d);

  Eigen::Index size() const { return rates.size(); }

  /// Requires one entry per path of `network`.
  void check_against(const RoadNetwork& network) const;

  Eigen::VectorXd mean_needs() const;
  Eigen::VectorXd second_moments() const;

  TrafficStreamSet with_rate(Eigen::Index path, double rate) const;
};

/// E[Y_a] per arc: B^T (r .* E[D]).
Eigen::VectorXd mean_utilized_capacity(const IncidenceMatrix& incidence, const TrafficStreamSet& streams);
/// Var(Y_a) per arc: B^T (r .* E[D^2]).
Eigen::VectorXd variance_utilized_capacity(const IncidenceMatrix& incidence, const TrafficStreamSet& streams);

/// Compound-Poisson draw: sum of `Poisson(mean)` i.i.d. jumps.
double sample_compound_poisson(double mean_count, const JumpDistribution& jump, Rng& rng);

/// One draw of the utilized capacity Y on `arc_id`.
double sample_utilized_capacity(const RoadNetwork& network, const IncidenceMatrix& incidence,
                                const TrafficStreamSet& streams, const std::string& arc_id, Rng& rng);

struct ViolationEstimate {
  double p_hat = 0.0;
  std::int64_t samples = 0;
  double half_width = 0.0;  // 95% normal approximation
};

ViolationEstimate make_violation_estimate(std::int64_t exceedances, std::int64_t samples);

/// Monte Carlo estimate of P(Y_a > C_a).
ViolationEstimate estimate_violation_probability(const RoadNetwork& network, const IncidenceMatrix& incidence,
                                                 const TrafficStreamSet& streams, const std::string& arc_id,
                                                 std::int64_t n_samples, Rng& rng);

// ---------------------------------------------------------------------------
// Large-deviations harness: for Poisson processes M_i(t) with rates lambda_i
// and jumps X_ik, estimates (1/t) log P(sum_i sum_{k<=M_i(t)} X_ik > c t).

struct LdpStream {
  double rate = 0.0;  // lambda_i
  JumpDistribution jump;
  double threshold = 0.0;  // c_i
};

enum class LdpMethod {
  Plain,   // crude Monte Carlo
  Tilted,  // importance sampling under the exponential change of measure at s*
};

struct LdpSample {
  double horizon = 0.0;
  std::vector<double> rates;
  std::vector<double> thresholds;
  double p_hat = 0.0;
  double value = 0.0;  // (1/t) log p_hat, -inf when p_hat == 0
  std::int64_t exceedances = 0;
  bool reliable = false;  // at least 50 exceedances observed
};

/// Throws ValidationError naming the stream when E[X] >= c_i, P(X > c_i) = 0,
/// or lambda_i <= 0.
void check_ldp_hypotheses(const std::vector<LdpStream>& streams);

/// Limit value inf_{s>0} sum_i [lambda_i (E e^{sX} - 1) - c_i s] and its minimizer.
struct LdpLimit {
  double s_star = 0.0;
  double value = 0.0;
};
LdpLimit ldp_theoretical_rate(const std::vector<LdpStream>& streams);

std::vector<LdpSample> ldp_empirical_rate(const std::vector<LdpStream>& streams,
                                          const std::vector<double>& horizons, std::int64_t n_samples,
                                          Rng& rng, LdpMethod method = LdpMethod::Tilted);

}  // namespace ebt
