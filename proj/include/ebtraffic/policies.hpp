#pragma once

#include "ebtraffic/compound_poisson.hpp"
#include "ebtraffic/effective_bandwidth.hpp"
#include "ebtraffic/network.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>

namespace ebt {

/// Input-rate control rule.
///   NC      no control
///   EN      E[Y_a] < C_a
///   RN(a)   E[Y_a] + a sqrt(Var Y_a) < C_a
///   EB(g)   minimized Chernoff exponent <= -g_a
struct PolicySpec {
  enum class Kind { NC, EN, RN, EB };

  Kind kind = Kind::NC;
  double rn_alpha = 0.0;
  std::optional<double> rn_gamma;  // set when alpha was calibrated from gamma
  GammaSpec eb_gamma;

  static PolicySpec nc() { return {}; }
  static PolicySpec en();
  static PolicySpec rn(double alpha);
  static PolicySpec rn_from_gamma(double gamma);
  static PolicySpec eb(GammaSpec gamma);

  void validate() const;

  /// Short display name: NC, EN, RN(2.0898), RN(a_4), EB(4), EB(map).
  std::string label() const;
  /// Canonical parseable form, e.g. "rn:gamma=4".
  std::string to_string() const;
};

/// Parses "nc", "en", "rn:alpha=2.0885", "rn:gamma=4", "eb:gamma=4",
/// "eb:gamma_map={a3:5,a4:6}" and "eb:gamma=4,gamma_map={a3:5}".
PolicySpec parse_policy(const std::string& text);

/// Maximum admissible mean rates (vehicles / minute).
struct RateCap {
  Eigen::MatrixXd stream_arc;  // paths x arcs; cap of stream i on arc j, +inf where B(i, j) = 0
  Eigen::VectorXd arc;         // min over contributing streams, +inf for unused arcs
  Eigen::VectorXd path;        // min over the path's arcs

  static RateCap from_stream_arc(const IncidenceMatrix& incidence, Eigen::MatrixXd stream_arc);
};

RateCap nc_cap(const IncidenceMatrix& incidence);
RateCap en_cap(const RoadNetwork& network, const IncidenceMatrix& incidence, const TrafficStreamSet& streams);
RateCap rn_cap(const RoadNetwork& network, const IncidenceMatrix& incidence, const TrafficStreamSet& streams,
               double alpha);
RateCap eb_cap(const RoadNetwork& network, const IncidenceMatrix& incidence, const TrafficStreamSet& streams,
               const GammaSpec& gamma);

RateCap policy_cap(const PolicySpec& policy, const RoadNetwork& network, const IncidenceMatrix& incidence,
                   const TrafficStreamSet& streams);

/// Largest r with r E[D] + alpha sqrt(r E[D^2]) <= C (single stream).
double rn_single_stream_cap(const Moments& m, double capacity, double alpha);

/// Inverse of the standard normal CDF.
double normal_quantile(double p);

/// z with P(Z >= z) = exp(-gamma).
double calibrate_alpha_from_gamma(double gamma);

}  // namespace ebt
