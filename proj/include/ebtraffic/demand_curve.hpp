#pragma once

#include <json.hpp>

#include <utility>
#include <vector>

namespace ebt {

/// Piecewise-linear mean demand (vehicles / minute) on [0, horizon].
class DemandCurve {
 public:
  using Knot = std::pair<double, double>;  // (minute, rate)

  DemandCurve() = default;
  /// Knots must start at t = 0, be strictly increasing in time and carry
  /// non-negative rates. The horizon defaults to the last knot; beyond it
  /// the last rate is held.
  explicit DemandCurve(std::vector<Knot> knots, double horizon = -1.0);

  static DemandCurve constant(double rate, double horizon);

  const std::vector<Knot>& knots() const { return knots_; }
  double horizon() const { return horizon_; }

  double rate_at(double t) const;
  /// Exact integral of the curve over [a, b].
  double integral(double a, double b) const;

 private:
  std::vector<Knot> knots_;
  double horizon_ = 0.0;
};

/// Mean demand of step m (1-based): the area under the curve on
/// [delta (m - 1), delta m].
double step_demand(const DemandCurve& curve, long step, double delta);

/// The rush-hour curve used by the single-link and linear-network experiments:
/// 20 until minute 60, linear rise to 55 at minute 120, linear fall to 20 at
/// minute 180, flat to minute 240.
DemandCurve rush_hour_curve();

void to_json(nlohmann::json& j, const DemandCurve& c);
void from_json(const nlohmann::json& j, DemandCurve& c);

}  // namespace ebt
