#include "ebtraffic/demand_curve.hpp"

#include "ebtraffic/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ebt {

DemandCurve::DemandCurve(std::vector<Knot> knots, double horizon) : knots_(std::move(knots)) {
  if (knots_.empty()) throw ValidationError("demand curve needs at least one knot");
  if (knots_.front().first != 0.0) throw ValidationError("demand curve must start at t = 0");
  for (std::size_t k = 0; k < knots_.size(); ++k) {
    const auto& [t, r] = knots_[k];
    if (!std::isfinite(t) || !std::isfinite(r) || r < 0.0) {
      throw ValidationError("demand curve knot " + std::to_string(k) + ": time and rate must be finite, rate >= 0");
    }
    if (k > 0 && !(t > knots_[k - 1].first)) throw ValidationError("demand curve knots must be strictly time-sorted");
  }
  horizon_ = horizon < 0.0 ? knots_.back().first : horizon;
  if (!(horizon_ > 0.0)) throw ValidationError("demand curve horizon must be positive");
}

DemandCurve DemandCurve::constant(double rate, double horizon) {
  return DemandCurve({{0.0, rate}, {horizon, rate}}, horizon);
}

double DemandCurve::rate_at(double t) const {
  if (t <= knots_.front().first) return knots_.front().second;
  if (t >= knots_.back().first) return knots_.back().second;
  auto hi = std::upper_bound(knots_.begin(), knots_.end(), t, [](double x, const Knot& k) { return x < k.first; });
  auto lo = hi - 1;
  const double w = (t - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

double DemandCurve::integral(double a, double b) const {
  if (b < a) return -integral(b, a);
  // Split [a, b] at the knots; the curve is linear on each piece.
  std::vector<double> cuts{a};
  for (const auto& k : knots_) {
    if (k.first > a && k.first < b) cuts.push_back(k.first);
  }
  cuts.push_back(b);
  double area = 0.0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    area += 0.5 * (rate_at(cuts[k - 1]) + rate_at(cuts[k])) * (cuts[k] - cuts[k - 1]);
  }
  return area;
}

double step_demand(const DemandCurve& curve, long step, double delta) {
  if (!(delta > 0.0)) throw ValidationError("step size must be positive");
  const double end = delta * static_cast<double>(step);
  if (step < 1 || end > curve.horizon() * (1.0 + 1e-12)) {
    throw ValidationError("step " + std::to_string(step) + " lies outside the demand horizon");
  }
  return curve.integral(end - delta, end);
}

DemandCurve rush_hour_curve() {
  return DemandCurve({{0.0, 20.0}, {60.0, 20.0}, {120.0, 55.0}, {180.0, 20.0}, {240.0, 20.0}}, 240.0);
}

void to_json(nlohmann::json& j, const DemandCurve& c) {
  nlohmann::json knots = nlohmann::json::array();
  for (const auto& [t, r] : c.knots()) knots.push_back({t, r});
  j = {{"knots", knots}, {"horizon", c.horizon()}};
}

void from_json(const nlohmann::json& j, DemandCurve& c) {
  if (!j.is_object() || !j.contains("knots") || !j.at("knots").is_array()) {
    throw ValidationError("demand curve: missing array field \"knots\"");
  }
  std::vector<DemandCurve::Knot> knots;
  for (const auto& k : j.at("knots")) {
    if (!k.is_array() || k.size() != 2) throw ValidationError("demand curve: each knot must be [minute, rate]");
    knots.emplace_back(k[0].get<double>(), k[1].get<double>());
  }
  c = DemandCurve(std::move(knots), j.value("horizon", -1.0));
}

}  // namespace ebt
