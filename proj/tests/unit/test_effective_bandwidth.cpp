#include "ebtraffic/effective_bandwidth.hpp"
#include "ebtraffic/errors.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ebt;

namespace {

RoadNetwork single_link(double capacity = 50.0) {
  return RoadNetwork({}, {{"a1", "n0", "n1", capacity}}, {{"P1", {"a1"}, "", ""}});
}

/// f(s) for one hyperexponential stream, from the closed-form MGF.
double hyper_exponent(double r, double capacity, double s) {
  return r * (oracle::hyperexp_mgf({0.7, 0.3}, {1.5, 0.5625}, s) - 1.0) - s * capacity;
}

std::vector<JumpDistribution> zoo() {
  return {Deterministic{1.3}, Exponential{2.0}, cars_and_trucks(),
          Hyperexponential{{0.2, 0.5, 0.3}, {4.0, 1.0, 0.7}},
          Mixture{{0.4, 0.6}, {JumpDistribution(Deterministic{0.5}), JumpDistribution(Exponential{1.5})}}};
}

}  // namespace

TEST_CASE("effective bandwidth: closed forms and continuity at zero") {
  const JumpDistribution e = Exponential{2.0};
  for (double s : {0.1, 0.5, 1.5}) {
    CHECK(effective_bandwidth_alpha(e, s) == doctest::Approx(1.0 / (2.0 - s)));
    CHECK(telecom_alpha(e, s) == doctest::Approx(-std::log1p(-s / 2.0) / s));
  }
  for (const auto& d : zoo()) {
    CHECK(effective_bandwidth_alpha(d, 0.0) == doctest::Approx(d.mean()));
    CHECK(telecom_alpha(d, 0.0) == doctest::Approx(d.mean()));
    CHECK(effective_bandwidth_alpha(d, 1e-7) == doctest::Approx(d.mean()).epsilon(1e-5));
  }
  CHECK(effective_bandwidth_alpha(Deterministic{1.3}, 0.8) == doctest::Approx(std::expm1(1.04) / 0.8));
}

TEST_CASE("sandwich: mean <= telecom <= effective bandwidth, alpha increasing") {
  for (const auto& d : zoo()) {
    const double top = std::isfinite(d.s_max()) ? 0.9 * d.s_max() : 3.0;
    double prev = d.mean();
    for (int k = 1; k <= 100; ++k) {
      const double s = top * k / 101.0;
      const double a = effective_bandwidth_alpha(d, s);
      const double at = telecom_alpha(d, s);
      CHECK(d.mean() <= a * (1 + 1e-12));
      CHECK(d.mean() <= at * (1 + 1e-12));
      CHECK(at <= a * (1 + 1e-12));
      CHECK(a >= prev * (1 - 1e-12));
      prev = a;
    }
  }
}

TEST_CASE("bounded support caps the telecom bandwidth at the peak") {
  const JumpDistribution d = Mixture{{0.5, 0.5}, {JumpDistribution(Deterministic{1}), JumpDistribution(Deterministic{3})}};
  for (double s : {0.1, 1.0, 5.0, 20.0}) CHECK(telecom_alpha(d, s) <= 3.0);
}

TEST_CASE("Experiment-1 link: exponent at r = 20 and r = 30") {
  const RoadNetwork net = single_link();
  const IncidenceMatrix inc = build_incidence(net);
  const auto at = [&](double r) {
    return minimize_exponent(net, inc, TrafficStreamSet(Eigen::VectorXd::Constant(1, r), {cars_and_trucks()}), "a1");
  };
  const auto a30 = at(30.0);
  const double g30 = oracle::golden_min([](double s) { return hyper_exponent(30, 50, s); }, 0.0, 0.5625 * 0.999999);
  CHECK(a30.kind == OptimumKind::Interior);
  CHECK(a30.exponent == doctest::Approx(g30).epsilon(1e-9));
  CHECK(a30.exponent == doctest::Approx(-1.9189).epsilon(1e-3));
  CHECK(a30.s_star == doctest::Approx(0.1665).epsilon(1e-3));
  CHECK(a30.bound == doctest::Approx(std::exp(a30.exponent)));

  const auto a20 = at(20.0);
  CHECK(a20.exponent < -4.0);
  CHECK(a20.alphas.at("P1") == doctest::Approx(effective_bandwidth_alpha(cars_and_trucks(), a20.s_star)));
  // At an interior optimum f'(s*) = 0, i.e. sum r E[D e^{sD}] = C.
  CHECK(20.0 * cars_and_trucks().mgf_derivative(a20.s_star) == doctest::Approx(50.0).epsilon(1e-8));
}

TEST_CASE("optimizer boundary cases") {
  const RoadNetwork net = single_link();
  const IncidenceMatrix inc = build_incidence(net);
  // mean load at or above capacity
  const auto over = minimize_exponent(net, inc, TrafficStreamSet(Eigen::VectorXd::Constant(1, 55.0), {cars_and_trucks()}), "a1");
  CHECK(over.kind == OptimumKind::BoundaryZero);
  CHECK(over.exponent == 0.0);
  CHECK(over.bound == 1.0);
  // no traffic at all
  const auto idle = minimize_exponent(net, inc, TrafficStreamSet(Eigen::VectorXd::Zero(1), {cars_and_trucks()}), "a1");
  CHECK(idle.kind == OptimumKind::BoundarySmax);
  CHECK(idle.exponent < -4.0);
  // bounded support below capacity: the event is impossible
  const auto det = minimize_compound_exponent(std::vector<StreamTerm>{}, 50.0);
  CHECK(det.kind == OptimumKind::BoundarySmax);
  // deterministic jumps, unbounded domain: interior optimum at log(C / r) / d
  const JumpDistribution d = Deterministic{1.0};
  const std::vector<StreamTerm> terms{{20.0, &d}};
  const auto m = minimize_compound_exponent(terms, 50.0);
  CHECK(m.kind == OptimumKind::Interior);
  CHECK(m.s_star == doctest::Approx(std::log(2.5)).epsilon(1e-9));
  CHECK(m.exponent == doctest::Approx(20.0 * 1.5 - 50.0 * std::log(2.5)).epsilon(1e-10));
  CHECK_THROWS_AS(minimize_exponent(net, inc, TrafficStreamSet(Eigen::VectorXd::Zero(1), {cars_and_trucks()}), "zz"),
                  LookupError);
}

TEST_CASE("optimizer agrees with a grid search on random configurations") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const int streams = 1 + static_cast<int>(rng() % 3);
    std::vector<JumpDistribution> jumps;
    std::vector<double> rates;
    double mean_load = 0.0;
    for (int i = 0; i < streams; ++i) {
      const double p = 0.2 + 0.6 * u(rng);
      jumps.push_back(Hyperexponential{{p, 1 - p}, {0.5 + 2 * u(rng), 0.3 + u(rng)}});
      rates.push_back(1.0 + 10.0 * u(rng));
      mean_load += rates.back() * jumps.back().mean();
    }
    const double capacity = mean_load * (1.1 + 1.5 * u(rng));
    std::vector<StreamTerm> terms;
    for (int i = 0; i < streams; ++i) terms.push_back({rates[i], &jumps[i]});
    const auto m = minimize_compound_exponent(terms, capacity);
    double pole = 1e9;
    for (const auto& j : jumps) pole = std::min(pole, j.s_max());
    auto f = [&](double s) {
      double v = -s * capacity;
      for (int i = 0; i < streams; ++i) v += rates[i] * (jumps[i].mgf(s) - 1.0);
      return v;
    };
    const auto [gs, gv] = oracle::grid_min(f, 0.0, pole * (1 - 1e-8), 20001);
    CHECK(m.exponent <= gv + 1e-9);
    CHECK(m.exponent >= gv - 1e-3 * std::abs(gv) - 1e-6);
  }
}

TEST_CASE("admissibility verdict and gamma specs") {
  const RoadNetwork net = single_link();
  const IncidenceMatrix inc = build_incidence(net);
  const TrafficStreamSet ts(Eigen::VectorXd::Constant(1, 22.0), {cars_and_trucks()});
  CHECK(admissible(net, inc, ts, GammaSpec::of(4.0)).front().admissible);
  CHECK_FALSE(admissible(net, inc, ts, GammaSpec::of(4.5)).front().admissible);
  GammaSpec g;
  g.uniform = 3.0;
  g.per_arc["a1"] = 4.5;
  CHECK(g.for_arc("a1") == 4.5);
  CHECK(g.for_arc("a2") == 3.0);
  CHECK_FALSE(admissible(net, inc, ts, g).front().admissible);
  CHECK_THROWS_AS(GammaSpec::of(0.0).validate(), ValidationError);
  CHECK_THROWS_AS(GammaSpec{}.validate(), ValidationError);
}

TEST_CASE("half-space test at epsilon = 0 reproduces the exact verdict") {
  const RoadNetwork net = single_link();
  const IncidenceMatrix inc = build_incidence(net);
  for (double r : {10.0, 18.0, 22.0, 22.5, 25.0, 35.0}) {
    const TrafficStreamSet ts(Eigen::VectorXd::Constant(1, r), {cars_and_trucks()});
    const auto table = build_operating_points(net, inc, ts, GammaSpec::of(4.0));
    const bool exact = admissible(net, inc, ts, GammaSpec::of(4.0)).front().admissible;
    CHECK(check_increase(table, inc, ts, "P1", 0.0).accepted == exact);
  }
}

TEST_CASE("operating point at r = 20 and the frozen increase test") {
  const RoadNetwork net = single_link();
  const IncidenceMatrix inc = build_incidence(net);
  const TrafficStreamSet ts(Eigen::VectorXd::Constant(1, 20.0), {cars_and_trucks()});
  const auto table = build_operating_points(net, inc, ts, GammaSpec::of(4.0));
  const auto& p = table.at("a1");
  CHECK(p.status == OperatingPoint::Status::Active);
  CHECK(p.s == doctest::Approx(0.2579).epsilon(1e-3));
  CHECK(p.threshold == doctest::Approx(50.0 - 4.0 / p.s));
  CHECK(p.alphas[0] == doctest::Approx(effective_bandwidth_alpha(cars_and_trucks(), p.s)));

  const auto small = check_increase(table, inc, ts, "P1", 0.05);
  CHECK(small.accepted);
  CHECK(small.arcs.front().load == doctest::Approx(21.0 * p.alphas[0]));
  CHECK(small.arcs.front().slack == doctest::Approx(p.threshold - 21.0 * p.alphas[0]));
  CHECK_FALSE(check_increase(table, inc, ts, "P1", 0.5).accepted);
  CHECK_THROWS_AS(check_increase(table, inc, ts, "P1", -0.1), ValidationError);
  CHECK_THROWS_AS(check_increase(table, inc, ts, "P9", 0.1), LookupError);
}

TEST_CASE("half-space acceptance is sound: re-optimized exponent stays below -gamma") {
  const RoadNetwork net({}, {{"a1", "n0", "n1", 60}, {"a2", "n1", "n2", 50}, {"a3", "n3", "n1", 80}},
                        {{"P1", {"a1", "a2"}, "", ""}, {"P2", {"a3", "a2"}, "", ""}});
  const IncidenceMatrix inc = build_incidence(net);
  const std::vector<JumpDistribution> jumps{cars_and_trucks(), JumpDistribution(Exponential{1.2})};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int accepted = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const TrafficStreamSet ts(Eigen::Vector2d(2 + 10 * u(rng), 2 + 10 * u(rng)), jumps);
    const auto table = build_operating_points(net, inc, ts, GammaSpec::of(3.0));
    const std::string path = trial % 2 ? "P1" : "P2";
    const double eps = 0.3 * u(rng);
    if (!check_increase(table, inc, ts, path, eps).accepted) continue;
    ++accepted;
    const Eigen::Index k = inc.path_row(path);
    const TrafficStreamSet raised = ts.with_rate(k, ts.rates[k] * (1 + eps));
    for (const auto& v : admissible(net, inc, raised, GammaSpec::of(3.0))) CHECK(v.admissible);
  }
  CHECK(accepted > 5);
}

TEST_CASE("idle and overloaded operating points") {
  const RoadNetwork net({}, {{"a1", "n0", "n1", 50}, {"a2", "n1", "n2", 5}}, {{"P1", {"a1"}, "", ""}, {"P2", {"a2"}, "", ""}});
  const IncidenceMatrix inc = build_incidence(net);
  const TrafficStreamSet ts(Eigen::Vector2d(0.0, 10.0), {cars_and_trucks(), cars_and_trucks()});
  const auto table = build_operating_points(net, inc, ts, GammaSpec::of(4.0));
  CHECK(table.at("a1").status == OperatingPoint::Status::Idle);
  CHECK(table.at("a2").status == OperatingPoint::Status::Overload);
  const auto v = check_increase(table, inc, ts, "P1", 0.1);
  CHECK(v.arcs[0].passes);
  CHECK_FALSE(v.arcs[1].passes);
  CHECK_FALSE(v.accepted);
  CHECK_THROWS_AS(table.at("zz"), LookupError);
}

TEST_CASE("maximum admissible rate solves f(s*) = -gamma") {
  const MaxRate m = max_admissible_rate(cars_and_trucks(), 50.0, 4.0);
  CHECK_FALSE(m.unbounded);
  CHECK(m.rate == doctest::Approx(22.4438).epsilon(1e-4));
  const double at = oracle::golden_min([&](double s) { return hyper_exponent(m.rate, 50, s); }, 0.0, 0.5625 * 0.999999);
  CHECK(at == doctest::Approx(-4.0).epsilon(1e-7));
  // monotone in gamma
  double prev = 1e9;
  for (double g : {1.0, 2.0, 4.0, 8.0}) {
    const double r = max_admissible_rate(cars_and_trucks(), 50.0, g).rate;
    CHECK(r < prev);
    prev = r;
  }
  CHECK_THROWS_AS(max_admissible_rate(cars_and_trucks(), 50.0, 0.0), ValidationError);
  CHECK(max_admissible_rate(Deterministic{0.0}, 50.0, 4.0).unbounded);
}

TEST_CASE("general counting laws: Poisson reduces to the compound exponent") {
  const RoadNetwork net = single_link();
  const IncidenceMatrix inc = build_incidence(net);
  const TrafficStreamSet ts(Eigen::VectorXd::Constant(1, 25.0), {cars_and_trucks()});
  for (int k = 0; k < 50; ++k) {
    const double s = 0.55 * k / 49.0;
    const double a = general_m_exponent(net, inc, {PoissonCount{25.0}}, {cars_and_trucks()}, "a1", s);
    const double b = chernoff_exponent(net, inc, ts, "a1", s);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("general counting laws: fixed and geometric counts") {
  const JumpDistribution e = Exponential{2.0};
  const double s = 0.5;
  const std::vector<CountedStream> fixed{{FixedCount{10.0}, e}};
  CHECK(general_m_exponent(fixed, 30.0, s) == doctest::Approx(10.0 * std::log(2.0 / 1.5) - 15.0));
  // Geometric(q) on {0, 1, ...}: E[z^M] = q / (1 - (1 - q) z).
  const double q = 0.5, z = 2.0 / 1.5;
  const std::vector<CountedStream> geo{{GeometricCount{q}, e}};
  CHECK(general_m_exponent(geo, 30.0, s) == doctest::Approx(std::log(q / (1 - (1 - q) * z)) - 15.0));
  CHECK_THROWS_AS(counting_log_mgf(GeometricCount{0.2}, 1.0), DomainError);
  CHECK_THROWS_AS(counting_log_mgf(GeometricCount{0.0}, 0.1), ValidationError);
  CHECK(counting_log_mgf(PoissonCount{3.0}, 0.0) == 0.0);
}

TEST_CASE("exponent grid and json") {
  const RoadNetwork net = single_link();
  const IncidenceMatrix inc = build_incidence(net);
  const TrafficStreamSet ts(Eigen::VectorXd::Constant(1, 20.0), {cars_and_trucks()});
  const auto grid = exponent_grid(net, inc, ts, "a1", 11);
  CHECK(grid.size() == 11);
  CHECK(grid.front().second == 0.0);
  CHECK(grid.back().first == doctest::Approx(0.999 * 0.5625));
  const nlohmann::json j = minimize_exponent(net, inc, ts, "a1");
  CHECK(j.at("kind") == "interior");
  CHECK(j.at("alphas").contains("P1"));
}
