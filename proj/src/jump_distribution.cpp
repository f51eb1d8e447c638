#include "ebtraffic/jump_distribution.hpp"

#include "ebtraffic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ebt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPoleGuard = 1e-9;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void check_weights(const std::vector<double>& w, std::size_t n, const char* what) {
  if (w.empty() || w.size() != n) {
    throw ValidationError(std::string(what) + ": weights and components must be non-empty and equal in length");
  }
  double total = 0.0;
  for (double x : w) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ValidationError(std::string(what) + ": weights must be positive");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError(std::string(what) + ": weights must sum to 1");
}

std::size_t pick_component(const std::vector<double>& weights, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  return weights.size() - 1;
}

}  // namespace

JumpDistribution::JumpDistribution(Deterministic d) : v_(d) {
  if (!(d.value >= 0.0) || !std::isfinite(d.value)) {
    throw ValidationError("deterministic: value must be a non-negative finite number");
  }
}

JumpDistribution::JumpDistribution(Exponential e) : v_(e) {
  if (!(e.rate > 0.0) || !std::isfinite(e.rate)) throw ValidationError("exponential: rate must be positive");
}

JumpDistribution::JumpDistribution(Hyperexponential h) : v_(std::move(h)) {
  const auto& hx = std::get<Hyperexponential>(v_);
  check_weights(hx.weights, hx.rates.size(), "hyperexponential");
  for (double r : hx.rates) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("hyperexponential: rates must be positive");
  }
}

JumpDistribution::JumpDistribution(Mixture m) : v_(std::move(m)) {
  const auto& mx = std::get<Mixture>(v_);
  check_weights(mx.weights, mx.components.size(), "mixture");
}

std::string JumpDistribution::type_name() const {
  return std::visit(Overloaded{[](const Deterministic&) { return "deterministic"; },
                               [](const Exponential&) { return "exponential"; },
                               [](const Hyperexponential&) { return "hyperexponential"; },
                               [](const Mixture&) { return "mixture"; }},
                    v_);
}

double JumpDistribution::s_max() const {
  return std::visit(
      Overloaded{[](const Deterministic&) { return kInf; },
                 [](const Exponential& e) { return e.rate; },
                 [](const Hyperexponential& h) { return *std::min_element(h.rates.begin(), h.rates.end()); },
                 [](const Mixture& m) {
                   double s = kInf;
                   for (const auto& c : m.components) s = std::min(s, c.s_max());
                   return s;
                 }},
      v_);
}

double JumpDistribution::mgf(double s) const {
  const double pole = s_max();
  if (!(s >= 0.0) || (std::isfinite(pole) && s >= pole * (1.0 - kPoleGuard))) {
    throw DomainError("mgf evaluated at s = " + std::to_string(s) + " outside [0, " +
                          std::to_string(pole) + ")",
                      pole);
  }
  if (s == 0.0) return 1.0;  // weights may not sum to exactly 1 in floating point
  return std::visit(Overloaded{[&](const Deterministic& d) { return std::exp(s * d.value); },
                               [&](const Exponential& e) { return e.rate / (e.rate - s); },
                               [&](const Hyperexponential& h) {
                                 double acc = 0.0;
                                 for (std::size_t k = 0; k < h.rates.size(); ++k) {
                                   acc += h.weights[k] * h.rates[k] / (h.rates[k] - s);
                                 }
                                 return acc;
                               },
                               [&](const Mixture& m) {
                                 double acc = 0.0;
                                 for (std::size_t k = 0; k < m.components.size(); ++k) {
                                   acc += m.weights[k] * m.components[k].mgf(s);
                                 }
                                 return acc;
                               }},
                    v_);
}

double JumpDistribution::mgf_derivative(double s) const {
  const double pole = s_max();
  if (!(s >= 0.0) || (std::isfinite(pole) && s >= pole * (1.0 - kPoleGuard))) {
    throw DomainError("mgf derivative outside domain", pole);
  }
  return std::visit(Overloaded{[&](const Deterministic& d) { return d.value * std::exp(s * d.value); },
                               [&](const Exponential& e) {
                                 const double g = e.rate - s;
                                 return e.rate / (g * g);
                               },
                               [&](const Hyperexponential& h) {
                                 double acc = 0.0;
                                 for (std::size_t k = 0; k < h.rates.size(); ++k) {
                                   const double g = h.rates[k] - s;
                                   acc += h.weights[k] * h.rates[k] / (g * g);
                                 }
                                 return acc;
                               },
                               [&](const Mixture& m) {
                                 double acc = 0.0;
                                 for (std::size_t k = 0; k < m.components.size(); ++k) {
                                   acc += m.weights[k] * m.components[k].mgf_derivative(s);
                                 }
                                 return acc;
                               }},
                    v_);
}

Moments JumpDistribution::moments() const {
  return std::visit(Overloaded{[](const Deterministic& d) { return Moments{d.value, d.value * d.value}; },
                               [](const Exponential& e) {
                                 return Moments{1.0 / e.rate, 2.0 / (e.rate * e.rate)};
                               },
                               [](const Hyperexponential& h) {
                                 Moments m;
                                 for (std::size_t k = 0; k < h.rates.size(); ++k) {
                                   m.mean += h.weights[k] / h.rates[k];
                                   m.second += 2.0 * h.weights[k] / (h.rates[k] * h.rates[k]);
                                 }
                                 return m;
                               },
                               [](const Mixture& mx) {
                                 Moments m;
                                 for (std::size_t k = 0; k < mx.components.size(); ++k) {
                                   const Moments c = mx.components[k].moments();
                                   m.mean += mx.weights[k] * c.mean;
                                   m.second += mx.weights[k] * c.second;
                                 }
                                 return m;
                               }},
                    v_);
}

double JumpDistribution::support_max() const {
  return std::visit(Overloaded{[](const Deterministic& d) { return d.value; },
                               [](const Exponential&) { return kInf; },
                               [](const Hyperexponential&) { return kInf; },
                               [](const Mixture& m) {
                                 double hi = 0.0;
                                 for (const auto& c : m.components) hi = std::max(hi, c.support_max());
                                 return hi;
                               }},
                    v_);
}

JumpDistribution JumpDistribution::tilted(double theta) const {
  if (theta == 0.0) return *this;
  const double norm = mgf(theta);  // validates the domain
  return std::visit(
      Overloaded{[&](const Deterministic& d) { return JumpDistribution(d); },
                 [&](const Exponential& e) { return JumpDistribution(Exponential{e.rate - theta}); },
                 [&](const Hyperexponential& h) {
                   Hyperexponential t;
                   for (std::size_t k = 0; k < h.rates.size(); ++k) {
                     t.weights.push_back(h.weights[k] * h.rates[k] / (h.rates[k] - theta) / norm);
                     t.rates.push_back(h.rates[k] - theta);
                   }
                   // renormalize against rounding so the weight check passes
                   const double total = std::accumulate(t.weights.begin(), t.weights.end(), 0.0);
                   for (double& w : t.weights) w /= total;
                   return JumpDistribution(std::move(t));
                 },
                 [&](const Mixture& m) {
                   Mixture t;
                   for (std::size_t k = 0; k < m.components.size(); ++k) {
                     t.weights.push_back(m.weights[k] * m.components[k].mgf(theta) / norm);
                     t.components.push_back(m.components[k].tilted(theta));
                   }
                   const double total = std::accumulate(t.weights.begin(), t.weights.end(), 0.0);
                   for (double& w : t.weights) w /= total;
                   return JumpDistribution(std::move(t));
                 }},
      v_);
}

double JumpDistribution::sample(Rng& rng) const {
  return std::visit(Overloaded{[](const Deterministic& d) { return d.value; },
                               [&](const Exponential& e) {
                                 return std::exponential_distribution<double>(e.rate)(rng);
                               },
                               [&](const Hyperexponential& h) {
                                 const std::size_t k = pick_component(h.weights, rng);
                                 return std::exponential_distribution<double>(h.rates[k])(rng);
                               },
                               [&](const Mixture& m) {
                                 return m.components[pick_component(m.weights, rng)].sample(rng);
                               }},
                    v_);
}

bool operator==(const Deterministic& a, const Deterministic& b) { return a.value == b.value; }
bool operator==(const Exponential& a, const Exponential& b) { return a.rate == b.rate; }
bool operator==(const Hyperexponential& a, const Hyperexponential& b) {
  return a.weights == b.weights && a.rates == b.rates;
}
bool operator==(const Mixture& a, const Mixture& b) {
  return a.weights == b.weights && a.components == b.components;
}
bool operator==(const JumpDistribution& a, const JumpDistribution& b) { return a.v_ == b.v_; }

JumpDistribution cars_and_trucks() {
  return JumpDistribution(Hyperexponential{{0.7, 0.3}, {1.5, 0.5625}});
}

void to_json(nlohmann::json& j, const JumpDistribution& d) {
  std::visit(Overloaded{[&](const Deterministic& x) {
                          j = {{"type", "deterministic"}, {"value", x.value}};
                        },
                        [&](const Exponential& x) { j = {{"type", "exponential"}, {"rate", x.rate}}; },
                        [&](const Hyperexponential& x) {
                          j = {{"type", "hyperexponential"}, {"p", x.weights}, {"lambda", x.rates}};
                        },
                        [&](const Mixture& x) {
                          nlohmann::json comps = nlohmann::json::array();
                          for (std::size_t k = 0; k < x.components.size(); ++k) {
                            comps.push_back({{"weight", x.weights[k]}, {"dist", x.components[k]}});
                          }
                          j = {{"type", "mixture"}, {"components", comps}};
                        }},
             d.variant());
}

void from_json(const nlohmann::json& j, JumpDistribution& d) {
  if (!j.is_object() || !j.contains("type")) throw ValidationError("jump distribution: missing \"type\"");
  const auto type = j.at("type").get<std::string>();
  auto number = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) {
      throw ValidationError("jump distribution '" + type + "': missing numeric field \"" + key + "\"");
    }
    return j.at(key).get<double>();
  };
  auto numbers = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) {
      throw ValidationError("jump distribution '" + type + "': missing array field \"" + key + "\"");
    }
    return j.at(key).get<std::vector<double>>();
  };
  if (type == "deterministic") {
    d = JumpDistribution(Deterministic{number("value")});
  } else if (type == "exponential") {
    d = JumpDistribution(Exponential{number("rate")});
  } else if (type == "hyperexponential") {
    d = JumpDistribution(Hyperexponential{numbers("p"), numbers("lambda")});
  } else if (type == "mixture") {
    if (!j.contains("components") || !j.at("components").is_array()) {
      throw ValidationError("jump distribution 'mixture': missing array field \"components\"");
    }
    Mixture m;
    for (const auto& c : j.at("components")) {
      m.weights.push_back(c.at("weight").get<double>());
      m.components.push_back(c.at("dist").get<JumpDistribution>());
    }
    d = JumpDistribution(std::move(m));
  } else {
    throw ValidationError("unknown jump distribution type '" + type + "'");
  }
}

}  // namespace ebt
