#pragma once

#include <json.hpp>

#include <limits>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace ebt {

using Rng = std::mt19937_64;

class JumpDistribution;

struct Deterministic {
  double value = 0.0;
};

struct Exponential {
  double rate = 1.0;
};

struct Hyperexponential {
  std::vector<double> weights;
  std::vector<double> rates;
};

struct Mixture {
  std::vector<double> weights;
  std::vector<JumpDistribution> components;
};

struct Moments {
  double mean = 0.0;
  double second = 0.0;  // E[D^2]

  double variance() const { return second - mean * mean; }
};

/// Law of the capacity a single vehicle occupies. Non-negative support;
/// the MGF is finite on [0, s_max()).
class JumpDistribution {
 public:
  using Variant = std::variant<Deterministic, Exponential, Hyperexponential, Mixture>;

  JumpDistribution() : v_(Deterministic{1.0}) {}
  JumpDistribution(Deterministic d);
  JumpDistribution(Exponential e);
  JumpDistribution(Hyperexponential h);
  JumpDistribution(Mixture m);

  const Variant& variant() const { return v_; }
  std::string type_name() const;

  /// Pole of the MGF; +inf for bounded support.
  double s_max() const;

  /// E[exp(s D)]. Throws DomainError unless 0 <= s < s_max * (1 - 1e-9).
  double mgf(double s) const;
  /// d/ds E[exp(s D)] = E[D exp(s D)].
  double mgf_derivative(double s) const;

  Moments moments() const;
  double mean() const { return moments().mean; }

  /// Upper end of the support.
  double support_max() const;

  /// Exponentially tilted law with density proportional to exp(theta x) f(x).
  JumpDistribution tilted(double theta) const;

  double sample(Rng& rng) const;

  friend bool operator==(const JumpDistribution&, const JumpDistribution&);

 private:
  Variant v_;
};

bool operator==(const Deterministic& a, const Deterministic& b);
bool operator==(const Exponential& a, const Exponential& b);
bool operator==(const Hyperexponential& a, const Hyperexponential& b);
bool operator==(const Mixture& a, const Mixture& b);

/// The cars/trucks law used throughout the single-link experiments:
/// Hyperexponential(p = (0.7, 0.3), lambda = (3/2, 9/16)), mean 1.
JumpDistribution cars_and_trucks();

// Tagged-object serialization, e.g.
// {"type":"hyperexponential","p":[0.7,0.3],"lambda":[1.5,0.5625]}
void to_json(nlohmann::json& j, const JumpDistribution& d);
void from_json(const nlohmann::json& j, JumpDistribution& d);

}  // namespace ebt
