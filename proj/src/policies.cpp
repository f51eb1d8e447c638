#include "ebtraffic/policies.hpp"

#include "ebtraffic/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace ebt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_number(const std::string& text, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("policy '" + context + "': '" + text + "' is not a number");
  }
}

// Splits on commas that are not inside braces.
std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  int depth = 0;
  for (char ch : s) {
    if (ch == '{') ++depth;
    if (ch == '}') --depth;
    if (ch == ',' && depth == 0) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty()) parts.push_back(trim(cur));
  return parts;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string short_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

PolicySpec PolicySpec::en() {
  PolicySpec p;
  p.kind = Kind::EN;
  return p;
}

PolicySpec PolicySpec::rn(double alpha) {
  PolicySpec p;
  p.kind = Kind::RN;
  p.rn_alpha = alpha;
  p.validate();
  return p;
}

PolicySpec PolicySpec::rn_from_gamma(double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("RN calibration gamma must be positive");
  PolicySpec p = rn(calibrate_alpha_from_gamma(gamma));
  p.rn_gamma = gamma;
  return p;
}

PolicySpec PolicySpec::eb(GammaSpec gamma) {
  PolicySpec p;
  p.kind = Kind::EB;
  p.eb_gamma = std::move(gamma);
  p.validate();
  return p;
}

void PolicySpec::validate() const {
  if (kind == Kind::RN && !(rn_alpha > 0.0)) throw ValidationError("RN alpha must be positive");
  if (kind == Kind::EB) eb_gamma.validate();
}

std::string PolicySpec::label() const {
  switch (kind) {
    case Kind::NC: return "NC";
    case Kind::EN: return "EN";
    case Kind::RN: return rn_gamma ? "RN(a_" + short_number(*rn_gamma) + ")" : "RN(" + short_number(rn_alpha) + ")";
    case Kind::EB:
      if (eb_gamma.per_arc.empty()) return "EB(" + short_number(*eb_gamma.uniform) + ")";
      return "EB(map)";
  }
  return "?";
}

std::string PolicySpec::to_string() const {
  switch (kind) {
    case Kind::NC: return "nc";
    case Kind::EN: return "en";
    case Kind::RN: return rn_gamma ? "rn:gamma=" + format_number(*rn_gamma) : "rn:alpha=" + format_number(rn_alpha);
    case Kind::EB: {
      std::string out = "eb:";
      if (eb_gamma.uniform) out += "gamma=" + format_number(*eb_gamma.uniform);
      if (!eb_gamma.per_arc.empty()) {
        if (eb_gamma.uniform) out += ",";
        out += "gamma_map={";
        bool first = true;
        for (const auto& [arc, g] : eb_gamma.per_arc) {
          out += (first ? "" : ",") + arc + ":" + format_number(g);
          first = false;
        }
        out += "}";
      }
      return out;
    }
  }
  return "";
}

PolicySpec parse_policy(const std::string& raw) {
  std::string text = trim(raw);
  std::string kind = text.substr(0, text.find(':'));
  std::transform(kind.begin(), kind.end(), kind.begin(), [](unsigned char c) { return std::tolower(c); });
  const std::string rest = text.find(':') == std::string::npos ? "" : text.substr(text.find(':') + 1);

  std::vector<std::pair<std::string, std::string>> kv;
  for (const auto& part : split_top_level(rest)) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ValidationError("policy '" + text + "': expected key=value, got '" + part + "'");
    kv.emplace_back(trim(part.substr(0, eq)), trim(part.substr(eq + 1)));
  }

  if (kind == "nc" || kind == "en") {
    if (!kv.empty()) throw ValidationError("policy '" + text + "' takes no parameters");
    return kind == "nc" ? PolicySpec::nc() : PolicySpec::en();
  }
  if (kind == "rn") {
    if (kv.size() != 1) throw ValidationError("policy '" + text + "': expected alpha=<a> or gamma=<g>");
    if (kv[0].first == "alpha") return PolicySpec::rn(parse_number(kv[0].second, text));
    if (kv[0].first == "gamma") return PolicySpec::rn_from_gamma(parse_number(kv[0].second, text));
    throw ValidationError("policy '" + text + "': unknown key '" + kv[0].first + "'");
  }
  if (kind == "eb") {
    GammaSpec g;
    for (const auto& [key, value] : kv) {
      if (key == "gamma") {
        g.uniform = parse_number(value, text);
      } else if (key == "gamma_map") {
        if (value.size() < 2 || value.front() != '{' || value.back() != '}') {
          throw ValidationError("policy '" + text + "': gamma_map must be {arc:gamma,...}");
        }
        for (const auto& entry : split_top_level(value.substr(1, value.size() - 2))) {
          const auto colon = entry.find(':');
          if (colon == std::string::npos) throw ValidationError("policy '" + text + "': bad map entry '" + entry + "'");
          g.per_arc[trim(entry.substr(0, colon))] = parse_number(trim(entry.substr(colon + 1)), text);
        }
      } else {
        throw ValidationError("policy '" + text + "': unknown key '" + key + "'");
      }
    }
    return PolicySpec::eb(std::move(g));
  }
  throw ValidationError("unknown policy '" + text + "' (expected nc, en, rn:..., eb:...)");
}

RateCap RateCap::from_stream_arc(const IncidenceMatrix& incidence, Eigen::MatrixXd stream_arc) {
  RateCap cap;
  cap.stream_arc = std::move(stream_arc);
  cap.arc = Eigen::VectorXd::Constant(incidence.arcs(), kInf);
  cap.path = Eigen::VectorXd::Constant(incidence.paths(), kInf);
  for (Eigen::Index i = 0; i < incidence.paths(); ++i) {
    for (Eigen::Index j = 0; j < incidence.arcs(); ++j) {
      if (!incidence.uses(i, j)) continue;
      cap.arc[j] = std::min(cap.arc[j], cap.stream_arc(i, j));
      cap.path[i] = std::min(cap.path[i], cap.stream_arc(i, j));
    }
  }
  return cap;
}

RateCap nc_cap(const IncidenceMatrix& incidence) {
  return RateCap::from_stream_arc(incidence, Eigen::MatrixXd::Constant(incidence.paths(), incidence.arcs(), kInf));
}

RateCap en_cap(const RoadNetwork& network, const IncidenceMatrix& incidence, const TrafficStreamSet& streams) {
  streams.check_against(network);
  const Eigen::VectorXd means = streams.mean_needs();
  const Eigen::VectorXd loads = mean_utilized_capacity(incidence, streams);
  Eigen::MatrixXd caps = Eigen::MatrixXd::Constant(incidence.paths(), incidence.arcs(), kInf);
  for (Eigen::Index j = 0; j < incidence.arcs(); ++j) {
    const double C = network.arcs()[static_cast<std::size_t>(j)].capacity;
    for (Eigen::Index k : contributing_paths(incidence, j)) {
      if (means[k] == 0.0) continue;  // zero-size vehicles never bind
      const double others = loads[j] - streams.rates[k] * means[k];
      caps(k, j) = std::max(0.0, (C - others) / means[k]);
    }
  }
  return RateCap::from_stream_arc(incidence, std::move(caps));
}

double rn_single_stream_cap(const Moments& m, double capacity, double alpha) {
  if (m.mean == 0.0) return kInf;
  // r E + alpha sqrt(r E2) = C is a quadratic in x = sqrt(r).
  const double b = alpha * std::sqrt(m.second);
  const double x = (-b + std::sqrt(b * b + 4.0 * m.mean * capacity)) / (2.0 * m.mean);
  return x * x;
}

RateCap rn_cap(const RoadNetwork& network, const IncidenceMatrix& incidence, const TrafficStreamSet& streams,
               double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("RN alpha must be positive");
  streams.check_against(network);
  const Eigen::VectorXd mean = mean_utilized_capacity(incidence, streams);
  const Eigen::VectorXd var = variance_utilized_capacity(incidence, streams);
  Eigen::MatrixXd caps = Eigen::MatrixXd::Constant(incidence.paths(), incidence.arcs(), kInf);
  for (Eigen::Index j = 0; j < incidence.arcs(); ++j) {
    const double C = network.arcs()[static_cast<std::size_t>(j)].capacity;
    const auto rows = contributing_paths(incidence, j);
    for (Eigen::Index k : rows) {
      const Moments mk = streams.jumps[static_cast<std::size_t>(k)].moments();
      if (rows.size() == 1) {
        caps(k, j) = rn_single_stream_cap(mk, C, alpha);
        continue;
      }
      const double m_o = mean[j] - streams.rates[k] * mk.mean;
      const double v_o = var[j] - streams.rates[k] * mk.second;
      auto lhs = [&](double r) { return m_o + r * mk.mean + alpha * std::sqrt(std::max(0.0, v_o + r * mk.second)); };
      if (lhs(0.0) > C) {
        caps(k, j) = 0.0;
        continue;
      }
      if (mk.mean == 0.0) continue;
      double lo = 0.0;
      double hi = (C - m_o) / mk.mean;  // lhs(hi) >= C
      while (hi - lo > 1e-13 * hi) {
        const double mid = 0.5 * (lo + hi);
        (lhs(mid) > C ? hi : lo) = mid;
      }
      caps(k, j) = lo;
    }
  }
  return RateCap::from_stream_arc(incidence, std::move(caps));
}

RateCap eb_cap(const RoadNetwork& network, const IncidenceMatrix& incidence, const TrafficStreamSet& streams,
               const GammaSpec& gamma) {
  gamma.validate();
  streams.check_against(network);
  Eigen::MatrixXd caps = Eigen::MatrixXd::Constant(incidence.paths(), incidence.arcs(), kInf);
  for (Eigen::Index j = 0; j < incidence.arcs(); ++j) {
    const auto& arc = network.arcs()[static_cast<std::size_t>(j)];
    const double g = gamma.for_arc(arc.id);
    for (Eigen::Index k : contributing_paths(incidence, j)) {
      caps(k, j) = max_admissible_stream_rate(incidence, streams, k, j, arc.capacity, g).rate;
    }
  }
  return RateCap::from_stream_arc(incidence, std::move(caps));
}

RateCap policy_cap(const PolicySpec& policy, const RoadNetwork& network, const IncidenceMatrix& incidence,
                   const TrafficStreamSet& streams) {
  switch (policy.kind) {
    case PolicySpec::Kind::NC: return nc_cap(incidence);
    case PolicySpec::Kind::EN: return en_cap(network, incidence, streams);
    case PolicySpec::Kind::RN: return rn_cap(network, incidence, streams, policy.rn_alpha);
    case PolicySpec::Kind::EB: return eb_cap(network, incidence, streams, policy.eb_gamma);
  }
  throw ValidationError("unknown policy kind");
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw ValidationError("normal quantile needs p in [0, 1]");
  }
  // Acklam's rational approximation (relative error ~1e-9) ...
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                           1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                           6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                           -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                           3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low || p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(p < p_low ? p : 1.0 - p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    if (p > 1.0 - p_low) x = -x;
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  // ... polished by one Halley step against erfc.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double calibrate_alpha_from_gamma(double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
  return -normal_quantile(std::exp(-gamma));
}

}  // namespace ebt
