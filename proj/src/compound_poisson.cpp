#include "ebtraffic/compound_poisson.hpp"

#include "ebtraffic/effective_bandwidth.hpp"
#include "ebtraffic/errors.hpp"

#include <cmath>
#include <limits>

namespace ebt {

TrafficStreamSet::TrafficStreamSet(Eigen::VectorXd r, std::vector<JumpDistribution> d)
    : rates(std::move(r)), jumps(std::move(d)) {
  if (rates.size() != static_cast<Eigen::Index>(jumps.size())) {
    throw ValidationError("one jump distribution per stream rate required");
  }
  for (Eigen::Index i = 0; i < rates.size(); ++i) {
    if (!(rates[i] >= 0.0) || !std::isfinite(rates[i])) {
      throw ValidationError("stream " + std::to_string(i) + ": rate must be finite and non-negative");
    }
  }
}

void TrafficStreamSet::check_against(const RoadNetwork& network) const {
  if (static_cast<std::size_t>(size()) != network.path_count()) {
    throw ValidationError("expected one traffic stream per path (" + std::to_string(network.path_count()) +
                          "), got " + std::to_string(size()));
  }
}

Eigen::VectorXd TrafficStreamSet::mean_needs() const {
  Eigen::VectorXd m(size());
  for (Eigen::Index i = 0; i < size(); ++i) m[i] = jumps[static_cast<std::size_t>(i)].moments().mean;
  return m;
}

Eigen::VectorXd TrafficStreamSet::second_moments() const {
  Eigen::VectorXd m(size());
  for (Eigen::Index i = 0; i < size(); ++i) m[i] = jumps[static_cast<std::size_t>(i)].moments().second;
  return m;
}

TrafficStreamSet TrafficStreamSet::with_rate(Eigen::Index path, double rate) const {
  TrafficStreamSet copy = *this;
  copy.rates[path] = rate;
  return copy;
}

Eigen::VectorXd mean_utilized_capacity(const IncidenceMatrix& incidence, const TrafficStreamSet& streams) {
  return incidence.B.transpose() * streams.rates.cwiseProduct(streams.mean_needs());
}

Eigen::VectorXd variance_utilized_capacity(const IncidenceMatrix& incidence, const TrafficStreamSet& streams) {
  return incidence.B.transpose() * streams.rates.cwiseProduct(streams.second_moments());
}

double sample_compound_poisson(double mean_count, const JumpDistribution& jump, Rng& rng) {
  if (!(mean_count > 0.0)) return 0.0;
  const auto n = std::poisson_distribution<long long>(mean_count)(rng);
  double total = 0.0;
  for (long long k = 0; k < n; ++k) total += jump.sample(rng);
  return total;
}

double sample_utilized_capacity(const RoadNetwork& network, const IncidenceMatrix& incidence,
                                const TrafficStreamSet& streams, const std::string& arc_id, Rng& rng) {
  streams.check_against(network);
  const Eigen::Index j = incidence.arc_column(arc_id);
  double y = 0.0;
  for (Eigen::Index i : contributing_paths(incidence, j)) {
    y += sample_compound_poisson(streams.rates[i], streams.jumps[static_cast<std::size_t>(i)], rng);
  }
  return y;
}

ViolationEstimate make_violation_estimate(std::int64_t exceedances, std::int64_t samples) {
  ViolationEstimate e;
  e.samples = samples;
  e.p_hat = static_cast<double>(exceedances) / static_cast<double>(samples);
  e.half_width = 1.96 * std::sqrt(e.p_hat * (1.0 - e.p_hat) / static_cast<double>(samples));
  return e;
}

ViolationEstimate estimate_violation_probability(const RoadNetwork& network, const IncidenceMatrix& incidence,
                                                 const TrafficStreamSet& streams, const std::string& arc_id,
                                                 std::int64_t n_samples, Rng& rng) {
  if (n_samples < 1) throw ValidationError("n_samples must be at least 1");
  streams.check_against(network);
  const Eigen::Index j = incidence.arc_column(arc_id);
  const double capacity = network.arc(arc_id).capacity;
  const auto rows = contributing_paths(incidence, j);

  std::int64_t hits = 0;
  for (std::int64_t n = 0; n < n_samples; ++n) {
    double y = 0.0;
    for (Eigen::Index i : rows) {
      y += sample_compound_poisson(streams.rates[i], streams.jumps[static_cast<std::size_t>(i)], rng);
    }
    if (y > capacity) ++hits;
  }
  return make_violation_estimate(hits, n_samples);
}

void check_ldp_hypotheses(const std::vector<LdpStream>& streams) {
  if (streams.empty()) throw ValidationError("at least one stream required");
  for (std::size_t i = 0; i < streams.size(); ++i) {
    const auto& st = streams[i];
    const std::string who = "stream " + std::to_string(i);
    if (!(st.rate > 0.0)) throw ValidationError(who + ": Poisson rate must be positive");
    if (!(st.jump.mean() < st.threshold)) throw ValidationError(who + ": requires E[X] < c_i");
    if (!(st.jump.support_max() > st.threshold)) throw ValidationError(who + ": requires P(X > c_i) > 0");
  }
}

LdpLimit ldp_theoretical_rate(const std::vector<LdpStream>& streams) {
  check_ldp_hypotheses(streams);
  std::vector<StreamTerm> terms;
  double c = 0.0;
  for (const auto& st : streams) {
    terms.push_back({st.rate, &st.jump});
    c += st.threshold;
  }
  const auto m = minimize_compound_exponent(terms, c);
  return {m.s_star, m.exponent};
}

std::vector<LdpSample> ldp_empirical_rate(const std::vector<LdpStream>& streams,
                                          const std::vector<double>& horizons, std::int64_t n_samples,
                                          Rng& rng, LdpMethod method) {
  check_ldp_hypotheses(streams);
  if (n_samples < 1) throw ValidationError("n_samples must be at least 1");
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    if (!(horizons[k] > 0.0) || (k > 0 && !(horizons[k] > horizons[k - 1]))) {
      throw ValidationError("horizons must be positive and increasing");
    }
  }

  const double theta = method == LdpMethod::Tilted ? ldp_theoretical_rate(streams).s_star : 0.0;
  double c = 0.0;
  double log_mgf_sum = 0.0;  // sum_i lambda_i (E e^{theta X} - 1)
  std::vector<JumpDistribution> sampling;
  std::vector<double> mgf_at_theta;
  for (const auto& st : streams) {
    c += st.threshold;
    const double g = st.jump.mgf(theta);
    mgf_at_theta.push_back(g);
    log_mgf_sum += st.rate * (g - 1.0);
    sampling.push_back(st.jump.tilted(theta));
  }

  std::vector<LdpSample> out;
  for (double t : horizons) {
    LdpSample s;
    s.horizon = t;
    for (const auto& st : streams) {
      s.rates.push_back(st.rate);
      s.thresholds.push_back(st.threshold);
    }
    double weight_sum = 0.0;
    for (std::int64_t n = 0; n < n_samples; ++n) {
      double total = 0.0;
      for (std::size_t i = 0; i < streams.size(); ++i) {
        total += sample_compound_poisson(streams[i].rate * t * mgf_at_theta[i], sampling[i], rng);
      }
      if (total > c * t) {
        ++s.exceedances;
        weight_sum += std::exp(-theta * total + t * log_mgf_sum);
      }
    }
    s.p_hat = weight_sum / static_cast<double>(n_samples);
    s.value = s.p_hat > 0.0 ? std::log(s.p_hat) / t : -std::numeric_limits<double>::infinity();
    s.reliable = s.exceedances >= 50;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ebt
