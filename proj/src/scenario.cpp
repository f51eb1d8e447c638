#include "ebtraffic/scenario.hpp"

#include "ebtraffic/errors.hpp"

#include <algorithm>
#include <fstream>

namespace ebt {
namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(where + ": missing \"" + key + "\"");
  }
  return obj.at(key);
}

double require_number(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) throw ValidationError(where + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw ValidationError(where + ": \"" + key + "\" must be a string");
  return v.get<std::string>();
}

template <class T, class F>
T with_context(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  } catch (const json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

ServiceParams service_from_json(const json& j, double capacity, const std::string& where) {
  ServiceParams p = ServiceParams::for_capacity(capacity);
  if (!j.is_object()) throw ValidationError(where + ": \"service\" must be an object");
  p.free_flow = j.value("free_flow", p.free_flow);
  p.jam = j.value("jam", p.jam);
  p.floor = j.value("floor", p.floor);
  p.inflow_limit = j.value("inflow_limit", p.inflow_limit);
  with_context<int>(where, [&] {
    p.validate();
    return 0;
  });
  return p;
}

json service_to_json(const ServiceParams& p) {
  return {{"free_flow", p.free_flow}, {"jam", p.jam}, {"floor", p.floor}, {"inflow_limit", p.inflow_limit}};
}

}  // namespace

TrafficStreamSet Scenario::traffic() const {
  Eigen::VectorXd rates(static_cast<Eigen::Index>(streams.size()));
  std::vector<JumpDistribution> jumps;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    rates[static_cast<Eigen::Index>(i)] = streams[i].rate;
    jumps.push_back(streams[i].jump);
  }
  return TrafficStreamSet(std::move(rates), std::move(jumps));
}

SimulationConfig Scenario::simulation(const PolicySpec& policy) const {
  SimulationConfig c;
  c.network = network;
  for (const auto& s : streams) {
    c.jumps.push_back(s.jump);
    c.demand.push_back(s.demand);
  }
  c.service = service;
  c.policy = policy;
  c.delta = delta;
  c.horizon = horizon;
  c.replications = replications;
  c.seed = seed;
  return c;
}

Scenario Scenario::with_linear_links(std::size_t links) const {
  LinearTemplate t;
  if (linear) {
    t = *linear;
  } else if (network.arc_count() == 1 && network.path_count() == 1) {
    t.last_capacity = network.arcs().front().capacity;
  } else {
    throw ValidationError("scenario '" + name + "' is neither a linear template nor a single link");
  }
  t.links = links;
  Scenario s = *this;
  s.linear = t;
  s.network = make_linear_network(t.links, t.capacity, t.last_capacity);
  s.service.clear();
  for (const auto& a : s.network.arcs()) s.service.push_back(ServiceParams::for_capacity(a.capacity));
  if (s.streams.size() != 1) throw ValidationError("linear networks carry exactly one stream");
  s.streams.front().path = "P1";
  return s;
}

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("scenario: top level must be an object");
  Scenario s;
  s.name = j.value("name", s.name);

  // network
  const json& net = require(j, "network", "scenario");
  std::vector<json> service_overrides;
  if (net.contains("linear")) {
    const json& lin = net.at("linear");
    LinearTemplate t;
    t.links = static_cast<std::size_t>(require_number(lin, "links", "network.linear"));
    t.capacity = lin.value("capacity", t.capacity);
    t.last_capacity = lin.value("last_capacity", t.last_capacity);
    s.linear = t;
    s.network = with_context<RoadNetwork>("network.linear",
                                          [&] { return make_linear_network(t.links, t.capacity, t.last_capacity); });
    for (const auto& a : s.network.arcs()) s.service.push_back(ServiceParams::for_capacity(a.capacity));
  } else {
    std::vector<Arc> arcs;
    const json& ja = require(net, "arcs", "network");
    if (!ja.is_array() || ja.empty()) throw ValidationError("network: \"arcs\" must be a non-empty array");
    for (std::size_t k = 0; k < ja.size(); ++k) {
      const std::string where = "network.arcs[" + std::to_string(k) + "]";
      Arc a;
      a.id = require_string(ja[k], "id", where);
      const std::string named = where + " ('" + a.id + "')";
      a.tail = require_string(ja[k], "from", named);
      a.head = require_string(ja[k], "to", named);
      a.capacity = require_number(ja[k], "capacity", named);
      s.service.push_back(ja[k].contains("service") ? service_from_json(ja[k].at("service"), a.capacity, named)
                                                    : ServiceParams::for_capacity(a.capacity));
      arcs.push_back(std::move(a));
    }
    std::vector<Path> paths;
    const json& jp = require(net, "paths", "network");
    if (!jp.is_array() || jp.empty()) throw ValidationError("network: \"paths\" must be a non-empty array");
    for (std::size_t k = 0; k < jp.size(); ++k) {
      const std::string where = "network.paths[" + std::to_string(k) + "]";
      Path p;
      p.id = require_string(jp[k], "id", where);
      p.arcs = with_context<std::vector<std::string>>(where, [&] {
        return require(jp[k], "arcs", where).get<std::vector<std::string>>();
      });
      paths.push_back(std::move(p));
    }
    std::vector<std::string> nodes = net.value("nodes", std::vector<std::string>{});
    s.network = with_context<RoadNetwork>("network", [&] {
      return RoadNetwork(std::move(nodes), std::move(arcs), std::move(paths));
    });
  }

  // simulation parameters
  if (j.contains("simulation")) {
    const json& sim = j.at("simulation");
    s.delta = sim.value("delta", s.delta);
    s.replications = sim.value("replications", s.replications);
    s.seed = sim.value("seed", s.seed);
    if (sim.contains("horizon")) s.horizon = require_number(sim, "horizon", "simulation");
  }
  if (!(s.delta > 0.0)) throw ValidationError("simulation: \"delta\" must be positive");
  if (s.replications < 1) throw ValidationError("simulation: \"replications\" must be at least 1");

  // streams, one per path
  const json& js = require(j, "streams", "scenario");
  if (!js.is_array()) throw ValidationError("scenario: \"streams\" must be an array");
  s.streams.resize(s.network.path_count());
  std::vector<bool> seen(s.network.path_count(), false);
  for (std::size_t k = 0; k < js.size(); ++k) {
    const std::string where = "streams[" + std::to_string(k) + "]";
    StreamSpec st;
    st.path = js[k].value("path", s.network.path_count() == 1 ? s.network.paths().front().id : std::string{});
    const std::size_t idx = with_context<std::size_t>(where, [&] { return s.network.path_index(st.path); });
    if (seen[idx]) throw ValidationError(where + ": second stream for path '" + st.path + "'");
    seen[idx] = true;
    st.rate = js[k].value("rate", 0.0);
    if (!(st.rate >= 0.0)) throw ValidationError(where + ": \"rate\" must be non-negative");
    st.jump = with_context<JumpDistribution>(where + ".jump", [&] {
      return require(js[k], "jump", where).get<JumpDistribution>();
    });
    st.demand = js[k].contains("demand")
                    ? with_context<DemandCurve>(where + ".demand", [&] { return js[k].at("demand").get<DemandCurve>(); })
                    : rush_hour_curve();
    s.streams[idx] = std::move(st);
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw ValidationError("streams: no stream for path '" + s.network.paths()[i].id + "'");
  }
  if (!(j.contains("simulation") && j.at("simulation").contains("horizon"))) {
    s.horizon = 0.0;
    for (const auto& st : s.streams) s.horizon = std::max(s.horizon, st.demand.horizon());
  }

  // policies
  if (j.contains("policies")) {
    for (const auto& p : j.at("policies")) {
      s.policies.push_back(with_context<PolicySpec>("policies", [&] { return parse_policy(p.get<std::string>()); }));
    }
  } else {
    s.policies = {PolicySpec::nc(), PolicySpec::en(), PolicySpec::rn_from_gamma(4.0),
                  PolicySpec::eb(GammaSpec::of(4.0))};
  }
  s.output_dir = j.value("output_dir", s.output_dir);

  with_context<int>("scenario '" + s.name + "'", [&] {
    s.simulation(PolicySpec::nc()).validate();
    return 0;
  });
  return s;
}

json scenario_to_json(const Scenario& s) {
  json net;
  if (s.linear) {
    net = {{"linear",
            {{"links", s.linear->links}, {"capacity", s.linear->capacity}, {"last_capacity", s.linear->last_capacity}}}};
  } else {
    json arcs = json::array();
    for (std::size_t j = 0; j < s.network.arc_count(); ++j) {
      const auto& a = s.network.arcs()[j];
      arcs.push_back({{"id", a.id}, {"from", a.tail}, {"to", a.head}, {"capacity", a.capacity},
                      {"service", service_to_json(s.service[j])}});
    }
    json paths = json::array();
    for (const auto& p : s.network.paths()) paths.push_back({{"id", p.id}, {"arcs", p.arcs}});
    net = {{"nodes", s.network.nodes()}, {"arcs", arcs}, {"paths", paths}};
  }
  json streams = json::array();
  for (const auto& st : s.streams) {
    streams.push_back({{"path", st.path}, {"rate", st.rate}, {"jump", st.jump}, {"demand", st.demand}});
  }
  json policies = json::array();
  for (const auto& p : s.policies) policies.push_back(p.to_string());
  return {{"name", s.name},
          {"network", net},
          {"streams", streams},
          {"policies", policies},
          {"simulation",
           {{"delta", s.delta}, {"horizon", s.horizon}, {"replications", s.replications}, {"seed", s.seed}}},
          {"output_dir", s.output_dir}};
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open scenario file '" + file.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("scenario file '" + file.string() + "' is not valid JSON: " + e.what());
  }
  return scenario_from_json(j);
}

void save_scenario(const Scenario& s, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  out << scenario_to_json(s).dump(2) << '\n';
}

bool operator==(const Scenario& a, const Scenario& b) { return scenario_to_json(a) == scenario_to_json(b); }

std::string scenario_schema_help() {
  return R"(Scenario file (JSON):
{
  "name": "exp1",
  "network": {
    "arcs":  [{"id": "a1", "from": "n0", "to": "n1", "capacity": 50,
               "service": {"free_flow": 50, "jam": 100, "floor": 10, "inflow_limit": 90}}],
    "paths": [{"id": "P1", "arcs": ["a1"]}]
  },
    -- or --
  "network": {"linear": {"links": 5, "capacity": 100, "last_capacity": 50}},
  "streams": [{"path": "P1", "rate": 0,
               "jump": {"type": "hyperexponential", "p": [0.7, 0.3], "lambda": [1.5, 0.5625]},
               "demand": {"knots": [[0, 20], [60, 20], [120, 55], [180, 20], [240, 20]], "horizon": 240}}],
  "policies": ["nc", "en", "rn:gamma=4", "eb:gamma=4"],
  "simulation": {"delta": 1, "horizon": 240, "replications": 10000, "seed": 42},
  "output_dir": "results"
}
jump types: deterministic{value}, exponential{rate}, hyperexponential{p, lambda},
            mixture{components: [{weight, dist}]}
policies:   nc | en | rn:alpha=<a> | rn:gamma=<g> | eb:gamma=<g> | eb:gamma_map={a1:<g>,...}
defaults:   service = (C, 2C, 10, 2C-10), rate = 0, demand = rush-hour curve,
            policies = nc, en, rn:gamma=4, eb:gamma=4
)";
}

}  // namespace ebt
