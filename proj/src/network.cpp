#include "ebtraffic/network.hpp"

#include "ebtraffic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace ebt {

RoadNetwork::RoadNetwork(std::vector<std::string> nodes, std::vector<Arc> arcs,
                         std::vector<Path> paths)
    : nodes_(std::move(nodes)), arcs_(std::move(arcs)), paths_(std::move(paths)) {
  if (nodes_.empty()) {
    std::unordered_set<std::string> seen;
    for (const auto& a : arcs_) {
      for (const auto* n : {&a.tail, &a.head}) {
        if (seen.insert(*n).second) nodes_.push_back(*n);
      }
    }
  }
  std::unordered_set<std::string> node_set(nodes_.begin(), nodes_.end());
  if (node_set.size() != nodes_.size()) throw ValidationError("duplicate node id");

  std::unordered_set<std::string> arc_ids;
  for (const auto& a : arcs_) {
    if (!arc_ids.insert(a.id).second) throw ValidationError("duplicate arc id '" + a.id + "'");
    if (!(a.capacity > 0.0) || !std::isfinite(a.capacity)) {
      throw ValidationError("arc '" + a.id + "': capacity must be a positive finite number");
    }
    if (!node_set.contains(a.tail) || !node_set.contains(a.head)) {
      throw ValidationError("arc '" + a.id + "': endpoint is not a declared node");
    }
  }

  std::unordered_set<std::string> path_ids;
  for (auto& p : paths_) {
    if (!path_ids.insert(p.id).second) throw ValidationError("duplicate path id '" + p.id + "'");
    if (p.arcs.empty()) throw ValidationError("path '" + p.id + "' has no arcs");
    std::unordered_set<std::string> used;
    for (std::size_t k = 0; k < p.arcs.size(); ++k) {
      if (!arc_ids.contains(p.arcs[k])) {
        throw ValidationError("path '" + p.id + "' references unknown arc '" + p.arcs[k] + "'");
      }
      if (!used.insert(p.arcs[k]).second) {
        throw ValidationError("path '" + p.id + "' repeats arc '" + p.arcs[k] + "'");
      }
      if (k > 0 && arc(p.arcs[k - 1]).head != arc(p.arcs[k]).tail) {
        throw ValidationError("path '" + p.id + "' is disconnected between '" + p.arcs[k - 1] +
                              "' and '" + p.arcs[k] + "'");
      }
    }
    const std::string& first_tail = arc(p.arcs.front()).tail;
    const std::string& last_head = arc(p.arcs.back()).head;
    if (p.origin.empty()) p.origin = first_tail;
    if (p.destination.empty()) p.destination = last_head;
    if (p.origin != first_tail || p.destination != last_head) {
      throw ValidationError("path '" + p.id + "': origin/destination disagree with its arcs");
    }
  }
}

std::size_t RoadNetwork::arc_index(const std::string& arc_id) const {
  auto it = std::find_if(arcs_.begin(), arcs_.end(), [&](const Arc& a) { return a.id == arc_id; });
  if (it == arcs_.end()) throw LookupError("unknown arc '" + arc_id + "'");
  return static_cast<std::size_t>(it - arcs_.begin());
}

std::size_t RoadNetwork::path_index(const std::string& path_id) const {
  auto it =
      std::find_if(paths_.begin(), paths_.end(), [&](const Path& p) { return p.id == path_id; });
  if (it == paths_.end()) throw LookupError("unknown path '" + path_id + "'");
  return static_cast<std::size_t>(it - paths_.begin());
}

std::vector<std::size_t> RoadNetwork::path_arc_indices(std::size_t path) const {
  std::vector<std::size_t> out;
  out.reserve(paths_.at(path).arcs.size());
  for (const auto& id : paths_[path].arcs) out.push_back(arc_index(id));
  return out;
}

Eigen::VectorXd RoadNetwork::capacities() const {
  Eigen::VectorXd c(static_cast<Eigen::Index>(arcs_.size()));
  for (std::size_t j = 0; j < arcs_.size(); ++j) c[static_cast<Eigen::Index>(j)] = arcs_[j].capacity;
  return c;
}

Eigen::Index IncidenceMatrix::arc_column(const std::string& arc_id) const {
  auto it = std::find(arc_ids.begin(), arc_ids.end(), arc_id);
  if (it == arc_ids.end()) throw LookupError("unknown arc '" + arc_id + "'");
  return static_cast<Eigen::Index>(it - arc_ids.begin());
}

Eigen::Index IncidenceMatrix::path_row(const std::string& path_id) const {
  auto it = std::find(path_ids.begin(), path_ids.end(), path_id);
  if (it == path_ids.end()) throw LookupError("unknown path '" + path_id + "'");
  return static_cast<Eigen::Index>(it - path_ids.begin());
}

IncidenceMatrix build_incidence(const RoadNetwork& network) {
  IncidenceMatrix inc;
  const auto I = static_cast<Eigen::Index>(network.path_count());
  const auto J = static_cast<Eigen::Index>(network.arc_count());
  inc.B = Eigen::MatrixXd::Zero(I, J);
  for (const auto& a : network.arcs()) inc.arc_ids.push_back(a.id);
  for (std::size_t i = 0; i < network.path_count(); ++i) {
    const auto& p = network.paths()[i];
    inc.path_ids.push_back(p.id);
    for (std::size_t k = 0; k < p.arcs.size(); ++k) {
      if (k > 0 && network.arc(p.arcs[k - 1]).head != network.arc(p.arcs[k]).tail) {
        throw ValidationError("path '" + p.id + "' is disconnected");
      }
      inc.B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(network.arc_index(p.arcs[k]))) = 1.0;
    }
  }
  return inc;
}

std::vector<std::string> arcs_of_path(const RoadNetwork& network, const std::string& path_id) {
  return network.paths()[network.path_index(path_id)].arcs;
}

std::vector<Eigen::Index> contributing_paths(const IncidenceMatrix& incidence, Eigen::Index arc) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < incidence.paths(); ++i) {
    if (incidence.uses(i, arc)) rows.push_back(i);
  }
  return rows;
}

std::vector<std::string> paths_using_arc(const IncidenceMatrix& incidence, const std::string& arc_id) {
  std::vector<std::string> ids;
  for (Eigen::Index i : contributing_paths(incidence, incidence.arc_column(arc_id))) {
    ids.push_back(incidence.path_ids[static_cast<std::size_t>(i)]);
  }
  return ids;
}

RoadNetwork make_linear_network(std::size_t links, double capacity, double last_capacity) {
  if (links == 0) throw ValidationError("linear network needs at least one link");
  std::vector<std::string> nodes;
  std::vector<Arc> arcs;
  Path path{"P1", {}, {}, {}};
  for (std::size_t k = 0; k <= links; ++k) nodes.push_back("n" + std::to_string(k));
  for (std::size_t k = 0; k < links; ++k) {
    std::string id = "a" + std::to_string(k + 1);
    arcs.push_back({id, nodes[k], nodes[k + 1], k + 1 == links ? last_capacity : capacity});
    path.arcs.push_back(id);
  }
  return RoadNetwork(std::move(nodes), std::move(arcs), {std::move(path)});
}

}  // namespace ebt
