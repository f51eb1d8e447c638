#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace ebt {

struct Arc {
  std::string id;
  std::string tail;
  std::string head;
  double capacity = 0.0;  // vehicle-equivalents per minute
};

struct Path {
  std::string id;
  std::vector<std::string> arcs;  // traversal order
  std::string origin;
  std::string destination;
};

/// Directed road graph with a fixed set of routes. Immutable once validated.
class RoadNetwork {
 public:
  RoadNetwork() = default;

  /// Validates capacities, id uniqueness and path connectivity; throws
  /// ValidationError naming the offending arc or path.
  RoadNetwork(std::vector<std::string> nodes, std::vector<Arc> arcs,
              std::vector<Path> paths);

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Arc>& arcs() const { return arcs_; }
  const std::vector<Path>& paths() const { return paths_; }

  std::size_t arc_count() const { return arcs_.size(); }
  std::size_t path_count() const { return paths_.size(); }

  std::size_t arc_index(const std::string& arc_id) const;
  std::size_t path_index(const std::string& path_id) const;
  const Arc& arc(const std::string& arc_id) const { return arcs_[arc_index(arc_id)]; }

  /// Arc indices of a path in traversal order.
  std::vector<std::size_t> path_arc_indices(std::size_t path) const;

  Eigen::VectorXd capacities() const;

 private:
  std::vector<std::string> nodes_;
  std::vector<Arc> arcs_;
  std::vector<Path> paths_;
};

/// Dense route-link incidence: entry (i, j) is 1 iff arc j lies on path i.
struct IncidenceMatrix {
  Eigen::MatrixXd B;  // paths x arcs
  std::vector<std::string> path_ids;
  std::vector<std::string> arc_ids;

  Eigen::Index paths() const { return B.rows(); }
  Eigen::Index arcs() const { return B.cols(); }
  bool uses(Eigen::Index path, Eigen::Index arc) const { return B(path, arc) != 0.0; }

  Eigen::Index arc_column(const std::string& arc_id) const;
  Eigen::Index path_row(const std::string& path_id) const;
};

IncidenceMatrix build_incidence(const RoadNetwork& network);

std::vector<std::string> arcs_of_path(const RoadNetwork& network, const std::string& path_id);

std::vector<std::string> paths_using_arc(const IncidenceMatrix& incidence, const std::string& arc_id);

/// Row indices i with B(i, arc) = 1.
std::vector<Eigen::Index> contributing_paths(const IncidenceMatrix& incidence, Eigen::Index arc);

/// m arcs a1..am in series with one end-to-end path P1; every arc gets
/// `capacity` except the last, which gets `last_capacity`.
RoadNetwork make_linear_network(std::size_t links, double capacity, double last_capacity);

}  // namespace ebt
