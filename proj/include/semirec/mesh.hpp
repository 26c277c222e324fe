#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

namespace semirec {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Disk {
  Point center;
  double radius = 0.0;
};

enum class NodeTag { Interior, OuterGamma, OuterRest, Cavity };
enum class EdgeTag { OuterGamma, OuterRest, Cavity };

struct BoundaryEdge {
  std::array<int, 2> nodes{};
  EdgeTag tag = EdgeTag::OuterRest;
};

/// Closed angular interval [start, end] in radians, traversed counter-clockwise.
/// A width of 2*pi or more covers the whole circle.
struct AngularArc {
  double start = 0.0;
  double end = 0.0;

  bool full() const;
  bool contains(double angle) const;
};

using Triangle = std::array<int, 3>;

/// Conforming P1 triangulation of a disk or of a disk with one circular cavity.
/// Immutable after construction; the constructor checks the topological
/// invariants and throws on violation.
class Mesh {
 public:
  Mesh(std::vector<Point> vertices, std::vector<Triangle> triangles,
       std::vector<BoundaryEdge> boundary_edges, std::vector<int> cell_regions = {});

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }
  const std::vector<NodeTag>& node_tags() const { return node_tags_; }
  const std::vector<int>& cell_regions() const { return cell_regions_; }

  /// Neighbouring triangle across the edge opposite local vertex i, or -1.
  const std::vector<std::array<int, 3>>& triangle_neighbors() const { return neighbors_; }

  double area(std::size_t t) const { return areas_[t]; }
  Point barycenter(std::size_t t) const;
  double total_area() const;
  double max_edge_length() const;
  std::size_t num_edges() const { return num_edges_; }

  bool has_cavity() const { return has_cavity_; }

  /// OuterGamma nodes in canonical order: counter-clockwise, starting at the
  /// first Gamma node that follows a non-Gamma outer node (or at angle 0 when
  /// the whole outer boundary is Gamma). All boundary data and DN vectors are
  /// indexed in this order.
  const std::vector<int>& gamma_nodes() const { return gamma_nodes_; }

  /// Position of each node inside gamma_nodes(), or -1.
  const std::vector<int>& gamma_index() const { return gamma_index_; }

  /// Nodes carrying a Dirichlet condition (every boundary node).
  bool is_constrained(std::size_t node) const { return node_tags_[node] != NodeTag::Interior; }

  /// Center used to measure boundary angles (centroid of the outer boundary nodes).
  Point outer_center() const { return outer_center_; }

  /// Angle of a point around outer_center(), in [0, 2*pi).
  double angle_of(Point p) const;

 private:
  void validate_and_index();

  std::vector<Point> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<BoundaryEdge> boundary_edges_;
  std::vector<int> cell_regions_;
  std::vector<NodeTag> node_tags_;
  std::vector<std::array<int, 3>> neighbors_;
  std::vector<double> areas_;
  std::vector<int> gamma_nodes_;
  std::vector<int> gamma_index_;
  Point outer_center_;
  std::size_t num_edges_ = 0;
  bool has_cavity_ = false;
};

/// Triangle index set of a mesh (sorted, unique), with O(1) membership.
class RegionMask {
 public:
  RegionMask() = default;
  RegionMask(const Mesh& mesh, std::vector<int> triangles);

  const std::vector<int>& triangles() const { return triangles_; }
  bool contains(std::size_t t) const { return t < member_.size() && member_[t]; }
  bool empty() const { return triangles_.empty(); }
  std::size_t size() const { return triangles_.size(); }
  double area(const Mesh& mesh) const;

 private:
  std::vector<int> triangles_;
  std::vector<bool> member_;
};

/// Per-triangle region labels 0..count-1.
struct Partition {
  std::vector<int> labels;
  int count = 0;
};

/// Meshes the disk of the given radius centred at the origin (or the region
/// between it and a circular cavity). Outer edges are tagged OuterRest,
/// cavity edges Cavity.
Mesh build_disk_mesh(double radius, std::optional<Disk> cavity, double h);

/// Retags the outer boundary: edges whose midpoint angle lies in `arc`
/// become OuterGamma, the others OuterRest.
Mesh tag_gamma(const Mesh& mesh, AngularArc arc);

/// All triangles whose barycenter lies in the disk.
RegionMask region_mask_from_disk(const Mesh& mesh, Disk disk);

/// Label 0 is the background; label i+1 marks triangles whose barycenter lies
/// in disks[i] (first match wins).
Partition partition_from_disks(const Mesh& mesh, const std::vector<Disk>& disks);

/// Partition from the mesh's stored cell_regions (labels compacted to 0..n-1).
Partition partition_from_cell_regions(const Mesh& mesh);

/// Connected components of the triangles flagged in `included`, using shared
/// edges as adjacency. Returns a component id per triangle (-1 when excluded)
/// and the number of components.
std::pair<std::vector<int>, int> triangle_components(const Mesh& mesh,
                                                     const std::vector<bool>& included);

/// Triangles with an OuterGamma edge, ascending.
std::vector<int> gamma_triangles(const Mesh& mesh);

void write_mesh(std::ostream& out, const Mesh& mesh);
Mesh read_mesh(std::istream& in);

}  // namespace semirec
