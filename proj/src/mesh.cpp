#include "semirec/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "semirec/error.hpp"

namespace semirec {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

// Bowyer-Watson with a scan over live triangles. Quadratic, which is fine for
// the few thousand points used here.
struct WorkTriangle {
  std::array<int, 3> v;
  long double cx, cy, r2;
};

WorkTriangle make_work_triangle(const std::vector<Point>& p, int a, int b, int c) {
  const long double ax = p[a].x, ay = p[a].y;
  const long double bx = p[b].x, by = p[b].y;
  const long double cx = p[c].x, cy = p[c].y;
  const long double d = 2.0L * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
  const long double a2 = ax * ax + ay * ay;
  const long double b2 = bx * bx + by * by;
  const long double c2 = cx * cx + cy * cy;
  const long double ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
  const long double uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
  const long double r2 = (ax - ux) * (ax - ux) + (ay - uy) * (ay - uy);
  if (cross(p[a], p[b], p[c]) > 0.0) return {{a, b, c}, ux, uy, r2};
  return {{a, c, b}, ux, uy, r2};
}

std::vector<Triangle> delaunay(std::vector<Point> points) {
  const int n = static_cast<int>(points.size());
  double xmin = points[0].x, xmax = xmin, ymin = points[0].y, ymax = ymin;
  for (const auto& q : points) {
    xmin = std::min(xmin, q.x);
    xmax = std::max(xmax, q.x);
    ymin = std::min(ymin, q.y);
    ymax = std::max(ymax, q.y);
  }
  const double span = std::max(xmax - xmin, ymax - ymin);
  const Point mid{0.5 * (xmin + xmax), 0.5 * (ymin + ymax)};
  points.push_back({mid.x - 100.0 * span, mid.y - 100.0 * span});
  points.push_back({mid.x + 100.0 * span, mid.y - 100.0 * span});
  points.push_back({mid.x, mid.y + 100.0 * span});

  std::vector<WorkTriangle> live{make_work_triangle(points, n, n + 1, n + 2)};
  std::vector<std::pair<std::uint64_t, std::array<int, 2>>> rim;
  std::vector<WorkTriangle> kept;

  for (int i = 0; i < n; ++i) {
    const long double px = points[i].x, py = points[i].y;
    rim.clear();
    kept.clear();
    kept.reserve(live.size() + 2);
    for (const auto& t : live) {
      const long double dx = px - t.cx, dy = py - t.cy;
      if (dx * dx + dy * dy < t.r2) {
        for (int e = 0; e < 3; ++e) {
          const int a = t.v[e], b = t.v[(e + 1) % 3];
          rim.push_back({edge_key(a, b), {a, b}});
        }
      } else {
        kept.push_back(t);
      }
    }
    // Edges shared by two bad triangles are interior to the cavity.
    std::sort(rim.begin(), rim.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    for (std::size_t k = 0; k < rim.size();) {
      std::size_t j = k;
      while (j < rim.size() && rim[j].first == rim[k].first) ++j;
      if (j - k == 1) kept.push_back(make_work_triangle(points, rim[k].second[0], rim[k].second[1], i));
      k = j;
    }
    live.swap(kept);
  }

  std::vector<Triangle> out;
  out.reserve(live.size());
  for (const auto& t : live) {
    if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
    out.push_back(t.v);
  }
  return out;
}

const char* node_tag_name(NodeTag tag) {
  switch (tag) {
    case NodeTag::Interior: return "INTERIOR";
    case NodeTag::OuterGamma: return "GAMMA";
    case NodeTag::OuterRest: return "OUTER";
    case NodeTag::Cavity: return "CAVITY";
  }
  return "INTERIOR";
}

const char* edge_tag_name(EdgeTag tag) {
  switch (tag) {
    case EdgeTag::OuterGamma: return "GAMMA";
    case EdgeTag::OuterRest: return "OUTER";
    case EdgeTag::Cavity: return "CAVITY";
  }
  return "OUTER";
}

}  // namespace

bool AngularArc::full() const { return end - start >= kTwoPi - 1e-12; }

bool AngularArc::contains(double angle) const {
  if (full()) return true;
  double offset = std::fmod(angle - start, kTwoPi);
  if (offset < 0.0) offset += kTwoPi;
  return offset <= end - start;
}

Mesh::Mesh(std::vector<Point> vertices, std::vector<Triangle> triangles,
           std::vector<BoundaryEdge> boundary_edges, std::vector<int> cell_regions)
    : vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      boundary_edges_(std::move(boundary_edges)),
      cell_regions_(std::move(cell_regions)) {
  if (cell_regions_.empty()) cell_regions_.assign(triangles_.size(), 0);
  validate_and_index();
}

void Mesh::validate_and_index() {
  const int nv = static_cast<int>(vertices_.size());
  if (triangles_.empty() || nv < 3) throw Error(ErrorCode::InvalidArgument, "mesh has no triangles");
  if (cell_regions_.size() != triangles_.size())
    throw Error(ErrorCode::DimensionMismatch, "cell_regions length differs from triangle count");

  areas_.resize(triangles_.size());
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    for (int v : tri)
      if (v < 0 || v >= nv) throw Error(ErrorCode::InvalidArgument, "triangle vertex index out of range");
    const double a2 = cross(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
    if (!(a2 > 0.0))
      throw Error(ErrorCode::InvalidArgument,
                  "triangle " + std::to_string(t) + " has non-positive signed area");
    areas_[t] = 0.5 * a2;
  }

  struct HalfEdge {
    std::uint64_t key;
    int tri;
    int local;
  };
  std::vector<HalfEdge> half;
  half.reserve(3 * triangles_.size());
  for (std::size_t t = 0; t < triangles_.size(); ++t)
    for (int i = 0; i < 3; ++i) {
      const int a = triangles_[t][(i + 1) % 3], b = triangles_[t][(i + 2) % 3];
      half.push_back({edge_key(a, b), static_cast<int>(t), i});
    }
  std::sort(half.begin(), half.end(), [](const HalfEdge& l, const HalfEdge& r) {
    return l.key < r.key || (l.key == r.key && l.tri < r.tri);
  });

  neighbors_.assign(triangles_.size(), {-1, -1, -1});
  std::vector<std::uint64_t> topo_boundary;
  num_edges_ = 0;
  for (std::size_t k = 0; k < half.size();) {
    std::size_t j = k;
    while (j < half.size() && half[j].key == half[k].key) ++j;
    ++num_edges_;
    if (j - k == 1) {
      topo_boundary.push_back(half[k].key);
    } else if (j - k == 2) {
      neighbors_[half[k].tri][half[k].local] = half[k + 1].tri;
      neighbors_[half[k + 1].tri][half[k + 1].local] = half[k].tri;
    } else {
      throw Error(ErrorCode::InvalidArgument, "edge shared by more than two triangles");
    }
    k = j;
  }

  std::vector<std::uint64_t> given;
  given.reserve(boundary_edges_.size());
  for (const auto& e : boundary_edges_) {
    for (int v : e.nodes)
      if (v < 0 || v >= nv) throw Error(ErrorCode::InvalidArgument, "boundary edge index out of range");
    given.push_back(edge_key(e.nodes[0], e.nodes[1]));
  }
  std::sort(given.begin(), given.end());
  if (std::adjacent_find(given.begin(), given.end()) != given.end())
    throw Error(ErrorCode::InvalidArgument, "duplicate boundary edge");
  if (given != topo_boundary)
    throw Error(ErrorCode::InvalidArgument,
                "tagged boundary edges do not match the topological boundary");

  node_tags_.assign(nv, NodeTag::Interior);
  std::vector<unsigned char> touches(nv, 0);  // bit 0 gamma, 1 rest, 2 cavity
  for (const auto& e : boundary_edges_) {
    const unsigned char bit = e.tag == EdgeTag::OuterGamma ? 1 : (e.tag == EdgeTag::OuterRest ? 2 : 4);
    touches[e.nodes[0]] |= bit;
    touches[e.nodes[1]] |= bit;
  }
  has_cavity_ = false;
  for (int v = 0; v < nv; ++v) {
    const unsigned char b = touches[v];
    if ((b & 4) && (b & 3))
      throw Error(ErrorCode::InvalidArgument, "node touches both the outer and the cavity boundary");
    if (b & 4) {
      node_tags_[v] = NodeTag::Cavity;
      has_cavity_ = true;
    } else if (b & 1) {
      node_tags_[v] = NodeTag::OuterGamma;
    } else if (b & 2) {
      node_tags_[v] = NodeTag::OuterRest;
    }
  }

  std::vector<int> outer;
  for (int v = 0; v < nv; ++v)
    if (node_tags_[v] == NodeTag::OuterGamma || node_tags_[v] == NodeTag::OuterRest) outer.push_back(v);
  if (outer.empty()) throw Error(ErrorCode::InvalidArgument, "mesh has no outer boundary");
  outer_center_ = {0.0, 0.0};
  for (int v : outer) {
    outer_center_.x += vertices_[v].x;
    outer_center_.y += vertices_[v].y;
  }
  outer_center_.x /= static_cast<double>(outer.size());
  outer_center_.y /= static_cast<double>(outer.size());

  std::stable_sort(outer.begin(), outer.end(),
                   [&](int a, int b) { return angle_of(vertices_[a]) < angle_of(vertices_[b]); });
  std::size_t start = 0;
  for (std::size_t i = 0; i < outer.size(); ++i) {
    const int prev = outer[(i + outer.size() - 1) % outer.size()];
    if (node_tags_[outer[i]] == NodeTag::OuterGamma && node_tags_[prev] != NodeTag::OuterGamma) {
      start = i;
      break;
    }
  }
  gamma_nodes_.clear();
  for (std::size_t i = 0; i < outer.size(); ++i) {
    const int v = outer[(start + i) % outer.size()];
    if (node_tags_[v] == NodeTag::OuterGamma) gamma_nodes_.push_back(v);
  }
  gamma_index_.assign(nv, -1);
  for (std::size_t i = 0; i < gamma_nodes_.size(); ++i) gamma_index_[gamma_nodes_[i]] = static_cast<int>(i);
}

Point Mesh::barycenter(std::size_t t) const {
  const auto& tri = triangles_[t];
  return {(vertices_[tri[0]].x + vertices_[tri[1]].x + vertices_[tri[2]].x) / 3.0,
          (vertices_[tri[0]].y + vertices_[tri[1]].y + vertices_[tri[2]].y) / 3.0};
}

double Mesh::total_area() const {
  double s = 0.0;
  for (double a : areas_) s += a;
  return s;
}

double Mesh::max_edge_length() const {
  double m = 0.0;
  for (const auto& tri : triangles_)
    for (int i = 0; i < 3; ++i) m = std::max(m, distance(vertices_[tri[i]], vertices_[tri[(i + 1) % 3]]));
  return m;
}

double Mesh::angle_of(Point p) const {
  double a = std::atan2(p.y - outer_center_.y, p.x - outer_center_.x);
  if (a < 0.0) a += kTwoPi;
  return a;
}

RegionMask::RegionMask(const Mesh& mesh, std::vector<int> triangles) : triangles_(std::move(triangles)) {
  std::sort(triangles_.begin(), triangles_.end());
  triangles_.erase(std::unique(triangles_.begin(), triangles_.end()), triangles_.end());
  member_.assign(mesh.num_triangles(), false);
  for (int t : triangles_) {
    if (t < 0 || static_cast<std::size_t>(t) >= mesh.num_triangles())
      throw Error(ErrorCode::InvalidArgument, "mask triangle index out of range");
    member_[t] = true;
  }
}

double RegionMask::area(const Mesh& mesh) const {
  double s = 0.0;
  for (int t : triangles_) s += mesh.area(t);
  return s;
}

Mesh build_disk_mesh(double radius, std::optional<Disk> cavity, double h) {
  if (!(h > 0.0) || !(radius > 0.0) || !(h < radius))
    throw Error(ErrorCode::DegenerateParameters, "require 0 < h < radius");
  if (cavity) {
    if (!(cavity->radius > 0.0)) throw Error(ErrorCode::DegenerateParameters, "cavity radius must be positive");
    const double reach = std::hypot(cavity->center.x, cavity->center.y) + cavity->radius;
    if (radius - reach < 2.0 * h)
      throw Error(ErrorCode::CavityTooClose, "cavity clearance to the outer boundary is below 2h");
  }

  // Lattice points keep this distance from both circles.
  constexpr double kClearance = 0.55;
  constexpr double kMaxEdgeFactor = 1.4;

  std::vector<Point> points;
  std::vector<unsigned char> kind;  // 0 lattice, 1 outer ring, 2 cavity ring, 3 cavity center
  const int n_outer = std::max(8, static_cast<int>(std::ceil(kTwoPi * radius / h - 1e-9)));
  for (int k = 0; k < n_outer; ++k) {
    const double t = kTwoPi * k / n_outer;
    points.push_back({radius * std::cos(t), radius * std::sin(t)});
    kind.push_back(1);
  }
  if (cavity) {
    const int n_cav = std::max(6, static_cast<int>(std::ceil(kTwoPi * cavity->radius / h - 1e-9)));
    for (int k = 0; k < n_cav; ++k) {
      const double t = kTwoPi * k / n_cav;
      points.push_back({cavity->center.x + cavity->radius * std::cos(t),
                        cavity->center.y + cavity->radius * std::sin(t)});
      kind.push_back(2);
    }
    points.push_back(cavity->center);
    kind.push_back(3);
  }
  const double dy = h * std::sqrt(3.0) / 2.0;
  const int rows = static_cast<int>(std::ceil(radius / dy)) + 1;
  const int cols = static_cast<int>(std::ceil(radius / h)) + 1;
  for (int j = -rows; j <= rows; ++j) {
    const double shift = (j % 2 != 0) ? 0.5 * h : 0.0;
    for (int i = -cols; i <= cols; ++i) {
      const Point q{i * h + shift, j * dy};
      if (std::hypot(q.x, q.y) > radius - kClearance * h) continue;
      if (cavity && distance(q, cavity->center) < cavity->radius + kClearance * h) continue;
      points.push_back(q);
      kind.push_back(0);
    }
  }

  std::vector<Triangle> tris;
  // Gaps between the boundary rings and the lattice leave a few long edges;
  // split them at their midpoints and triangulate again.
  for (int pass = 0;; ++pass) {
    tris = delaunay(points);
    if (cavity) {
      std::erase_if(tris, [&](const Triangle& t) {
        const Point b{(points[t[0]].x + points[t[1]].x + points[t[2]].x) / 3.0,
                      (points[t[0]].y + points[t[1]].y + points[t[2]].y) / 3.0};
        return distance(b, cavity->center) < cavity->radius;
      });
    }
    std::vector<std::uint64_t> long_edges;
    for (const auto& t : tris)
      for (int i = 0; i < 3; ++i) {
        const int a = t[i], b = t[(i + 1) % 3];
        if (distance(points[a], points[b]) > kMaxEdgeFactor * h) long_edges.push_back(edge_key(a, b));
      }
    std::sort(long_edges.begin(), long_edges.end());
    long_edges.erase(std::unique(long_edges.begin(), long_edges.end()), long_edges.end());
    if (long_edges.empty()) break;
    if (pass == 8) throw Error(ErrorCode::MeshGenerationFailed, "could not bound the edge length");
    for (std::uint64_t key : long_edges) {
      const auto a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
      points.push_back({0.5 * (points[a].x + points[b].x), 0.5 * (points[a].y + points[b].y)});
      kind.push_back(0);
    }
  }

  // Topological boundary and tag by which circle its endpoints sit on.
  std::vector<std::pair<std::uint64_t, std::array<int, 2>>> half;
  for (const auto& t : tris)
    for (int i = 0; i < 3; ++i) half.push_back({edge_key(t[i], t[(i + 1) % 3]), {t[i], t[(i + 1) % 3]}});
  std::sort(half.begin(), half.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
  std::vector<BoundaryEdge> edges;
  for (std::size_t k = 0; k < half.size();) {
    std::size_t j = k;
    while (j < half.size() && half[j].first == half[k].first) ++j;
    if (j - k == 1) {
      const auto [a, b] = half[k].second;
      if (kind[a] == 1 && kind[b] == 1) {
        edges.push_back({{a, b}, EdgeTag::OuterRest});
      } else if (kind[a] == 2 && kind[b] == 2) {
        edges.push_back({{a, b}, EdgeTag::Cavity});
      } else {
        throw Error(ErrorCode::MeshGenerationFailed, "boundary edge does not lie on a boundary circle");
      }
    }
    k = j;
  }

  // Drop unused points, then order vertices lexicographically.
  std::vector<int> used(points.size(), 0);
  for (const auto& t : tris)
    for (int v : t) used[v] = 1;
  std::vector<int> order;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (used[i]) order.push_back(static_cast<int>(i));
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return points[a].x < points[b].x || (points[a].x == points[b].x && points[a].y < points[b].y);
  });
  std::vector<int> remap(points.size(), -1);
  std::vector<Point> verts;
  verts.reserve(order.size());
  for (int old : order) {
    remap[old] = static_cast<int>(verts.size());
    verts.push_back(points[old]);
  }
  for (auto& t : tris)
    for (int& v : t) v = remap[v];
  for (auto& e : edges)
    for (int& v : e.nodes) v = remap[v];

  return Mesh(std::move(verts), std::move(tris), std::move(edges));
}

Mesh tag_gamma(const Mesh& mesh, AngularArc arc) {
  if (!(arc.end > arc.start)) throw Error(ErrorCode::EmptyGamma, "arc must have positive width");
  std::vector<BoundaryEdge> edges = mesh.boundary_edges();
  bool any = false;
  for (auto& e : edges) {
    if (e.tag == EdgeTag::Cavity) continue;
    const Point a = mesh.vertices()[e.nodes[0]], b = mesh.vertices()[e.nodes[1]];
    const Point mid{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
    const bool in = arc.contains(mesh.angle_of(mid));
    e.tag = in ? EdgeTag::OuterGamma : EdgeTag::OuterRest;
    any = any || in;
  }
  if (!any) throw Error(ErrorCode::EmptyGamma, "arc contains no outer boundary edge midpoint");
  return Mesh(mesh.vertices(), mesh.triangles(), std::move(edges), mesh.cell_regions());
}

RegionMask region_mask_from_disk(const Mesh& mesh, Disk disk) {
  std::vector<int> tris;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
    if (distance(mesh.barycenter(t), disk.center) <= disk.radius) tris.push_back(static_cast<int>(t));
  if (tris.empty()) throw Error(ErrorCode::EmptyMask, "disk contains no triangle barycenter");
  return RegionMask(mesh, std::move(tris));
}

Partition partition_from_disks(const Mesh& mesh, const std::vector<Disk>& disks) {
  Partition p;
  p.count = static_cast<int>(disks.size()) + 1;
  p.labels.assign(mesh.num_triangles(), 0);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Point b = mesh.barycenter(t);
    for (std::size_t i = 0; i < disks.size(); ++i)
      if (distance(b, disks[i].center) <= disks[i].radius) {
        p.labels[t] = static_cast<int>(i) + 1;
        break;
      }
  }
  return p;
}

Partition partition_from_cell_regions(const Mesh& mesh) {
  std::vector<int> labels = mesh.cell_regions();
  std::vector<int> distinct = labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  for (int& l : labels)
    l = static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), l) - distinct.begin());
  return {std::move(labels), static_cast<int>(distinct.size())};
}

std::pair<std::vector<int>, int> triangle_components(const Mesh& mesh, const std::vector<bool>& included) {
  std::vector<int> comp(mesh.num_triangles(), -1);
  int count = 0;
  std::vector<int> stack;
  for (std::size_t seed = 0; seed < mesh.num_triangles(); ++seed) {
    if (!included[seed] || comp[seed] >= 0) continue;
    comp[seed] = count;
    stack.push_back(static_cast<int>(seed));
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      for (int nb : mesh.triangle_neighbors()[t])
        if (nb >= 0 && included[nb] && comp[nb] < 0) {
          comp[nb] = count;
          stack.push_back(nb);
        }
    }
    ++count;
  }
  return {std::move(comp), count};
}

std::vector<int> gamma_triangles(const Mesh& mesh) {
  std::vector<std::uint64_t> gamma_edges;
  for (const auto& e : mesh.boundary_edges())
    if (e.tag == EdgeTag::OuterGamma) gamma_edges.push_back(edge_key(e.nodes[0], e.nodes[1]));
  std::sort(gamma_edges.begin(), gamma_edges.end());
  std::vector<int> out;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    for (int k = 0; k < 3; ++k)
      if (std::binary_search(gamma_edges.begin(), gamma_edges.end(), edge_key(tri[k], tri[(k + 1) % 3]))) {
        out.push_back(static_cast<int>(t));
        break;
      }
  }
  return out;
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  const auto old_precision = out.precision(17);
  out << "MESH2D v1\n";
  out << "V " << mesh.num_vertices() << '\n';
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
    out << mesh.vertices()[v].x << ' ' << mesh.vertices()[v].y << ' ' << node_tag_name(mesh.node_tags()[v]) << '\n';
  out << "T " << mesh.num_triangles() << '\n';
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    out << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << mesh.cell_regions()[t] << '\n';
  }
  out << "B " << mesh.boundary_edges().size() << '\n';
  for (const auto& e : mesh.boundary_edges())
    out << e.nodes[0] << ' ' << e.nodes[1] << ' ' << edge_tag_name(e.tag) << '\n';
  out.precision(old_precision);
}

Mesh read_mesh(std::istream& in) {
  auto fail = [](const std::string& msg) { return Error(ErrorCode::ParseError, "mesh file: " + msg); };
  auto expect_block = [&](const char* name) {
    std::string key;
    std::size_t n = 0;
    if (!(in >> key >> n) || key != name) throw fail(std::string("expected block ") + name);
    return n;
  };
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "MESH2D" || version != "v1") throw fail("missing MESH2D v1 header");

  const std::size_t nv = expect_block("V");
  std::vector<Point> verts(nv);
  std::vector<std::string> vtags(nv);
  for (std::size_t i = 0; i < nv; ++i)
    if (!(in >> verts[i].x >> verts[i].y >> vtags[i])) throw fail("truncated vertex block");

  const std::size_t nt = expect_block("T");
  std::vector<Triangle> tris(nt);
  std::vector<int> regions(nt);
  for (std::size_t i = 0; i < nt; ++i)
    if (!(in >> tris[i][0] >> tris[i][1] >> tris[i][2] >> regions[i])) throw fail("truncated triangle block");

  const std::size_t nb = expect_block("B");
  std::vector<BoundaryEdge> edges(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    std::string tag;
    if (!(in >> edges[i].nodes[0] >> edges[i].nodes[1] >> tag)) throw fail("truncated boundary block");
    if (tag == "GAMMA") edges[i].tag = EdgeTag::OuterGamma;
    else if (tag == "OUTER") edges[i].tag = EdgeTag::OuterRest;
    else if (tag == "CAVITY") edges[i].tag = EdgeTag::Cavity;
    else throw fail("unknown edge tag " + tag);
  }

  Mesh mesh(std::move(verts), std::move(tris), std::move(edges), std::move(regions));
  for (std::size_t i = 0; i < nv; ++i)
    if (vtags[i] != node_tag_name(mesh.node_tags()[i]))
      throw fail("node " + std::to_string(i) + " tag " + vtags[i] + " inconsistent with its boundary edges");
  return mesh;
}

}  // namespace semirec
