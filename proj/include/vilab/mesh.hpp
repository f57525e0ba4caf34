#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "vilab/geometry.hpp"

namespace vilab {

enum class MapKind { Linear, Bilinear, Curved6 };

const char* to_string(MapKind kind);

/// Tensor-product polynomial map F_D : [-1,1]^2 -> R^2 in Lagrange form on
/// Gauss-Lobatto nodes. Linear and Bilinear maps carry the 2x2 corner
/// nodes; Curved6 carries 7x7 nodes. Nodes are lexicographic with the
/// first reference coordinate running fastest.
class ElementMap {
 public:
  ElementMap() = default;
  ElementMap(MapKind kind, std::vector<Point2> nodes);

  /// Affine map through v0, v1, v3 (v2 = v1 + v3 - v0 is implied).
  static ElementMap linear(const Point2& v0, const Point2& v1, const Point2& v3);
  static ElementMap bilinear(const std::array<Point2, 4>& v);
  /// Straight edges v0-v1, v1-v2, v3-v0; edge v2-v3 follows the circle of
  /// radius R centered at the origin.
  static ElementMap curved(const std::array<Point2, 4>& v, double radius);

  MapKind kind() const { return kind_; }
  int degree() const { return kind_ == MapKind::Curved6 ? 6 : 1; }
  const std::vector<Point2>& nodes() const { return nodes_; }

  Point2 eval(const Point2& xhat) const;
  Mat2 jacobian(const Point2& xhat) const;
  /// Value and Jacobian in one pass.
  void eval(const Point2& xhat, Point2& x, Mat2& jac) const;

 private:
  MapKind kind_ = MapKind::Bilinear;
  std::vector<Point2> nodes_;
};

using EdgeKey = std::pair<int, int>;

inline EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

/// Quadrilateral. Local edges: 0 = (v0,v1), 1 = (v1,v2), 2 = (v2,v3),
/// 3 = (v3,v0). A Curved6 element has its boundary arc on edge 2.
struct Element {
  std::array<int, 4> v{};
  ElementMap map;
  int level = 0;
  /// Index of the element in the mesh this one was refined from, or -1.
  int parent = -1;
  /// Placement inside the parent's reference square:
  /// xhat_parent = sub_offset + sub_scale * xhat.
  double sub_scale = 1.0;
  Point2 sub_offset{0.0, 0.0};
};

struct MeshOptions {
  double gamma_bound = 20.0;
};

/// Leaf mesh of the disk {|x| <= R}. Refinement keeps the edge hierarchy
/// so hanging nodes and 1-irregularity can be tracked.
class Mesh {
 public:
  double radius() const { return radius_; }
  const std::vector<Point2>& vertices() const { return vertices_; }
  const std::vector<Element>& elements() const { return elements_; }
  std::size_t num_elements() const { return elements_.size(); }

  bool vertex_on_boundary(int v) const { return on_boundary_[v] != 0; }
  bool is_boundary_edge(const EdgeKey& e) const { return boundary_edges_.count(e) != 0; }

  /// Midpoint vertex of an edge that has been split, or -1.
  int midpoint(const EdgeKey& e) const;

  /// Edge the given edge was split from, if any.
  const EdgeKey* parent_edge(const EdgeKey& e) const;

  static EdgeKey local_edge(const Element& el, int k) {
    return edge_key(el.v[k], el.v[(k + 1) % 4]);
  }

  /// Diameter of element i (sampled along its boundary).
  double element_diameter(std::size_t i) const;
  double max_diameter() const;

  /// gamma_D = max over Gauss points of max(h^-1 |grad F|, h |grad F^-1|).
  double shape_metric(std::size_t i) const;

  /// sum of element areas by tensor Gauss quadrature of det grad F_D.
  double area(int q = 7) const;

  /// Max over boundary edges and sample points of | |x| - R |.
  double boundary_deviation(int samples_per_edge = 13) const;

  /// Min of det grad F_D over all elements and q x q Gauss points.
  double min_jacobian(int q = 7) const;

  /// True if no edge carries more than one hanging node.
  bool is_one_irregular() const;

  void dump(std::ostream& os) const;

 private:
  friend Mesh build_initial_disk_mesh(double radius);
  friend Mesh square_mesh(const Point2& lower_left, double side);
  friend class MeshRefiner;

  double radius_ = 1.0;
  std::vector<Point2> vertices_;
  std::vector<char> on_boundary_;
  std::vector<Element> elements_;
  std::map<EdgeKey, int> midpoints_;
  std::map<EdgeKey, EdgeKey> edge_parent_;
  std::set<EdgeKey> boundary_edges_;
};

/// 2x2 Cartesian block (Linear), an inner ring of 8 Bilinear elements and
/// an outer ring of 8 Curved6 elements: 20 elements in total.
Mesh build_initial_disk_mesh(double radius);

/// One Linear element [x0, x0 + s] x [y0, y0 + s] without Dirichlet boundary
/// (element-level checks).
Mesh square_mesh(const Point2& lower_left, double side);

/// Split every element 1 -> 4.
Mesh refine_uniform(const Mesh& mesh);

/// Split the marked elements 1 -> 4, plus whatever is needed to keep the
/// mesh 1-irregular.
Mesh refine_adaptive(const Mesh& mesh, const std::vector<int>& marked);

/// Convenience: R = 1.5 initial mesh refined `levels` times uniformly.
Mesh uniform_disk_mesh(double radius, int levels);

/// Angular node parameters tau_k in [-1, 1] for a degree-6 curve through
/// 7 points of a circular arc of half-angle `half_angle`, chosen so that the
/// polynomial curve is tangent to the circle at every interior node.
std::array<double, 7> arc_node_parameters(double half_angle);

}  // namespace vilab
