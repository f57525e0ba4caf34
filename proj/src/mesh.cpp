#include "vilab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>

#include "vilab/errors.hpp"
#include "vilab/quadrature.hpp"

namespace vilab {

namespace {

const LagrangeBasis1D& gll_basis(int degree) {
  static const LagrangeBasis1D deg1(gauss_lobatto(2).nodes);
  static const LagrangeBasis1D deg6(gauss_lobatto(7).nodes);
  return degree == 1 ? deg1 : deg6;
}

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

// gamma(s) . gamma'(s) for the unit-circle curve with node angles beta * tau.
double radial_slope(const std::array<double, 7>& tau, double beta, double s) {
  const auto& basis = gll_basis(6);
  std::array<double, 7> l{}, dl{};
  basis.eval(s, l, dl);
  double gx = 0, gy = 0, dgx = 0, dgy = 0;
  for (int k = 0; k < 7; ++k) {
    const double c = std::cos(beta * tau[k]), sn = std::sin(beta * tau[k]);
    gx += c * l[k];
    gy += sn * l[k];
    dgx += c * dl[k];
    dgy += sn * dl[k];
  }
  return gx * dgx + gy * dgy;
}

std::array<double, 7> solve_arc_parameters(double beta) {
  const auto& x = gll_basis(6).nodes();
  std::array<double, 7> tau;
  std::copy(x.begin(), x.end(), tau.begin());
  // Below this half-angle plain GLL interpolation is already at round-off.
  if (beta < 0.04) return tau;

  auto residual = [&](double t1, double t2) {
    std::array<double, 7> tt = {-1.0, -t1, -t2, 0.0, t2, t1, 1.0};
    return std::array<double, 2>{radial_slope(tt, beta, x[5]), radial_slope(tt, beta, x[4])};
  };
  double t1 = x[5], t2 = x[4];
  for (int it = 0; it < 50; ++it) {
    const auto r = residual(t1, t2);
    const double h = 1e-7;
    const auto r1 = residual(t1 + h, t2);
    const auto r2 = residual(t1, t2 + h);
    const double a = (r1[0] - r[0]) / h, b = (r2[0] - r[0]) / h;
    const double c = (r1[1] - r[1]) / h, d = (r2[1] - r[1]) / h;
    const double det = a * d - b * c;
    if (det == 0.0) break;
    const double d1 = (d * r[0] - b * r[1]) / det;
    const double d2 = (-c * r[0] + a * r[1]) / det;
    t1 -= d1;
    t2 -= d2;
    if (std::abs(d1) + std::abs(d2) < 1e-15) break;
  }
  tau = {-1.0, -t1, -t2, 0.0, t2, t1, 1.0};
  return tau;
}

Point2 on_circle(double radius, double angle) {
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace

std::array<double, 7> arc_node_parameters(double half_angle) {
  static std::mutex mtx;
  static std::map<double, std::array<double, 7>> cache;
  const double beta = std::abs(half_angle);
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(beta);
  if (it != cache.end()) return it->second;
  const auto tau = solve_arc_parameters(beta);
  cache.emplace(beta, tau);
  return tau;
}

const char* to_string(MapKind kind) {
  switch (kind) {
    case MapKind::Linear: return "linear";
    case MapKind::Bilinear: return "bilinear";
    case MapKind::Curved6: return "curved6";
  }
  return "?";
}

ElementMap::ElementMap(MapKind kind, std::vector<Point2> nodes) : kind_(kind), nodes_(std::move(nodes)) {
  const std::size_t n = static_cast<std::size_t>(degree() + 1);
  if (nodes_.size() != n * n) throw PreconditionError("ElementMap: wrong number of nodes");
}

ElementMap ElementMap::linear(const Point2& v0, const Point2& v1, const Point2& v3) {
  const Point2 v2 = v1 + v3 - v0;
  return ElementMap(MapKind::Linear, {v0, v1, v3, v2});
}

ElementMap ElementMap::bilinear(const std::array<Point2, 4>& v) {
  return ElementMap(MapKind::Bilinear, {v[0], v[1], v[3], v[2]});
}

ElementMap ElementMap::curved(const std::array<Point2, 4>& v, double radius) {
  const double th3 = std::atan2(v[3].y, v[3].x);
  const double th2 = std::atan2(v[2].y, v[2].x);
  const double beta = 0.5 * wrap_angle(th2 - th3);
  const double center = th3 + beta;
  const auto tau = arc_node_parameters(beta);
  const auto& xi = gll_basis(6).nodes();

  std::array<Point2, 7> arc;
  for (int k = 0; k < 7; ++k) arc[k] = on_circle(radius, center + beta * tau[k]);
  arc[0] = v[3];
  arc[6] = v[2];

  std::vector<Point2> nodes;
  nodes.reserve(49);
  for (int j = 0; j < 7; ++j) {
    const double eta = xi[j];
    for (int i = 0; i < 7; ++i) {
      const Point2 bottom = 0.5 * (1.0 - xi[i]) * v[0] + 0.5 * (1.0 + xi[i]) * v[1];
      nodes.push_back(0.5 * (1.0 - eta) * bottom + 0.5 * (1.0 + eta) * arc[i]);
    }
  }
  // Exact corners.
  nodes[0] = v[0];
  nodes[6] = v[1];
  nodes[42] = v[3];
  nodes[48] = v[2];
  return ElementMap(MapKind::Curved6, std::move(nodes));
}

void ElementMap::eval(const Point2& xhat, Point2& x, Mat2& jac) const {
  const int n = degree() + 1;
  const auto& basis = gll_basis(degree());
  std::array<double, 7> lx{}, dlx{}, ly{}, dly{};
  basis.eval(xhat.x, std::span<double>(lx.data(), n), std::span<double>(dlx.data(), n));
  basis.eval(xhat.y, std::span<double>(ly.data(), n), std::span<double>(dly.data(), n));
  x = {};
  jac = {};
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Point2& node = nodes_[j * n + i];
      const double v = lx[i] * ly[j];
      const double dx = dlx[i] * ly[j];
      const double dy = lx[i] * dly[j];
      x.x += v * node.x;
      x.y += v * node.y;
      jac.m[0][0] += dx * node.x;
      jac.m[0][1] += dy * node.x;
      jac.m[1][0] += dx * node.y;
      jac.m[1][1] += dy * node.y;
    }
  }
}

Point2 ElementMap::eval(const Point2& xhat) const {
  Point2 x;
  Mat2 j;
  eval(xhat, x, j);
  return x;
}

Mat2 ElementMap::jacobian(const Point2& xhat) const {
  if (kind_ == MapKind::Linear) {
    // Constant: F(xhat) = c + 0.5 (v1 - v0) xi + 0.5 (v3 - v0) eta.
    Mat2 j;
    j.m[0][0] = 0.5 * (nodes_[1].x - nodes_[0].x);
    j.m[1][0] = 0.5 * (nodes_[1].y - nodes_[0].y);
    j.m[0][1] = 0.5 * (nodes_[2].x - nodes_[0].x);
    j.m[1][1] = 0.5 * (nodes_[2].y - nodes_[0].y);
    return j;
  }
  Point2 x;
  Mat2 j;
  eval(xhat, x, j);
  return j;
}

int Mesh::midpoint(const EdgeKey& e) const {
  auto it = midpoints_.find(e);
  return it == midpoints_.end() ? -1 : it->second;
}

const EdgeKey* Mesh::parent_edge(const EdgeKey& e) const {
  auto it = edge_parent_.find(e);
  return it == edge_parent_.end() ? nullptr : &it->second;
}

double Mesh::element_diameter(std::size_t i) const {
  const ElementMap& map = elements_[i].map;
  constexpr int kPerEdge = 8;
  std::vector<Point2> pts;
  pts.reserve(4 * kPerEdge);
  for (int k = 0; k < kPerEdge; ++k) {
    const double t = -1.0 + 2.0 * k / kPerEdge;
    pts.push_back(map.eval({t, -1.0}));
    pts.push_back(map.eval({1.0, t}));
    pts.push_back(map.eval({-t, 1.0}));
    pts.push_back(map.eval({-1.0, -t}));
  }
  double d = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) d = std::max(d, (pts[a] - pts[b]).norm());
  return d;
}

double Mesh::max_diameter() const {
  double h = 0.0;
  for (std::size_t i = 0; i < elements_.size(); ++i) h = std::max(h, element_diameter(i));
  return h;
}

double Mesh::shape_metric(std::size_t i) const {
  static const TensorQuadRule rule = tensor_rule(7);
  const double h = element_diameter(i);
  double gamma = 0.0;
  for (const auto& pt : rule.points) {
    const Mat2 j = elements_[i].map.jacobian({pt[0], pt[1]});
    gamma = std::max(gamma, std::max(j.norm2() / h, h * j.inverse().norm2()));
  }
  return gamma;
}

double Mesh::area(int q) const {
  const TensorQuadRule rule = tensor_rule(q);
  double total = 0.0;
  for (const auto& el : elements_) {
    double a = 0.0;
    for (std::size_t k = 0; k < rule.size(); ++k)
      a += rule.weights[k] * el.map.jacobian({rule.points[k][0], rule.points[k][1]}).det();
    total += a;
  }
  return total;
}

double Mesh::boundary_deviation(int samples_per_edge) const {
  double dev = 0.0;
  for (const auto& el : elements_) {
    if (!is_boundary_edge(local_edge(el, 2)) || el.map.kind() != MapKind::Curved6) continue;
    for (int k = 0; k < samples_per_edge; ++k) {
      const double t = -1.0 + 2.0 * k / (samples_per_edge - 1);
      dev = std::max(dev, std::abs(el.map.eval({t, 1.0}).norm() - radius_));
    }
  }
  return dev;
}

double Mesh::min_jacobian(int q) const {
  const TensorQuadRule rule = tensor_rule(q);
  double m = std::numeric_limits<double>::infinity();
  for (const auto& el : elements_)
    for (const auto& pt : rule.points) m = std::min(m, el.map.jacobian({pt[0], pt[1]}).det());
  return m;
}

bool Mesh::is_one_irregular() const {
  for (const auto& el : elements_) {
    for (int k = 0; k < 4; ++k) {
      const EdgeKey e = local_edge(el, k);
      const int m = midpoint(e);
      if (m < 0) continue;
      if (midpoint(edge_key(e.first, m)) >= 0 || midpoint(edge_key(m, e.second)) >= 0) return false;
    }
  }
  return true;
}

void Mesh::dump(std::ostream& os) const {
  char buf[128];
  os << vertices_.size() << ' ' << elements_.size() << '\n';
  for (const auto& v : vertices_) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x, v.y);
    os << buf;
  }
  for (const auto& el : elements_) {
    os << to_string(el.map.kind()) << ' ' << el.v[0] << ' ' << el.v[1] << ' ' << el.v[2] << ' ' << el.v[3]
       << ' ' << el.level << '\n';
    bool first = true;
    for (const auto& n : el.map.nodes()) {
      std::snprintf(buf, sizeof buf, "%s%.17g %.17g", first ? "" : " ", n.x, n.y);
      os << buf;
      first = false;
    }
    os << '\n';
  }
}

Mesh build_initial_disk_mesh(double radius) {
  if (!(radius > 0.0)) throw PreconditionError("build_initial_disk_mesh: radius must be positive");
  // Block half-width and the inner ring radius relative to R = 1.5. The block
  // corners stay inside the unit circle and the chords of the inner ring stay
  // outside it, so the free boundary |x| = 1 crosses only bilinear elements.
  const double a = radius / 3.0;
  const double r1 = 0.8 * radius;

  Mesh mesh;
  mesh.radius_ = radius;
  auto add = [&](Point2 p, bool boundary) {
    mesh.vertices_.push_back(p);
    mesh.on_boundary_.push_back(boundary ? 1 : 0);
    return static_cast<int>(mesh.vertices_.size()) - 1;
  };

  // 3 x 3 block grid.
  std::array<std::array<int, 3>, 3> grid{};
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) grid[j][i] = add({a * (i - 1), a * (j - 1)}, false);
  // Block perimeter, counter-clockwise from angle 0.
  const std::array<int, 8> P = {grid[1][2], grid[2][2], grid[2][1], grid[2][0],
                                grid[1][0], grid[0][0], grid[0][1], grid[0][2]};
  std::array<int, 8> Q{}, S{};
  for (int k = 0; k < 8; ++k) Q[k] = add(on_circle(r1, k * std::numbers::pi / 4.0), false);
  for (int k = 0; k < 8; ++k) S[k] = add(on_circle(radius, k * std::numbers::pi / 4.0), true);

  auto vtx = [&](int i) { return mesh.vertices_[i]; };
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) {
      Element el;
      el.v = {grid[j][i], grid[j][i + 1], grid[j + 1][i + 1], grid[j + 1][i]};
      el.map = ElementMap::linear(vtx(el.v[0]), vtx(el.v[1]), vtx(el.v[3]));
      mesh.elements_.push_back(el);
    }
  for (int k = 0; k < 8; ++k) {
    const int k1 = (k + 1) % 8;
    Element el;
    el.v = {P[k1], P[k], Q[k], Q[k1]};
    el.map = ElementMap::bilinear({vtx(el.v[0]), vtx(el.v[1]), vtx(el.v[2]), vtx(el.v[3])});
    mesh.elements_.push_back(el);
  }
  for (int k = 0; k < 8; ++k) {
    const int k1 = (k + 1) % 8;
    Element el;
    el.v = {Q[k1], Q[k], S[k], S[k1]};
    el.map = ElementMap::curved({vtx(el.v[0]), vtx(el.v[1]), vtx(el.v[2]), vtx(el.v[3])}, radius);
    mesh.elements_.push_back(el);
    mesh.boundary_edges_.insert(edge_key(S[k], S[k1]));
  }
  return mesh;
}

Mesh square_mesh(const Point2& lower_left, double side) {
  if (!(side > 0.0)) throw PreconditionError("square_mesh: side must be positive");
  Mesh mesh;
  mesh.radius_ = std::numeric_limits<double>::infinity();
  const Point2 o = lower_left;
  mesh.vertices_ = {o, o + Point2{side, 0.0}, o + Point2{side, side}, o + Point2{0.0, side}};
  mesh.on_boundary_.assign(4, 0);
  Element el;
  el.v = {0, 1, 2, 3};
  el.map = ElementMap::linear(mesh.vertices_[0], mesh.vertices_[1], mesh.vertices_[3]);
  mesh.elements_.push_back(el);
  return mesh;
}

namespace {
const std::array<Point2, 4> kQuadrant = {{{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}}};
}  // namespace

class MeshRefiner {
 public:
  explicit MeshRefiner(const Mesh& mesh) : m_(mesh) {
    const std::size_t n = m_.elements_.size();
    alive_.assign(n, 1);
    origin_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      origin_[i] = static_cast<int>(i);
      m_.elements_[i].sub_scale = 1.0;
      m_.elements_[i].sub_offset = {0.0, 0.0};
      add_owner(static_cast<int>(i));
    }
  }

  void refine(int e) {
    if (!alive_[e]) return;
    for (int k = 0; k < 4; ++k) {
      const EdgeKey ek = Mesh::local_edge(m_.elements_[e], k);
      const EdgeKey* parent = m_.parent_edge(ek);
      if (!parent) continue;
      auto it = owners_.find(*parent);
      if (it == owners_.end()) continue;
      // A leaf still owns the parent edge: it is coarser than e.
      const std::vector<int> coarse = it->second;
      for (int c : coarse)
        if (c != e) refine(c);
    }
    split(e);
  }

  Mesh finish() {
    Mesh out;
    out.radius_ = m_.radius_;
    out.vertices_ = std::move(m_.vertices_);
    out.on_boundary_ = std::move(m_.on_boundary_);
    out.midpoints_ = std::move(m_.midpoints_);
    out.edge_parent_ = std::move(m_.edge_parent_);
    out.boundary_edges_ = std::move(m_.boundary_edges_);
    for (std::size_t i = 0; i < m_.elements_.size(); ++i) {
      if (!alive_[i]) continue;
      Element el = m_.elements_[i];
      el.parent = origin_[i];
      out.elements_.push_back(std::move(el));
    }
    return out;
  }

 private:
  void add_owner(int e) {
    for (int k = 0; k < 4; ++k) owners_[Mesh::local_edge(m_.elements_[e], k)].push_back(e);
  }
  void remove_owner(int e) {
    for (int k = 0; k < 4; ++k) {
      auto it = owners_.find(Mesh::local_edge(m_.elements_[e], k));
      auto& list = it->second;
      list.erase(std::remove(list.begin(), list.end(), e), list.end());
      if (list.empty()) owners_.erase(it);
    }
  }

  int split_edge(int a, int b) {
    const EdgeKey e = edge_key(a, b);
    if (int m = m_.midpoint(e); m >= 0) return m;
    const Point2& pa = m_.vertices_[a];
    const Point2& pb = m_.vertices_[b];
    const bool boundary = m_.is_boundary_edge(e);
    Point2 mid;
    if (boundary) {
      const double ta = std::atan2(pa.y, pa.x);
      const double tb = std::atan2(pb.y, pb.x);
      mid = on_circle(m_.radius_, ta + 0.5 * wrap_angle(tb - ta));
    } else {
      mid = 0.5 * (pa + pb);
    }
    const int m = static_cast<int>(m_.vertices_.size());
    m_.vertices_.push_back(mid);
    m_.on_boundary_.push_back(boundary ? 1 : 0);
    m_.midpoints_[e] = m;
    m_.edge_parent_[edge_key(a, m)] = e;
    m_.edge_parent_[edge_key(m, b)] = e;
    if (boundary) {
      m_.boundary_edges_.insert(edge_key(a, m));
      m_.boundary_edges_.insert(edge_key(m, b));
    }
    return m;
  }

  void split(int e) {
    const Element parent = m_.elements_[e];
    const auto& v = parent.v;
    const int m0 = split_edge(v[0], v[1]);
    const int m1 = split_edge(v[1], v[2]);
    const int m2 = split_edge(v[2], v[3]);
    const int m3 = split_edge(v[3], v[0]);
    const int c = static_cast<int>(m_.vertices_.size());
    m_.vertices_.push_back(parent.map.eval({0.0, 0.0}));
    m_.on_boundary_.push_back(0);

    remove_owner(e);
    alive_[e] = 0;

    const std::array<std::array<int, 4>, 4> children = {{
        {v[0], m0, c, m3},
        {m0, v[1], m1, c},
        {c, m1, v[2], m2},
        {m3, c, m2, v[3]},
    }};
    for (int k = 0; k < 4; ++k) {
      Element child;
      child.v = children[k];
      child.level = parent.level + 1;
      child.sub_scale = 0.5 * parent.sub_scale;
      child.sub_offset = parent.sub_offset + parent.sub_scale * kQuadrant[k];
      std::array<Point2, 4> p;
      for (int i = 0; i < 4; ++i) p[i] = m_.vertices_[child.v[i]];
      const bool touches_arc = parent.map.kind() == MapKind::Curved6 && k >= 2;
      switch (parent.map.kind()) {
        case MapKind::Linear: child.map = ElementMap::linear(p[0], p[1], p[3]); break;
        case MapKind::Bilinear: child.map = ElementMap::bilinear(p); break;
        case MapKind::Curved6:
          child.map = touches_arc ? ElementMap::curved(p, m_.radius_) : ElementMap::bilinear(p);
          break;
      }
      m_.elements_.push_back(std::move(child));
      alive_.push_back(1);
      origin_.push_back(origin_[e]);
      add_owner(static_cast<int>(m_.elements_.size()) - 1);
    }
  }

  Mesh m_;
  std::vector<char> alive_;
  std::vector<int> origin_;
  std::map<EdgeKey, std::vector<int>> owners_;
};

Mesh refine_adaptive(const Mesh& mesh, const std::vector<int>& marked) {
  MeshRefiner refiner(mesh);
  for (int e : marked) {
    if (e < 0 || static_cast<std::size_t>(e) >= mesh.num_elements())
      throw PreconditionError("refine_adaptive: marked element out of range");
    refiner.refine(e);
  }
  return refiner.finish();
}

Mesh refine_uniform(const Mesh& mesh) {
  std::vector<int> all(mesh.num_elements());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return refine_adaptive(mesh, all);
}

Mesh uniform_disk_mesh(double radius, int levels) {
  Mesh m = build_initial_disk_mesh(radius);
  for (int l = 0; l < levels; ++l) m = refine_uniform(m);
  return m;
}

}  // namespace vilab
