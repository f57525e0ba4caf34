#include <algorithm>
#include <array>
#include <map>
#include <functional>
#include <set>

#include "vilab/errors.hpp"
#include "vilab/fem.hpp"

namespace vilab {

namespace {

// Position n (0..p, measured from local vertex A) on the edge A -> B mapped to
// the interior index of the globally oriented edge (lo -> hi).
int global_edge_slot(int n, int p, int a, int b) { return (a < b) ? n - 1 : p - n - 1; }

}  // namespace

FESpace::FESpace(std::shared_ptr<const Mesh> mesh, int p)
    : mesh_(std::move(mesh)), p_(p), basis_(p >= 1 ? gauss_lobatto(p + 1).nodes : std::vector<double>{}) {
  if (p < 1) throw PreconditionError("FESpace: degree must be >= 1");
  const Mesh& m = *mesh_;
  const int n1 = p + 1;
  const auto& xi = basis_.nodes();

  std::map<int, int> vertex_dof;
  std::map<EdgeKey, int> edge_first;  // first interior DOF of an edge
  auto new_dof = [&](const Point2& pos, DofKind kind) {
    nodes_.push_back(pos);
    kind_.push_back(kind);
    return static_cast<int>(kind_.size()) - 1;
  };

  elem_dofs_.resize(m.num_elements());
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const Element& el = m.elements()[e];
    auto& dofs = elem_dofs_[e];
    dofs.assign(n1 * n1, -1);
    auto at = [&](int i, int j) -> int& { return dofs[j * n1 + i]; };

    // Corners.
    const std::array<std::array<int, 2>, 4> corner = {{{0, 0}, {p, 0}, {p, p}, {0, p}}};
    for (int k = 0; k < 4; ++k) {
      const int v = el.v[k];
      auto it = vertex_dof.find(v);
      if (it == vertex_dof.end()) {
        const DofKind kind = m.vertex_on_boundary(v) ? DofKind::Dirichlet : DofKind::Free;
        it = vertex_dof.emplace(v, new_dof(m.vertices()[v], kind)).first;
      }
      at(corner[k][0], corner[k][1]) = it->second;
    }
    // Edge interiors. Local node (i, j) for position n from the edge start.
    auto edge_node = [&](int k, int n) -> std::array<int, 2> {
      switch (k) {
        case 0: return {n, 0};
        case 1: return {p, n};
        case 2: return {p - n, p};
        default: return {0, p - n};
      }
    };
    for (int k = 0; k < 4 && p > 1; ++k) {
      const int a = el.v[k], b = el.v[(k + 1) % 4];
      const EdgeKey key = edge_key(a, b);
      auto it = edge_first.find(key);
      if (it == edge_first.end()) {
        const DofKind kind = m.is_boundary_edge(key) ? DofKind::Dirichlet : DofKind::Free;
        const int first = static_cast<int>(kind_.size());
        for (int s = 0; s < p - 1; ++s) {
          // Slot s of the globally oriented edge sits at position n from a.
          const int n = (a < b) ? s + 1 : p - 1 - s;
          const auto ij = edge_node(k, n);
          new_dof(el.map.eval({xi[ij[0]], xi[ij[1]]}), kind);
        }
        it = edge_first.emplace(key, first).first;
      }
      for (int n = 1; n < p; ++n) {
        const auto ij = edge_node(k, n);
        at(ij[0], ij[1]) = it->second + global_edge_slot(n, p, a, b);
      }
    }
    for (int j = 1; j < p; ++j)
      for (int i = 1; i < p; ++i) at(i, j) = new_dof(el.map.eval({xi[i], xi[j]}), DofKind::Free);
  }

  // Hanging constraints: every split edge still owned by a leaf is the coarse
  // side of a refined neighbor.
  std::vector<std::vector<std::pair<int, double>>> masters(kind_.size());
  std::set<EdgeKey> done;
  std::vector<double> lv(n1), ld(n1);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const Element& el = m.elements()[e];
    for (int k = 0; k < 4; ++k) {
      const EdgeKey key = Mesh::local_edge(el, k);
      const int mid = m.midpoint(key);
      if (mid < 0 || !done.insert(key).second) continue;
      const int a = key.first, b = key.second;
      // Coarse trace parameterized by t in [-1, 1] from a to b.
      std::vector<int> coarse(n1);
      coarse[0] = vertex_dof.at(a);
      coarse[p] = vertex_dof.at(b);
      if (p > 1) {
        const int first = edge_first.at(key);
        for (int s = 0; s < p - 1; ++s) coarse[s + 1] = first + s;
      }
      auto constrain = [&](int dof, double t) {
        basis_.eval(t, lv, ld);
        kind_[dof] = DofKind::Hanging;
        masters[dof].clear();
        for (int c = 0; c < n1; ++c)
          if (lv[c] != 0.0) masters[dof].emplace_back(coarse[c], lv[c]);
      };
      constrain(vertex_dof.at(mid), 0.0);
      if (p > 1) {
        const std::array<std::pair<int, double>, 3> tpos = {{{a, -1.0}, {mid, 0.0}, {b, 1.0}}};
        for (int h = 0; h < 2; ++h) {
          const auto [u, tu] = tpos[h];
          const auto [w, tw] = tpos[h + 1];
          const EdgeKey half = edge_key(u, w);
          const int first = edge_first.at(half);
          const double t_lo = (u < w) ? tu : tw;
          const double t_hi = (u < w) ? tw : tu;
          for (int s = 0; s < p - 1; ++s) constrain(first + s, t_lo + 0.5 * (xi[s + 1] + 1.0) * (t_hi - t_lo));
        }
      }
    }
  }

  free_index_.assign(kind_.size(), -1);
  for (std::size_t t = 0; t < kind_.size(); ++t) {
    if (kind_[t] != DofKind::Free) continue;
    free_index_[t] = static_cast<int>(free_to_total_.size());
    free_to_total_.push_back(static_cast<int>(t));
  }

  // Resolve constraint chains (a master may itself hang on a coarser edge).
  expansion_.assign(kind_.size(), {});
  std::vector<char> state(kind_.size(), 0);  // 0 = todo, 1 = in progress, 2 = done
  std::function<void(int)> resolve = [&](int t) {
    if (state[t] == 2) return;
    if (state[t] == 1) throw PreconditionError("FESpace: cyclic hanging-node constraints");
    state[t] = 1;
    auto& out = expansion_[t];
    if (kind_[t] == DofKind::Free) {
      out = {{free_index_[t], 1.0}};
    } else if (kind_[t] == DofKind::Hanging) {
      std::map<int, double> acc;
      for (const auto& [mt, w] : masters[t]) {
        resolve(mt);
        for (const auto& [fi, wf] : expansion_[mt]) acc[fi] += w * wf;
      }
      for (const auto& [fi, w] : acc)
        if (w != 0.0) out.emplace_back(fi, w);
    }
    state[t] = 2;
  };
  for (std::size_t t = 0; t < kind_.size(); ++t) resolve(static_cast<int>(t));
}

std::size_t FESpace::num_hanging() const {
  return static_cast<std::size_t>(std::count(kind_.begin(), kind_.end(), DofKind::Hanging));
}

std::vector<Point2> FESpace::constraint_points() const {
  std::vector<Point2> pts;
  pts.reserve(free_to_total_.size());
  for (int t : free_to_total_) pts.push_back(nodes_[t]);
  return pts;
}

Eigen::VectorXd FESpace::expand(const Eigen::VectorXd& free_coeffs) const {
  if (static_cast<std::size_t>(free_coeffs.size()) != num_free())
    throw PreconditionError("FESpace::expand: coefficient vector has wrong size");
  Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_total()));
  for (std::size_t t = 0; t < num_total(); ++t)
    for (const auto& [fi, w] : expansion_[t]) total[t] += w * free_coeffs[fi];
  return total;
}

Eigen::VectorXd FESpace::interpolate(const ScalarField& g) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(num_free()));
  for (std::size_t i = 0; i < num_free(); ++i) v[i] = g(nodes_[free_to_total_[i]]);
  return v;
}

}  // namespace vilab
