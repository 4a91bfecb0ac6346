#pragma once

// Layered domains built from one template layer, their locally mirror-symmetric
// P1 triangulations, and the free-DOF partition into layer interiors and
// interfaces.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "layered/errors.hpp"
#include "layered/format.hpp"

namespace layered {

using Index = int;

/// Template layer shape on (0,1): x2 ranges over (lower(t), upper(t)).
/// Curves are piecewise linear through the samples.
class LayerProfile {
 public:
  LayerProfile(std::vector<double> t, std::vector<double> lower, std::vector<double> upper)
      : t_(std::move(t)), lower_(std::move(lower)), upper_(std::move(upper)) {
    validate();
  }

  static LayerProfile square() { return LayerProfile({0.0, 1.0}, {0.0, 0.0}, {1.0, 1.0}); }

  /// Layer whose top edge dips linearly to mid-height at the layer centre and
  /// rises back to full height at both vertical edges.
  static LayerProfile crown() {
    return LayerProfile({0.0, 0.5, 1.0}, {0.0, 0.0, 0.0}, {1.0, 0.5, 1.0});
  }

  const std::vector<double>& abscissae() const { return t_; }
  const std::vector<double>& lower_samples() const { return lower_; }
  const std::vector<double>& upper_samples() const { return upper_; }

  double lower(double t) const { return interpolate(lower_, t); }
  double upper(double t) const { return interpolate(upper_, t); }

  double min_extent() const {
    double extent = upper_[0] - lower_[0];
    for (std::size_t k = 1; k < t_.size(); ++k) extent = std::min(extent, upper_[k] - lower_[k]);
    return extent;
  }
  double max_extent() const {
    double extent = upper_[0] - lower_[0];
    for (std::size_t k = 1; k < t_.size(); ++k) extent = std::max(extent, upper_[k] - lower_[k]);
    return extent;
  }

 private:
  void validate() const {
    if (t_.size() < 2 || lower_.size() != t_.size() || upper_.size() != t_.size())
      throw InvalidInput("layer profile needs at least two samples with matching lengths");
    if (t_.front() != 0.0 || t_.back() != 1.0)
      throw InvalidInput("layer profile samples must start at t=0 and end at t=1");
    for (std::size_t k = 0; k < t_.size(); ++k) {
      if (!std::isfinite(t_[k]) || !std::isfinite(lower_[k]) || !std::isfinite(upper_[k]))
        throw InvalidInput("layer profile contains a non-finite value");
      if (k > 0 && !(t_[k] > t_[k - 1]))
        throw InvalidInput("layer profile abscissae must be strictly increasing");
      if (!(lower_[k] < upper_[k]))
        throw InvalidInput("degenerate layer profile: lower curve meets upper curve at t=" +
                           format_real(t_[k]));
    }
  }

  double interpolate(const std::vector<double>& values, double t) const {
    if (t <= t_.front()) return values.front();
    if (t >= t_.back()) return values.back();
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    auto k = static_cast<std::size_t>(it - t_.begin());
    const double s = (t - t_[k - 1]) / (t_[k] - t_[k - 1]);
    return (1.0 - s) * values[k - 1] + s * values[k];
  }

  std::vector<double> t_;
  std::vector<double> lower_;
  std::vector<double> upper_;
};

/// Reads "t r1 r2" rows ('#' starts a comment) or one of the keywords
/// "square" / "crown".
inline LayerProfile parse_profile(std::istream& in) {
  std::vector<double> t, lo, hi;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    std::string first;
    if (!(row >> first)) continue;
    if (t.empty() && first == "square") return LayerProfile::square();
    if (t.empty() && first == "crown") return LayerProfile::crown();
    double a = 0, b = 0, c = 0;
    std::istringstream values(line);
    if (!(values >> a >> b >> c)) throw InvalidInput("malformed profile row: '" + line + "'");
    std::string extra;
    if (values >> extra) throw InvalidInput("malformed profile row: '" + line + "'");
    t.push_back(a);
    lo.push_back(b);
    hi.push_back(c);
  }
  if (t.empty()) throw InvalidInput("empty layer profile");
  return LayerProfile(std::move(t), std::move(lo), std::move(hi));
}

inline LayerProfile load_profile(const std::string& spec) {
  if (spec == "square") return LayerProfile::square();
  if (spec == "crown") return LayerProfile::crown();
  std::ifstream in(spec);
  if (!in) throw InvalidInput("cannot open profile file '" + spec + "'");
  return parse_profile(in);
}

struct Point {
  double x1 = 0.0;
  double x2 = 0.0;
};

struct Triangle {
  std::array<Index, 3> v{};
  int layer = 1;  // 1-based
};

/// Conforming P1 triangulation of a layered domain. Vertices are sorted
/// lexicographically by (x1, x2). Interfaces sit at x1 = 1, ..., N-1.
struct Mesh {
  int n_layers = 1;
  std::vector<Point> vertices;
  std::vector<Triangle> triangles;
  std::vector<std::uint8_t> boundary;              // 1 if the vertex lies on the outer boundary
  std::vector<std::vector<Index>> interfaces;      // interface i-1 -> vertices on x1 = i, by x2

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
};

namespace detail {

inline bool on_line(double x, double c) { return std::abs(x - c) <= 1e-12; }

/// Vertices with x1 == c, sorted by x2.
inline std::vector<Index> vertices_on_line(const std::vector<Point>& pts, double c) {
  std::vector<Index> out;
  for (Index v = 0; v < static_cast<Index>(pts.size()); ++v)
    if (on_line(pts[static_cast<std::size_t>(v)].x1, c)) out.push_back(v);
  std::sort(out.begin(), out.end(), [&](Index a, Index b) {
    return pts[static_cast<std::size_t>(a)].x2 < pts[static_cast<std::size_t>(b)].x2;
  });
  return out;
}

inline double signed_area2(const Point& a, const Point& b, const Point& c) {
  return (b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2);
}

/// Sorts vertices, orients triangles counter-clockwise, flags outer boundary
/// vertices (endpoints of edges used by exactly one triangle) and collects
/// interface vertex lists.
inline Mesh finalize(std::vector<Point> pts, std::vector<Triangle> tris, int n_layers) {
  std::vector<Index> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const auto& pa = pts[static_cast<std::size_t>(a)];
    const auto& pb = pts[static_cast<std::size_t>(b)];
    return pa.x1 < pb.x1 || (pa.x1 == pb.x1 && pa.x2 < pb.x2);
  });
  std::vector<Index> new_id(pts.size());
  Mesh mesh;
  mesh.n_layers = n_layers;
  mesh.vertices.resize(pts.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    new_id[static_cast<std::size_t>(order[k])] = static_cast<Index>(k);
    mesh.vertices[k] = pts[static_cast<std::size_t>(order[k])];
  }
  mesh.triangles.reserve(tris.size());
  for (auto tri : tris) {
    for (auto& v : tri.v) v = new_id[static_cast<std::size_t>(v)];
    const auto& P = mesh.vertices;
    if (signed_area2(P[static_cast<std::size_t>(tri.v[0])], P[static_cast<std::size_t>(tri.v[1])],
                     P[static_cast<std::size_t>(tri.v[2])]) < 0.0)
      std::swap(tri.v[1], tri.v[2]);
    mesh.triangles.push_back(tri);
  }
  std::map<std::pair<Index, Index>, int> edge_use;
  for (const auto& tri : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      Index a = tri.v[static_cast<std::size_t>(e)], b = tri.v[static_cast<std::size_t>((e + 1) % 3)];
      ++edge_use[{std::min(a, b), std::max(a, b)}];
    }
  mesh.boundary.assign(mesh.vertices.size(), 0);
  for (const auto& [edge, count] : edge_use)
    if (count == 1) {
      mesh.boundary[static_cast<std::size_t>(edge.first)] = 1;
      mesh.boundary[static_cast<std::size_t>(edge.second)] = 1;
    }
  for (int i = 1; i < n_layers; ++i)
    mesh.interfaces.push_back(vertices_on_line(mesh.vertices, static_cast<double>(i)));
  return mesh;
}

}  // namespace detail

/// Structured triangulation of the template layer: vertical vertex columns
/// (profile breakpoints are always columns), each column split uniformly
/// between the two profile curves, every quad cut along the same diagonal.
inline Mesh build_template_layer(const LayerProfile& profile, double target_h) {
  if (!(target_h > 0.0) || !std::isfinite(target_h))
    throw InvalidInput("target mesh size must be positive");
  if (target_h > profile.min_extent() / 2.0 * (1.0 + 1e-12))
    throw InvalidInput("target mesh size exceeds half of the smallest layer height");

  std::vector<double> columns{0.0};
  const auto& t = profile.abscissae();
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double length = t[k + 1] - t[k];
    const int pieces = std::max(1, static_cast<int>(std::ceil(length / target_h - 1e-9)));
    for (int j = 1; j < pieces; ++j) columns.push_back(t[k] + length * j / pieces);
    columns.push_back(t[k + 1]);
  }
  const int rows = std::max(1, static_cast<int>(std::ceil(profile.max_extent() / target_h - 1e-9)));

  const auto ncol = static_cast<Index>(columns.size());
  const Index stride = rows + 1;
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(ncol * stride));
  for (double x : columns) {
    const double lo = profile.lower(x), hi = profile.upper(x);
    for (int k = 0; k <= rows; ++k) {
      const double x2 = k == rows ? hi : lo + (hi - lo) * k / rows;
      pts.push_back({x, x2});
    }
  }
  std::vector<Triangle> tris;
  tris.reserve(static_cast<std::size_t>(2 * (ncol - 1) * rows));
  for (Index j = 0; j + 1 < ncol; ++j)
    for (Index k = 0; k < rows; ++k) {
      const Index a = j * stride + k, b = (j + 1) * stride + k;
      const Index c = b + 1, d = a + 1;
      tris.push_back({{a, b, c}, 1});
      tris.push_back({{a, c, d}, 1});
    }
  return detail::finalize(std::move(pts), std::move(tris), 1);
}

/// Vertices of a mesh lying on the vertical line x1 = c, sorted by x2.
inline std::vector<Index> vertices_on_vertical(const Mesh& mesh, double c) {
  return detail::vertices_on_line(mesh.vertices, c);
}

/// Tiles N layers: layer i+1 is the mirror image of layer i across x1 = i.
/// Vertices on a shared interface are the image of the same template vertex
/// from both sides and are created once.
inline Mesh reflect_and_tile(const Mesh& templ, int n_layers) {
  if (n_layers < 2) throw InvalidInput("a layered domain needs at least two layers");
  if (templ.n_layers != 1) throw InvalidInput("reflect_and_tile expects a single-layer template");
  const auto left = vertices_on_vertical(templ, 0.0);
  const auto right = vertices_on_vertical(templ, 1.0);
  if (left.size() < 2 || right.size() < 2)
    throw InvalidInput("template layer must have straight vertical edges at x1=0 and x1=1");
  for (const auto& p : templ.vertices)
    if (p.x1 < -1e-12 || p.x1 > 1.0 + 1e-12)
      throw InvalidInput("template layer must lie within 0 <= x1 <= 1");
  if (n_layers >= 3) {
    // Odd interfaces carry the template's right edge, even ones its left edge.
    bool match = left.size() == right.size();
    for (std::size_t k = 0; match && k < left.size(); ++k)
      match = templ.vertices[static_cast<std::size_t>(left[k])].x2 ==
              templ.vertices[static_cast<std::size_t>(right[k])].x2;
    if (!match)
      throw ConsistencyError("template edges at x1=0 and x1=1 carry different vertex traces");
  }

  const std::size_t nv = templ.vertices.size();
  std::vector<Point> pts;
  std::vector<std::vector<Index>> id(static_cast<std::size_t>(n_layers), std::vector<Index>(nv, -1));
  for (int layer = 1; layer <= n_layers; ++layer) {
    const bool odd = layer % 2 == 1;
    const double left_edge_t = odd ? 0.0 : 1.0;  // template abscissa that lands on x1 = layer-1
    auto& ids = id[static_cast<std::size_t>(layer - 1)];
    for (std::size_t v = 0; v < nv; ++v) {
      const auto& p = templ.vertices[v];
      if (layer > 1 && detail::on_line(p.x1, left_edge_t)) {
        ids[v] = id[static_cast<std::size_t>(layer - 2)][v];
        continue;
      }
      const double x1 = odd ? (layer - 1) + p.x1 : layer - p.x1;
      ids[v] = static_cast<Index>(pts.size());
      pts.push_back({x1, p.x2});
    }
  }
  std::vector<Triangle> tris;
  tris.reserve(templ.triangles.size() * static_cast<std::size_t>(n_layers));
  for (int layer = 1; layer <= n_layers; ++layer) {
    const auto& ids = id[static_cast<std::size_t>(layer - 1)];
    for (const auto& tri : templ.triangles)
      tris.push_back({{ids[static_cast<std::size_t>(tri.v[0])], ids[static_cast<std::size_t>(tri.v[1])],
                       ids[static_cast<std::size_t>(tri.v[2])]},
                      layer});
  }
  return detail::finalize(std::move(pts), std::move(tris), n_layers);
}

/// Convenience: template construction followed by tiling.
inline Mesh build_layered_mesh(const LayerProfile& profile, int n_layers, double target_h) {
  return reflect_and_tile(build_template_layer(profile, target_h), n_layers);
}

/// Restriction of a tiled mesh to one layer, as a standalone mesh (layer tag 1).
inline Mesh extract_layer(const Mesh& mesh, int layer) {
  std::vector<Index> new_id(mesh.vertices.size(), -1);
  std::vector<Point> pts;
  std::vector<Triangle> tris;
  for (const auto& tri : mesh.triangles) {
    if (tri.layer != layer) continue;
    Triangle t{{}, 1};
    for (std::size_t k = 0; k < 3; ++k) {
      auto& nid = new_id[static_cast<std::size_t>(tri.v[k])];
      if (nid < 0) {
        nid = static_cast<Index>(pts.size());
        pts.push_back(mesh.vertices[static_cast<std::size_t>(tri.v[k])]);
      }
      t.v[k] = nid;
    }
    tris.push_back(t);
  }
  return detail::finalize(std::move(pts), std::move(tris), 1);
}

/// Checks the structural invariants of a tiled mesh: conformity to every
/// interface, identical interface x2 sequences, and exact reflection of each
/// layer onto its right neighbour. Returns a diagnostic, empty when valid.
inline std::string check_mesh(const Mesh& mesh, double tol = 1e-14) {
  for (std::size_t k = 0; k < mesh.triangles.size(); ++k) {
    const auto& tri = mesh.triangles[k];
    for (auto v : tri.v) {
      const double x = mesh.vertices[static_cast<std::size_t>(v)].x1;
      if (x < tri.layer - 1 - tol || x > tri.layer + tol)
        return "triangle " + std::to_string(k) + " crosses a layer boundary";
    }
  }
  for (std::size_t i = 1; i < mesh.interfaces.size(); ++i) {
    const auto& a = mesh.interfaces[0];
    const auto& b = mesh.interfaces[i];
    if (a.size() != b.size()) return "interfaces carry different vertex counts";
    for (std::size_t k = 0; k < a.size(); ++k)
      if (mesh.vertices[static_cast<std::size_t>(a[k])].x2 != mesh.vertices[static_cast<std::size_t>(b[k])].x2)
        return "interfaces carry different x2 sequences";
  }
  // Reflection: vertex sets of consecutive layers.
  std::vector<std::vector<Point>> layer_pts(static_cast<std::size_t>(mesh.n_layers));
  {
    std::vector<std::vector<std::uint8_t>> seen(static_cast<std::size_t>(mesh.n_layers),
                                                std::vector<std::uint8_t>(mesh.vertices.size(), 0));
    for (const auto& tri : mesh.triangles)
      for (auto v : tri.v) {
        auto& s = seen[static_cast<std::size_t>(tri.layer - 1)][static_cast<std::size_t>(v)];
        if (!s) {
          s = 1;
          layer_pts[static_cast<std::size_t>(tri.layer - 1)].push_back(mesh.vertices[static_cast<std::size_t>(v)]);
        }
      }
  }
  auto lex = [](const Point& a, const Point& b) { return a.x1 < b.x1 || (a.x1 == b.x1 && a.x2 < b.x2); };
  for (int i = 1; i < mesh.n_layers; ++i) {
    auto mirrored = layer_pts[static_cast<std::size_t>(i - 1)];
    for (auto& p : mirrored) p.x1 = 2.0 * i - p.x1;
    auto target = layer_pts[static_cast<std::size_t>(i)];
    if (mirrored.size() != target.size()) return "layer " + std::to_string(i + 1) + " is not a mirror image";
    // Round the reflected abscissae before ordering so round-off cannot permute columns.
    auto key = [](const Point& p) { return Point{std::round(p.x1 * 1e10) / 1e10, p.x2}; };
    std::sort(mirrored.begin(), mirrored.end(), [&](const Point& a, const Point& b) { return lex(key(a), key(b)); });
    std::sort(target.begin(), target.end(), [&](const Point& a, const Point& b) { return lex(key(a), key(b)); });
    for (std::size_t k = 0; k < target.size(); ++k)
      if (std::abs(mirrored[k].x1 - target[k].x1) > tol || std::abs(mirrored[k].x2 - target[k].x2) > tol)
        return "layer " + std::to_string(i + 1) + " is not a mirror image";
  }
  return {};
}

/// Free degrees of freedom grouped by layer interior and by interface.
/// DOF numbers follow vertex order, so interface sets are sorted by x2.
struct DofPartition {
  int n_layers = 0;
  Index n_free = 0;
  std::vector<Index> dof_of_vertex;                 // -1 for Dirichlet vertices
  std::vector<Index> vertex_of_dof;
  std::vector<std::vector<Index>> layer_interior;   // layer L-1 -> DOFs
  std::vector<std::vector<Index>> interface_dofs;   // interface i-1 -> DOFs
  std::vector<Index> dirichlet_vertices;

  std::size_t interface_size(int i) const { return interface_dofs[static_cast<std::size_t>(i - 1)].size(); }
  const std::vector<Index>& interior(int layer) const { return layer_interior[static_cast<std::size_t>(layer - 1)]; }
  const std::vector<Index>& interface(int i) const { return interface_dofs[static_cast<std::size_t>(i - 1)]; }
};

inline DofPartition classify_dofs(const Mesh& mesh) {
  DofPartition part;
  part.n_layers = mesh.n_layers;
  const std::size_t nv = mesh.vertices.size();
  std::vector<int> vertex_layer(nv, 0);
  for (const auto& tri : mesh.triangles)
    for (auto v : tri.v) vertex_layer[static_cast<std::size_t>(v)] = tri.layer;
  std::vector<int> vertex_interface(nv, 0);
  for (std::size_t i = 0; i < mesh.interfaces.size(); ++i)
    for (auto v : mesh.interfaces[i]) vertex_interface[static_cast<std::size_t>(v)] = static_cast<int>(i + 1);

  part.dof_of_vertex.assign(nv, -1);
  part.layer_interior.resize(static_cast<std::size_t>(mesh.n_layers));
  part.interface_dofs.resize(mesh.interfaces.size());
  for (std::size_t v = 0; v < nv; ++v) {
    if (mesh.boundary[v]) {
      part.dirichlet_vertices.push_back(static_cast<Index>(v));
      continue;
    }
    const Index dof = part.n_free++;
    part.dof_of_vertex[v] = dof;
    part.vertex_of_dof.push_back(static_cast<Index>(v));
    if (vertex_interface[v] > 0)
      part.interface_dofs[static_cast<std::size_t>(vertex_interface[v] - 1)].push_back(dof);
    else
      part.layer_interior[static_cast<std::size_t>(vertex_layer[v] - 1)].push_back(dof);
  }
  return part;
}

/// Plain-text mesh export: header, one "x1 x2 flags" line per vertex, one
/// "v0 v1 v2 layer" line per triangle. Flag bit 0 marks Dirichlet vertices,
/// bit 1 marks interface vertices.
inline void write_mesh(std::ostream& out, const Mesh& mesh, const std::string& provenance = {}) {
  if (!provenance.empty()) out << provenance << '\n';
  out << "vertices " << mesh.vertices.size() << " triangles " << mesh.triangles.size()
      << " interfaces " << mesh.interfaces.size() << '\n';
  std::vector<int> flags(mesh.vertices.size(), 0);
  for (std::size_t v = 0; v < flags.size(); ++v) flags[v] = mesh.boundary[v] ? 1 : 0;
  for (const auto& iface : mesh.interfaces)
    for (auto v : iface) flags[static_cast<std::size_t>(v)] |= 2;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    out << format_real(mesh.vertices[v].x1) << ' ' << format_real(mesh.vertices[v].x2) << ' ' << flags[v] << '\n';
  for (const auto& tri : mesh.triangles)
    out << tri.v[0] << ' ' << tri.v[1] << ' ' << tri.v[2] << ' ' << tri.layer << '\n';
}

inline Mesh read_mesh(std::istream& in) {
  std::string line;
  auto next = [&]() -> std::string {
    while (std::getline(in, line))
      if (!line.empty() && line[0] != '#') return line;
    throw InvalidInput("unexpected end of mesh file");
  };
  std::istringstream head(next());
  std::string kv, kt, ki;
  std::size_t nv = 0, nt = 0, ni = 0;
  if (!(head >> kv >> nv >> kt >> nt >> ki >> ni) || kv != "vertices" || kt != "triangles" || ki != "interfaces")
    throw InvalidInput("malformed mesh header");
  std::vector<Point> pts(nv);
  for (auto& p : pts) {
    std::istringstream row(next());
    int flags = 0;
    if (!(row >> p.x1 >> p.x2 >> flags)) throw InvalidInput("malformed mesh vertex row");
  }
  std::vector<Triangle> tris(nt);
  int n_layers = 1;
  for (auto& t : tris) {
    std::istringstream row(next());
    if (!(row >> t.v[0] >> t.v[1] >> t.v[2] >> t.layer)) throw InvalidInput("malformed mesh triangle row");
    for (auto v : t.v)
      if (v < 0 || static_cast<std::size_t>(v) >= nv) throw InvalidInput("triangle references a missing vertex");
    n_layers = std::max(n_layers, t.layer);
  }
  if (ni + 1 != static_cast<std::size_t>(n_layers) && !(ni == 0 && n_layers == 1))
    throw InvalidInput("mesh interface count does not match its layer tags");
  return detail::finalize(std::move(pts), std::move(tris), n_layers);
}

}  // namespace layered
