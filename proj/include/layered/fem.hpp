#pragma once

// P1 finite elements on a layered mesh: per-layer stiffness matrices so that
// the parametric operator is sum_i y_i A_i, load vectors, the full solve, the
// layer-patch Dirichlet solve and energy products.

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "layered/errors.hpp"
#include "layered/format.hpp"
#include "layered/geometry.hpp"

namespace layered {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Symmetric sparse matrix; only the lower triangle is stored.
class SparseSymMatrix {
 public:
  SparseSymMatrix() = default;
  explicit SparseSymMatrix(SparseMatrix lower) : lower_(std::move(lower)) {}

  /// Builds from triplets given for either triangle; entries are folded into
  /// the lower triangle and summed. Exact zeros are dropped.
  static SparseSymMatrix from_triplets(Index n, const std::vector<Triplet>& entries) {
    std::vector<Triplet> lower;
    lower.reserve(entries.size());
    for (const auto& t : entries)
      lower.emplace_back(std::max(t.row(), t.col()), std::min(t.row(), t.col()), t.value());
    SparseMatrix m(n, n);
    m.setFromTriplets(lower.begin(), lower.end());
    m.prune(0.0, 0.0);
    m.makeCompressed();
    return SparseSymMatrix(std::move(m));
  }

  Index size() const { return static_cast<Index>(lower_.rows()); }
  const SparseMatrix& lower() const { return lower_; }

  Vector operator*(const Vector& x) const { return lower_.selfadjointView<Eigen::Lower>() * x; }
  Matrix operator*(const Matrix& x) const { return lower_.selfadjointView<Eigen::Lower>() * x; }

  SparseMatrix full() const {
    SparseMatrix m = lower_.selfadjointView<Eigen::Lower>();
    return m;
  }

  double quadratic(const Vector& u, const Vector& v) const { return u.dot(*this * v); }

 private:
  SparseMatrix lower_;
};

/// Local P1 stiffness matrix of one triangle.
inline Eigen::Matrix3d local_stiffness(const Point& p0, const Point& p1, const Point& p2) {
  const double det = (p1.x1 - p0.x1) * (p2.x2 - p0.x2) - (p2.x1 - p0.x1) * (p1.x2 - p0.x2);
  const double area = 0.5 * std::abs(det);
  Eigen::Matrix<double, 2, 3> grad;  // gradients of barycentric coordinates times det
  grad << p1.x2 - p2.x2, p2.x2 - p0.x2, p0.x2 - p1.x2,
          p2.x1 - p1.x1, p0.x1 - p2.x1, p1.x1 - p0.x1;
  return area * (grad.transpose() * grad) / (det * det);
}

/// Per-layer stiffness matrices over the free DOFs.
struct LayerStiffness {
  std::vector<SparseSymMatrix> layers;

  int n_layers() const { return static_cast<int>(layers.size()); }
  Index size() const { return layers.empty() ? 0 : layers.front().size(); }
  const SparseSymMatrix& operator[](int layer) const { return layers[static_cast<std::size_t>(layer - 1)]; }

  /// Lower triangle of sum_i y_i A_i.
  SparseMatrix combined_lower(std::span<const double> y) const {
    SparseMatrix sum(size(), size());
    for (std::size_t i = 0; i < layers.size(); ++i) sum += y[i] * layers[i].lower();
    sum.makeCompressed();
    return sum;
  }
};

/// Diffusion coefficients y_1..y_N, strictly positive and, when bounds are
/// given, inside (lower, upper).
class ParameterVector {
 public:
  explicit ParameterVector(std::vector<double> values,
                           double lower = 0.0,
                           double upper = std::numeric_limits<double>::infinity())
      : values_(std::move(values)), lower_(lower), upper_(upper) {
    if (values_.empty()) throw InvalidInput("empty parameter vector");
    if (!(lower_ >= 0.0) || !(upper_ > lower_)) throw InvalidInput("invalid parameter bounds");
    for (double v : values_) {
      if (!std::isfinite(v) || !(v > 0.0)) throw InvalidInput("diffusion coefficients must be positive and finite");
      if (!(v > lower_) || !(v < upper_)) throw InvalidInput("diffusion coefficient outside the admissible box");
    }
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }

  ParameterVector scaled(double c) const {
    std::vector<double> v = values_;
    for (auto& x : v) x *= c;
    return ParameterVector(std::move(v));
  }

 private:
  std::vector<double> values_;
  double lower_;
  double upper_;
};

inline void require_layers(const LayerStiffness& K, const ParameterVector& y) {
  if (static_cast<int>(y.size()) != K.n_layers())
    throw InvalidInput("parameter vector length " + std::to_string(y.size()) + " does not match " +
                       std::to_string(K.n_layers()) + " layers");
}

inline LayerStiffness assemble_layer_stiffness(const Mesh& mesh, const DofPartition& part) {
  std::vector<std::vector<Triplet>> entries(static_cast<std::size_t>(mesh.n_layers));
  for (std::size_t k = 0; k < mesh.triangles.size(); ++k) {
    const auto& tri = mesh.triangles[k];
    const auto& p0 = mesh.vertices[static_cast<std::size_t>(tri.v[0])];
    const auto& p1 = mesh.vertices[static_cast<std::size_t>(tri.v[1])];
    const auto& p2 = mesh.vertices[static_cast<std::size_t>(tri.v[2])];
    const double det = (p1.x1 - p0.x1) * (p2.x2 - p0.x2) - (p2.x1 - p0.x1) * (p1.x2 - p0.x2);
    const double scale = std::max({std::abs(p1.x1 - p0.x1), std::abs(p2.x1 - p0.x1),
                                   std::abs(p1.x2 - p0.x2), std::abs(p2.x2 - p0.x2)});
    if (!(std::abs(det) > 1e-13 * scale * scale))
      throw InvalidInput("degenerate triangle " + std::to_string(k) + " (zero area)");
    const Eigen::Matrix3d local = local_stiffness(p0, p1, p2);
    auto& out = entries[static_cast<std::size_t>(tri.layer - 1)];
    for (int a = 0; a < 3; ++a) {
      const Index da = part.dof_of_vertex[static_cast<std::size_t>(tri.v[static_cast<std::size_t>(a)])];
      if (da < 0) continue;
      for (int b = 0; b < 3; ++b) {
        const Index db = part.dof_of_vertex[static_cast<std::size_t>(tri.v[static_cast<std::size_t>(b)])];
        if (db < 0 || db > da) continue;  // lower triangle only
        out.emplace_back(da, db, local(a, b));
      }
    }
  }
  LayerStiffness K;
  for (auto& e : entries) K.layers.push_back(SparseSymMatrix::from_triplets(part.n_free, e));
  return K;
}

using SourceFunction = std::function<double(double, double)>;

struct LoadVector {
  Vector values;
  std::string source;
};

/// (f, phi_a) per free DOF with the three-point mid-edge rule.
inline LoadVector assemble_load(const Mesh& mesh, const DofPartition& part, const SourceFunction& f,
                                std::string source_name = "f") {
  Vector b = Vector::Zero(part.n_free);
  for (const auto& tri : mesh.triangles) {
    const Point* p[3];
    for (std::size_t k = 0; k < 3; ++k) p[k] = &mesh.vertices[static_cast<std::size_t>(tri.v[k])];
    const double area = 0.5 * std::abs(detail::signed_area2(*p[0], *p[1], *p[2]));
    double fm[3];  // f at the midpoint of the edge opposite vertex k
    for (std::size_t k = 0; k < 3; ++k) {
      const Point& a = *p[(k + 1) % 3];
      const Point& c = *p[(k + 2) % 3];
      fm[k] = f(0.5 * (a.x1 + c.x1), 0.5 * (a.x2 + c.x2));
    }
    for (std::size_t k = 0; k < 3; ++k) {
      const Index dof = part.dof_of_vertex[static_cast<std::size_t>(tri.v[k])];
      if (dof < 0) continue;
      // phi_k is 1/2 at the two midpoints on edges through vertex k.
      b[dof] += area / 3.0 * 0.5 * (fm[(k + 1) % 3] + fm[(k + 2) % 3]);
    }
  }
  return {std::move(b), std::move(source_name)};
}

enum class SolverBackend { Automatic, Direct, ConjugateGradient };

/// Factorization of sum_i y_i A_i at one parameter value. Each instance owns
/// its factorization; use one per thread.
class FullSolver {
 public:
  static constexpr Index kIterativeThreshold = 2'000'000;

  FullSolver(const LayerStiffness& K, const ParameterVector& y, SolverBackend backend = SolverBackend::Automatic)
      : lower_(checked_combination(K, y)) {
    backend_ = backend == SolverBackend::Automatic
                   ? (lower_.rows() > kIterativeThreshold ? SolverBackend::ConjugateGradient : SolverBackend::Direct)
                   : backend;
    if (backend_ == SolverBackend::Direct) {
      direct_ = std::make_unique<Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower>>(lower_);
      if (direct_->info() != Eigen::Success) throw NumericalFailure("Cholesky factorization of the stiffness failed");
    } else {
      full_ = lower_.selfadjointView<Eigen::Lower>();
      iterative_ = std::make_unique<Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper>>();
      iterative_->setTolerance(1e-12);
      iterative_->setMaxIterations(std::max<Index>(1000, 10 * static_cast<Index>(lower_.rows())));
      iterative_->compute(full_);
    }
  }

  SolverBackend backend() const { return backend_; }
  const SparseMatrix& lower() const { return lower_; }

  /// Solves with iterative refinement until the residual is below 1e-12 ||b||.
  Vector solve(const Vector& b) const {
    if (b.size() != lower_.rows()) throw InvalidInput("right-hand side has the wrong length");
    const double bnorm = b.norm();
    if (bnorm == 0.0) return Vector::Zero(b.size());
    if (backend_ == SolverBackend::ConjugateGradient) {
      Vector u = iterative_->solve(b);
      if (iterative_->info() != Eigen::Success) throw NumericalFailure("conjugate gradients did not converge");
      return u;
    }
    Vector u = direct_->solve(b);
    for (int step = 0; step < 3; ++step) {
      Vector r = b - lower_.selfadjointView<Eigen::Lower>() * u;
      if (r.norm() <= 1e-13 * bnorm) break;
      u += direct_->solve(r);
    }
    return u;
  }

  double residual(const Vector& u, const Vector& b) const {
    return (b - lower_.selfadjointView<Eigen::Lower>() * u).norm();
  }

 private:
  static SparseMatrix checked_combination(const LayerStiffness& K, const ParameterVector& y) {
    require_layers(K, y);
    return K.combined_lower(y.values());
  }

  SparseMatrix lower_;
  SparseMatrix full_;
  SolverBackend backend_ = SolverBackend::Direct;
  std::unique_ptr<Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower>> direct_;
  std::unique_ptr<Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper>> iterative_;
};

/// Reference FE solution at y.
inline Vector solve_full(const LayerStiffness& K, const ParameterVector& y, const LoadVector& b,
                         SolverBackend backend = SolverBackend::Automatic) {
  return FullSolver(K, y, backend).solve(b.values);
}

inline double energy_inner(const LayerStiffness& K, const ParameterVector& y, const Vector& u, const Vector& v) {
  require_layers(K, y);
  double sum = 0.0;
  for (int i = 1; i <= K.n_layers(); ++i) sum += y[static_cast<std::size_t>(i - 1)] * K[i].quadratic(u, v);
  return sum;
}

inline double energy_norm(const LayerStiffness& K, const ParameterVector& y, const Vector& u) {
  return std::sqrt(std::max(0.0, energy_inner(K, y, u, u)));
}

namespace detail {

/// Extracts rows/cols of a full sparse matrix through index maps
/// (global DOF -> local index or -1).
inline SparseMatrix extract_block(const SparseMatrix& full, const std::vector<Index>& row_map, Index nrows,
                                  const std::vector<Index>& col_map, Index ncols) {
  std::vector<Triplet> entries;
  for (Index c = 0; c < full.outerSize(); ++c) {
    const Index lc = col_map[static_cast<std::size_t>(c)];
    if (lc < 0) continue;
    for (SparseMatrix::InnerIterator it(full, c); it; ++it) {
      const Index lr = row_map[static_cast<std::size_t>(it.row())];
      if (lr >= 0) entries.emplace_back(lr, lc, it.value());
    }
  }
  SparseMatrix block(nrows, ncols);
  block.setFromTriplets(entries.begin(), entries.end());
  return block;
}

inline std::vector<Index> index_map(Index n, const std::vector<Index>& dofs) {
  std::vector<Index> map(static_cast<std::size_t>(n), -1);
  for (std::size_t k = 0; k < dofs.size(); ++k) map[static_cast<std::size_t>(dofs[k])] = static_cast<Index>(k);
  return map;
}

}  // namespace detail

/// y=1 Laplace problem on one layer's interior DOFs with Dirichlet data on the
/// adjacent interface DOFs. Factorizes the interior block once.
class PatchSolver {
 public:
  PatchSolver(const LayerStiffness& K, const DofPartition& part, int layer)
      : layer_(layer), n_(part.n_free), interior_(part.interior(layer)) {
    if (layer < 1 || layer > part.n_layers) throw InvalidInput("layer index out of range");
    full_ = K[layer].full();
    interior_map_ = detail::index_map(n_, interior_);
    const auto ni = static_cast<Index>(interior_.size());
    interior_block_ = detail::extract_block(full_, interior_map_, ni, interior_map_, ni);
    if (ni > 0) {
      factor_.compute(interior_block_);
      if (factor_.info() != Eigen::Success) throw NumericalFailure("patch factorization failed");
    }
    if (layer > 1) adjacent_.insert(adjacent_.end(), part.interface(layer - 1).begin(), part.interface(layer - 1).end());
    if (layer < part.n_layers) adjacent_.insert(adjacent_.end(), part.interface(layer).begin(), part.interface(layer).end());
  }

  int layer() const { return layer_; }
  const std::vector<Index>& interior() const { return interior_; }
  const std::vector<Index>& interior_map() const { return interior_map_; }
  const SparseMatrix& full_layer_matrix() const { return full_; }
  const SparseMatrix& interior_block() const { return interior_block_; }

  /// Interior values solving A_II x = rhs.
  Vector solve_interior(const Vector& rhs) const {
    if (interior_.empty()) return Vector();
    Vector x = factor_.solve(rhs);
    return x;
  }
  Matrix solve_interior(const Matrix& rhs) const {
    if (interior_.empty()) return Matrix(0, rhs.cols());
    Matrix x = factor_.solve(rhs);
    return x;
  }

  /// Discrete harmonic extension of the given trace into the layer interior;
  /// the returned field is zero outside the interior and the trace DOFs.
  Vector extend(const std::vector<std::pair<Index, double>>& trace) const {
    std::vector<Index> adjacent_map_check = detail::index_map(n_, adjacent_);
    Vector g = Vector::Zero(n_);
    for (const auto& [dof, value] : trace) {
      if (dof < 0 || dof >= n_ || adjacent_map_check[static_cast<std::size_t>(dof)] < 0)
        throw InvalidInput("trace DOF " + std::to_string(dof) + " is not on an interface of layer " +
                           std::to_string(layer_));
      g[dof] = value;
    }
    Vector rhs = Vector::Zero(static_cast<Index>(interior_.size()));
    const Vector coupling = full_ * g;
    for (std::size_t k = 0; k < interior_.size(); ++k) rhs[static_cast<Index>(k)] = -coupling[interior_[k]];
    const Vector x = solve_interior(rhs);
    Vector field = g;
    for (std::size_t k = 0; k < interior_.size(); ++k) field[interior_[k]] = x[static_cast<Index>(k)];
    return field;
  }

 private:
  int layer_;
  Index n_;
  std::vector<Index> interior_;
  std::vector<Index> interior_map_;
  std::vector<Index> adjacent_;
  SparseMatrix full_;
  SparseMatrix interior_block_;
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower> factor_;
};

inline Vector solve_patch_dirichlet(const LayerStiffness& K, const DofPartition& part, int layer,
                                    const std::vector<std::pair<Index, double>>& trace) {
  return PatchSolver(K, part, layer).extend(trace);
}

/// "vertex_index value" per mesh vertex; Dirichlet vertices carry 0.
inline void write_field(std::ostream& out, const DofPartition& part, const Vector& u,
                        const std::string& provenance = {}) {
  if (!provenance.empty()) out << provenance << '\n';
  for (std::size_t v = 0; v < part.dof_of_vertex.size(); ++v) {
    const Index dof = part.dof_of_vertex[v];
    out << v << ' ' << format_real(dof < 0 ? 0.0 : u[dof]) << '\n';
  }
}

/// Legacy-VTK unstructured grid with one point-data array per named field.
inline void write_vtk(std::ostream& out, const Mesh& mesh, const DofPartition& part,
                      const std::vector<std::pair<std::string, Vector>>& fields) {
  out << "# vtk DataFile Version 3.0\nlayered fields\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.vertices.size() << " double\n";
  for (const auto& p : mesh.vertices) out << format_real(p.x1) << ' ' << format_real(p.x2) << " 0\n";
  out << "CELLS " << mesh.triangles.size() << ' ' << 4 * mesh.triangles.size() << '\n';
  for (const auto& t : mesh.triangles) out << "3 " << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << '\n';
  out << "CELL_TYPES " << mesh.triangles.size() << '\n';
  for (std::size_t k = 0; k < mesh.triangles.size(); ++k) out << "5\n";
  out << "CELL_DATA " << mesh.triangles.size() << "\nSCALARS layer int 1\nLOOKUP_TABLE default\n";
  for (const auto& t : mesh.triangles) out << t.layer << '\n';
  if (fields.empty()) return;
  out << "POINT_DATA " << mesh.vertices.size() << '\n';
  for (const auto& [name, u] : fields) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (std::size_t v = 0; v < part.dof_of_vertex.size(); ++v) {
      const Index dof = part.dof_of_vertex[v];
      out << format_real(dof < 0 ? 0.0 : u[dof]) << '\n';
    }
  }
}

}  // namespace layered
