#pragma once

// Discrete subdomain/interface splitting: layer-interior solves w_{Omega_i}
// and discrete harmonic extensions of interface traces into neighbouring
// layers, together with the interface energy matrices C00, C01, C11.

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "layered/errors.hpp"
#include "layered/fem.hpp"

namespace layered {

/// One layer with its interior factorization and the dense extension
/// operators from its left and right interfaces.
class LayerPatch {
 public:
  LayerPatch(const LayerStiffness& K, const DofPartition& part, int layer)
      : solver_(K, part, layer), n_(part.n_free) {
    if (layer > 1) left_ = part.interface(layer - 1);
    if (layer < part.n_layers) right_ = part.interface(layer);
    const auto& full = solver_.full_layer_matrix();
    const auto& imap = solver_.interior_map();
    const auto ni = static_cast<Index>(solver_.interior().size());
    const auto left_map = detail::index_map(n_, left_);
    const auto right_map = detail::index_map(n_, right_);
    const auto nl = static_cast<Index>(left_.size());
    const auto nr = static_cast<Index>(right_.size());

    // Columns of Z: interior rows -A_II^{-1} A_IT, trace rows identity.
    const Matrix coupling_left = Matrix(detail::extract_block(full, imap, ni, left_map, nl));
    const Matrix coupling_right = Matrix(detail::extract_block(full, imap, ni, right_map, nr));
    ext_left_ = -solver_.solve_interior(coupling_left);
    ext_right_ = -solver_.solve_interior(coupling_right);

    // C = Z^T A Z over interior plus trace DOFs.
    const SparseMatrix& a_ii = solver_.interior_block();
    const Matrix a_ll = Matrix(detail::extract_block(full, left_map, nl, left_map, nl));
    const Matrix a_rr = Matrix(detail::extract_block(full, right_map, nr, right_map, nr));
    const Matrix a_lr = Matrix(detail::extract_block(full, left_map, nl, right_map, nr));
    auto quadratic = [&](const Matrix& e0, const Matrix& c0, const Matrix& t00, const Matrix& e1,
                         const Matrix& c1) -> Matrix {
      // [e0; I]^T [A_II A_IT1; A_T0I A_T0T1] [e1; I]
      Matrix a_e1 = a_ii * e1;
      return t00 + c0.transpose() * e1 + e0.transpose() * c1 + e0.transpose() * a_e1;
    };
    if (nl > 0) {
      energy_ll_ = quadratic(ext_left_, coupling_left, a_ll, ext_left_, coupling_left);
      energy_ll_ = 0.5 * (energy_ll_ + energy_ll_.transpose()).eval();
    }
    if (nr > 0) {
      energy_rr_ = quadratic(ext_right_, coupling_right, a_rr, ext_right_, coupling_right);
      energy_rr_ = 0.5 * (energy_rr_ + energy_rr_.transpose()).eval();
    }
    if (nl > 0 && nr > 0) energy_lr_ = quadratic(ext_left_, coupling_left, a_lr, ext_right_, coupling_right);
  }

  int layer() const { return solver_.layer(); }
  const PatchSolver& solver() const { return solver_; }
  const std::vector<Index>& interior() const { return solver_.interior(); }
  const std::vector<Index>& left_trace() const { return left_; }
  const std::vector<Index>& right_trace() const { return right_; }
  const Matrix& left_extension() const { return ext_left_; }
  const Matrix& right_extension() const { return ext_right_; }
  const Matrix& left_energy() const { return energy_ll_; }
  const Matrix& right_energy() const { return energy_rr_; }
  /// Cross energy between extensions from the left and right interfaces.
  const Matrix& cross_energy() const { return energy_lr_; }

 private:
  PatchSolver solver_;
  Index n_;
  std::vector<Index> left_;
  std::vector<Index> right_;
  Matrix ext_left_;
  Matrix ext_right_;
  Matrix energy_ll_;
  Matrix energy_rr_;
  Matrix energy_lr_;
};

enum class ExtensionSide {
  FromLeft,   // Z0: trace on interface i extended into layer i+1
  FromRight,  // Z1: trace on interface i+1 extended into layer i+1
};

/// Dense discrete harmonic extension operator into one layer.
struct HarmonicExtensionOperator {
  int interface = 0;            // the interface index i the operator is named after
  ExtensionSide side = ExtensionSide::FromLeft;
  int layer = 0;                // target layer (i+1)
  int trace_interface = 0;      // interface carrying the trace (i or i+1)
  std::vector<Index> interior;  // target layer interior DOFs
  std::vector<Index> trace;     // trace DOFs
  Matrix columns;               // interior values per unit trace

  Index n_free = 0;

  Vector apply(const Vector& trace_values) const {
    if (trace_values.size() != static_cast<Index>(trace.size()))
      throw InvalidInput("trace length does not match the interface DOF count");
    Vector field = Vector::Zero(n_free);
    const Vector inner = columns * trace_values;
    for (std::size_t k = 0; k < interior.size(); ++k) field[interior[k]] = inner[static_cast<Index>(k)];
    for (std::size_t k = 0; k < trace.size(); ++k) field[trace[k]] = trace_values[static_cast<Index>(k)];
    return field;
  }
};

struct InterfaceEnergyMatrices {
  Matrix c00;                 // extension of interface i into layer i+1
  std::optional<Matrix> c01;  // cross with interface i+1 inside layer i+1
  std::optional<Matrix> c11;  // extension of interface i+1 into layer i+1
};

/// All y-independent local objects of the subdomain/interface splitting.
class Decomposition {
 public:
  Decomposition(const LayerStiffness& K, const DofPartition& part) : part_(part) {
    if (K.size() != part.n_free || K.n_layers() != part.n_layers)
      throw InvalidInput("stiffness and DOF partition are inconsistent");
    patches_.reserve(static_cast<std::size_t>(part.n_layers));
    for (int layer = 1; layer <= part.n_layers; ++layer)
      patches_.push_back(std::make_unique<LayerPatch>(K, part, layer));
  }

  int n_layers() const { return part_.n_layers; }
  int n_interfaces() const { return part_.n_layers - 1; }
  Index n_free() const { return part_.n_free; }
  const DofPartition& partition() const { return part_; }
  const LayerPatch& patch(int layer) const { return *patches_[static_cast<std::size_t>(layer - 1)]; }

  /// w_{Omega_i}: y=1 Poisson solve on layer i with zero data, zero elsewhere.
  Vector solve_subdomain(int layer, const LoadVector& b) const {
    check_layer(layer);
    const auto& p = patch(layer);
    Vector rhs(static_cast<Index>(p.interior().size()));
    for (std::size_t k = 0; k < p.interior().size(); ++k) rhs[static_cast<Index>(k)] = b.values[p.interior()[k]];
    const Vector x = p.solver().solve_interior(rhs);
    Vector field = Vector::Zero(n_free());
    for (std::size_t k = 0; k < p.interior().size(); ++k) field[p.interior()[k]] = x[static_cast<Index>(k)];
    return field;
  }

  /// Z0 (FromLeft) extends interface i into layer i+1; Z1 (FromRight) extends
  /// interface i+1 into layer i+1.
  HarmonicExtensionOperator build_extension(int i, ExtensionSide side) const {
    check_interface(i);
    HarmonicExtensionOperator op;
    op.interface = i;
    op.side = side;
    op.layer = i + 1;
    op.n_free = n_free();
    const auto& p = patch(i + 1);
    op.interior = p.interior();
    if (side == ExtensionSide::FromLeft) {
      op.trace_interface = i;
      op.trace = p.left_trace();
      op.columns = p.left_extension();
    } else {
      if (i + 1 > n_interfaces()) throw InvalidInput("interface " + std::to_string(i) + " has no right neighbour");
      op.trace_interface = i + 1;
      op.trace = p.right_trace();
      op.columns = p.right_extension();
    }
    return op;
  }

  InterfaceEnergyMatrices interface_energy_matrices(int i) const {
    check_interface(i);
    const auto& p = patch(i + 1);
    InterfaceEnergyMatrices c;
    c.c00 = p.left_energy();
    if (i + 1 <= n_interfaces()) {
      c.c01 = p.cross_energy();
      c.c11 = p.right_energy();
    }
    return c;
  }

  /// Rejects i = N-1, which has no right neighbour.
  const Matrix& cross_energy(int i) const {
    check_interface(i);
    if (i + 1 > n_interfaces()) throw InvalidInput("C01 is undefined for the last interface");
    return patch(i + 1).cross_energy();
  }

  /// Energy of extensions of interface i into layer i (left) and i+1 (right).
  const Matrix& energy_into_left(int i) const { return patch(i).right_energy(); }
  const Matrix& energy_into_right(int i) const { return patch(i + 1).left_energy(); }

  /// Member of V_{h,Gamma_i}: trace on interface i, extended into layers i and
  /// i+1, zero on every other interface.
  Vector extend_trace(int i, const Vector& trace) const {
    check_interface(i);
    const auto& dofs = part_.interface(i);
    if (trace.size() != static_cast<Index>(dofs.size())) throw InvalidInput("trace length mismatch");
    Vector field = Vector::Zero(n_free());
    for (std::size_t k = 0; k < dofs.size(); ++k) field[dofs[k]] = trace[static_cast<Index>(k)];
    scatter(field, patch(i).interior(), patch(i).right_extension() * trace);
    scatter(field, patch(i + 1).interior(), patch(i + 1).left_extension() * trace);
    return field;
  }

  /// Same for several traces at once (columns).
  Matrix extend_traces(int i, const Matrix& traces) const {
    Matrix fields(n_free(), traces.cols());
    for (Index c = 0; c < traces.cols(); ++c) fields.col(c) = extend_trace(i, traces.col(c));
    return fields;
  }

  /// g with g_k = L(extension of the k-th unit trace on interface i).
  Vector trace_load(int i, const LoadVector& b) const {
    check_interface(i);
    const auto& dofs = part_.interface(i);
    Vector g(static_cast<Index>(dofs.size()));
    for (std::size_t k = 0; k < dofs.size(); ++k) g[static_cast<Index>(k)] = b.values[dofs[k]];
    g += patch(i).right_extension().transpose() * gather(b.values, patch(i).interior());
    g += patch(i + 1).left_extension().transpose() * gather(b.values, patch(i + 1).interior());
    return g;
  }

 private:
  void check_layer(int layer) const {
    if (layer < 1 || layer > n_layers()) throw InvalidInput("layer index out of range");
  }
  void check_interface(int i) const {
    if (i < 1 || i > n_interfaces()) throw InvalidInput("interface index out of range");
  }
  static void scatter(Vector& field, const std::vector<Index>& dofs, const Vector& values) {
    for (std::size_t k = 0; k < dofs.size(); ++k) field[dofs[k]] = values[static_cast<Index>(k)];
  }
  static Vector gather(const Vector& field, const std::vector<Index>& dofs) {
    Vector out(static_cast<Index>(dofs.size()));
    for (std::size_t k = 0; k < dofs.size(); ++k) out[static_cast<Index>(k)] = field[dofs[k]];
    return out;
  }

  DofPartition part_;
  std::vector<std::unique_ptr<LayerPatch>> patches_;
};

}  // namespace layered
