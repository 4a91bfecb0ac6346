#pragma once

// SVD-based slow/fast splitting of interface traces and the
// parameter-independent fast solves.

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "layered/decomposition.hpp"
#include "layered/errors.hpp"
#include "layered/format.hpp"

namespace layered {

struct SvdTriple {
  int interface = 0;
  Vector sigma;  // descending, length = trace dimension (zero padded)
  Matrix u;
  Matrix v;
  Matrix r0;   // upper Cholesky factor of c00
  Matrix r1;   // upper Cholesky factor of c11
  Matrix c00;  // energy whose factor is r0

  Index dimension() const { return u.rows(); }
  double sigma_at(Index k) const { return k >= 1 && k <= sigma.size() ? sigma[k - 1] : 0.0; }
};

namespace detail {

inline Matrix upper_cholesky(const Matrix& c, const char* what, int interface) {
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() != Eigen::Success)
    throw NumericalFailure(std::string("Cholesky factorization of ") + what + " failed on interface " +
                           std::to_string(interface) + " (matrix not positive definite)");
  return llt.matrixU();
}

}  // namespace detail

/// R0^{-T} C01 R1^{-1} = U S V^T with R0^T R0 = C00 and R1^T R1 = C11.
inline SvdTriple compute_svd(int interface, const Matrix& c00, const Matrix& c01, const Matrix& c11) {
  if (c00.rows() != c00.cols() || c11.rows() != c11.cols() || c01.rows() != c00.rows() ||
      c01.cols() != c11.rows())
    throw InvalidInput("interface energy matrices have incompatible shapes");
  SvdTriple t;
  t.interface = interface;
  t.c00 = c00;
  t.r0 = detail::upper_cholesky(c00, "C00", interface);
  t.r1 = detail::upper_cholesky(c11, "C11", interface);
  const Index n0 = c00.rows();
  const Index n1 = c11.rows();
  t.sigma = Vector::Zero(n0);
  if (c01.isZero(0.0)) {
    t.u = Matrix::Identity(n0, n0);
    t.v = Matrix::Identity(n1, n1);
    return t;
  }
  const Matrix x = t.r0.transpose().triangularView<Eigen::Lower>().solve(c01);
  const Matrix m = t.r1.transpose().triangularView<Eigen::Lower>().solve(x.transpose()).transpose();
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  t.u = svd.matrixU();
  t.v = svd.matrixV();
  t.sigma.head(svd.singularValues().size()) = svd.singularValues();
  return t;
}

struct InteractionMatrices {
  Matrix c00;
  Matrix c01;
  Matrix c11;
};

/// Energies paired for the SVD of interface i. Interfaces 1..N-2 pair with
/// their right neighbour inside layer i+1; interface N-1 pairs with its left
/// neighbour inside layer N-1. A single interface has no neighbour and its
/// interaction is zero.
inline InteractionMatrices interaction_matrices(const Decomposition& d, int i) {
  const int m = d.n_interfaces();
  if (i < 1 || i > m) throw InvalidInput("interface index out of range");
  if (m == 1) {
    const Matrix& c00 = d.energy_into_right(1);
    return {c00, Matrix::Zero(c00.rows(), c00.rows()), c00};
  }
  if (i < m) {
    auto c = d.interface_energy_matrices(i);
    return {std::move(c.c00), std::move(*c.c01), std::move(*c.c11)};
  }
  auto c = d.interface_energy_matrices(m - 1);
  return {std::move(*c.c11), c.c01->transpose(), std::move(c.c00)};
}

inline std::vector<SvdTriple> interaction_svds(const Decomposition& d) {
  std::vector<SvdTriple> out;
  for (int i = 1; i <= d.n_interfaces(); ++i) {
    const auto c = interaction_matrices(d, i);
    out.push_back(compute_svd(i, c.c00, c.c01, c.c11));
  }
  return out;
}

struct ThresholdRank {
  double tau;
};
struct FixedRank {
  int r;
};
struct RankList {
  std::vector<int> ranks;
};
using RankPolicy = std::variant<ThresholdRank, FixedRank, RankList>;

/// Threshold: r_i = #{k : sigma_k >= tau}; fixed: r_i = r; list: r_i as given.
inline std::vector<int> choose_ranks(const std::vector<SvdTriple>& svds, const RankPolicy& policy) {
  std::vector<int> ranks(svds.size(), 0);
  if (const auto* t = std::get_if<ThresholdRank>(&policy)) {
    if (!(t->tau > 0.0) || !std::isfinite(t->tau)) throw InvalidInput("rank threshold must be positive");
    for (std::size_t i = 0; i < svds.size(); ++i)
      ranks[i] = static_cast<int>((svds[i].sigma.array() >= t->tau).count());
    return ranks;
  }
  if (const auto* f = std::get_if<FixedRank>(&policy)) {
    std::fill(ranks.begin(), ranks.end(), f->r);
  } else {
    const auto& list = std::get<RankList>(policy).ranks;
    if (list.size() != svds.size())
      throw InvalidInput("rank list has " + std::to_string(list.size()) + " entries for " +
                         std::to_string(svds.size()) + " interfaces");
    ranks = list;
  }
  for (std::size_t i = 0; i < svds.size(); ++i)
    if (ranks[i] < 0 || ranks[i] > svds[i].dimension())
      throw InvalidInput("rank " + std::to_string(ranks[i]) + " outside [0, " +
                         std::to_string(svds[i].dimension()) + "] on interface " + std::to_string(i + 1));
  return ranks;
}

class SlowFastBasis {
 public:
  SlowFastBasis(std::vector<SvdTriple> svds, std::vector<int> ranks) : svds_(std::move(svds)), ranks_(std::move(ranks)) {
    if (ranks_.size() != svds_.size()) throw InvalidInput("one rank per interface is required");
    slow_.reserve(svds_.size());
    for (std::size_t i = 0; i < svds_.size(); ++i) {
      const auto& t = svds_[i];
      if (ranks_[i] < 0 || ranks_[i] > t.dimension()) throw InvalidInput("rank exceeds interface dimension");
      slow_.push_back(coordinates(t, 0, ranks_[i]));
      lambda_ = std::max(lambda_, t.sigma_at(1));
      eps_f_ = std::max(eps_f_, t.sigma_at(ranks_[i] + 1));
    }
  }

  int n_interfaces() const { return static_cast<int>(svds_.size()); }
  const SvdTriple& svd(int i) const { return svds_[static_cast<std::size_t>(i - 1)]; }
  const std::vector<SvdTriple>& svds() const { return svds_; }
  int rank(int i) const { return ranks_[static_cast<std::size_t>(i - 1)]; }
  const std::vector<int>& ranks() const { return ranks_; }
  int slow_dimension() const {
    int total = 0;
    for (int r : ranks_) total += r;
    return total;
  }
  /// S_i = R0^{-1} U(:,1:r_i), C00-orthonormal columns.
  const Matrix& slow(int i) const { return slow_[static_cast<std::size_t>(i - 1)]; }
  /// R0^{-1} U(:,r_i+1:end), formed on demand.
  Matrix fast(int i) const {
    const auto& t = svd(i);
    return coordinates(t, rank(i), t.dimension() - rank(i));
  }
  double lambda() const { return lambda_; }
  /// Largest neglected singular value; zero when every fast space is empty.
  double eps_f() const { return eps_f_; }

 private:
  static Matrix coordinates(const SvdTriple& t, Index first, Index count) {
    if (count == 0) return Matrix(t.dimension(), 0);
    return t.r0.triangularView<Eigen::Upper>().solve(t.u.middleCols(first, count));
  }

  std::vector<SvdTriple> svds_;
  std::vector<int> ranks_;
  std::vector<Matrix> slow_;
  double lambda_ = 0.0;
  double eps_f_ = 0.0;
};

inline SlowFastBasis build_slow_fast_basis(const Decomposition& d, const RankPolicy& policy) {
  auto svds = interaction_svds(d);
  auto ranks = choose_ranks(svds, policy);
  return SlowFastBasis(std::move(svds), std::move(ranks));
}

/// Fast-space trace coefficients of w_{fi}: Galerkin with y = 1 over layers i
/// and i+1 restricted to the fast traces of interface i.
inline Vector solve_fast_trace(int i, const SlowFastBasis& basis, const Decomposition& d, const LoadVector& b) {
  const Matrix f = basis.fast(i);
  const Index n = basis.svd(i).dimension();
  if (f.cols() == 0) return Vector::Zero(n);
  const Matrix t = d.energy_into_left(i) + d.energy_into_right(i);
  const Vector g = d.trace_load(i, b);
  const Matrix reduced = f.transpose() * t * f;
  Eigen::LLT<Matrix> llt(0.5 * (reduced + reduced.transpose()));
  if (llt.info() != Eigen::Success)
    throw NumericalFailure("fast system on interface " + std::to_string(i) + " is singular");
  const Vector beta = llt.solve(f.transpose() * g);
  return f * beta;
}

inline Vector solve_fast(int i, const SlowFastBasis& basis, const Decomposition& d, const LoadVector& b) {
  return d.extend_trace(i, solve_fast_trace(i, basis, d, b));
}

/// Largest cross-interaction over the fast space of interface i, by power
/// iteration on P C00^{-1} C01 C11^{-1} C01^T with P the C00-orthogonal
/// projector onto the complement of the slow traces.
inline double rayleigh_interaction_oracle(int i, const SlowFastBasis& basis, const Matrix& c01, const Matrix& c11,
                                          std::uint64_t seed = 1, int max_iterations = 20000) {
  const auto& t = basis.svd(i);
  const Matrix& c00 = t.c00;
  const Matrix& s = basis.slow(i);
  if (s.cols() == t.dimension()) return 0.0;
  const Eigen::LLT<Matrix> llt00(c00);
  const Eigen::LLT<Matrix> llt11(c11);
  const Matrix k = c01 * llt11.solve(c01.transpose());
  auto project = [&](Vector x) {
    if (s.cols() > 0) x -= s * (s.transpose() * (c00 * x));
    return x;
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector x(t.dimension());
  for (Index k2 = 0; k2 < x.size(); ++k2) x[k2] = dist(rng);
  x = project(x);
  x /= std::sqrt(x.dot(c00 * x));
  double value = x.dot(k * x);
  for (int it = 0; it < max_iterations; ++it) {
    Vector next = project(llt00.solve(k * x));
    const double norm = std::sqrt(next.dot(c00 * next));
    if (norm == 0.0) return 0.0;
    next /= norm;
    const double updated = next.dot(k * next);
    x = next;
    const bool settled = std::abs(updated - value) <= 1e-15 * std::abs(updated);
    value = updated;
    if (settled) break;
  }
  return std::sqrt(std::max(value, 0.0));
}

/// Largest interaction over the span of a C00-orthonormal trace basis x.
inline double subspace_interaction(const Matrix& x, const Matrix& c01, const Matrix& c11) {
  if (x.cols() == 0) return 0.0;
  const Eigen::LLT<Matrix> llt11(c11);
  const Matrix g = x.transpose() * c01 * llt11.solve(c01.transpose() * x);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(eig.eigenvalues().maxCoeff(), 0.0));
}

/// CSV "interface,k,sigma".
inline void write_sigma_csv(std::ostream& out, const std::vector<SvdTriple>& svds, const std::string& provenance = {}) {
  if (!provenance.empty()) out << provenance << '\n';
  out << "interface,k,sigma\n";
  for (const auto& t : svds)
    for (Index k = 0; k < t.sigma.size(); ++k) out << t.interface << ',' << k + 1 << ',' << format_real(t.sigma[k]) << '\n';
}

}  // namespace layered
