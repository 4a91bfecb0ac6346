#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "layered/layered.hpp"

namespace testsupport {

using namespace layered;

/// Nodal values of sin(pi n x2) on interface i.
inline Vector sine_trace(const Problem& p, int i, int n) {
  const auto& dofs = p.part.interface(i);
  Vector v(static_cast<Index>(dofs.size()));
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    const auto& pt = p.mesh.vertices[static_cast<std::size_t>(p.part.vertex_of_dof[static_cast<std::size_t>(dofs[k])])];
    v[static_cast<Index>(k)] = std::sin(std::numbers::pi * n * pt.x2);
  }
  return v;
}

/// Nodal interpolant of g(x1, x2) on the free DOFs.
template <class F>
Vector interpolate(const Problem& p, F g) {
  Vector v(p.part.n_free);
  for (Index d = 0; d < p.part.n_free; ++d) {
    const auto& pt = p.mesh.vertices[static_cast<std::size_t>(p.part.vertex_of_dof[static_cast<std::size_t>(d)])];
    v[d] = g(pt.x1, pt.x2);
  }
  return v;
}

inline ParameterVector random_parameters(std::mt19937_64& rng, int n, double a = 1.0, double b = 10.0) {
  std::uniform_real_distribution<double> dist(a, b);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = dist(rng);
  return ParameterVector(std::move(y));
}

inline Vector random_vector(std::mt19937_64& rng, Index n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector v(n);
  for (Index k = 0; k < n; ++k) v[k] = dist(rng);
  return v;
}

/// Interior rows of the layer stiffness applied to a field, relative to the
/// field's layer energy scale.
inline double interior_residual(const Problem& p, int layer, const Vector& u) {
  const Vector r = p.K[layer] * u;
  double worst = 0.0;
  for (Index d : p.part.interior(layer)) worst = std::max(worst, std::abs(r[d]));
  const double scale = std::max(1e-300, (p.K[layer] * u).cwiseAbs().maxCoeff() + u.cwiseAbs().maxCoeff());
  return worst / scale;
}

}  // namespace testsupport
