#pragma once

#include "layered/analytic_square.hpp"
#include "layered/config.hpp"
#include "layered/decomposition.hpp"
#include "layered/errors.hpp"
#include "layered/fem.hpp"
#include "layered/format.hpp"
#include "layered/geometry.hpp"
#include "layered/rom.hpp"
#include "layered/slowfast.hpp"

namespace layered {

/// Mesh, DOFs, layer stiffness and load for one configuration.
struct Problem {
  Mesh mesh;
  DofPartition part;
  LayerStiffness K;
  LoadVector b;
};

inline Problem make_problem(const LayerProfile& profile, int n_layers, double h, const std::string& source) {
  Problem p;
  p.mesh = build_layered_mesh(profile, n_layers, h);
  p.part = classify_dofs(p.mesh);
  p.K = assemble_layer_stiffness(p.mesh, p.part);
  p.b = assemble_load(p.mesh, p.part, parse_source(source), source);
  return p;
}

inline Problem make_problem(const RunConfig& c) { return make_problem(c.profile(), c.layers(), c.h(), c.source()); }

}  // namespace layered
