#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include "support.hpp"

using namespace layered;
using namespace testsupport;
using Catch::Approx;

namespace {

const double kPi = std::numbers::pi;

double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("subdomain solutions") {
  const auto zero = make_problem(LayerProfile::crown(), 3, 0.125, "zero");
  const Decomposition dz(zero.K, zero.part);
  for (int l = 1; l <= 3; ++l) CHECK(dz.solve_subdomain(l, zero.b).norm() == 0.0);
  CHECK_THROWS_AS(dz.solve_subdomain(0, zero.b), InvalidInput);
  CHECK_THROWS_AS(dz.solve_subdomain(4, zero.b), InvalidInput);

  const auto p = make_problem(LayerProfile::crown(), 3, 0.125, "x2");
  const Decomposition d(p.K, p.part);
  for (int l = 1; l <= 3; ++l) {
    const Vector w = d.solve_subdomain(l, p.b);
    std::vector<char> inside(static_cast<std::size_t>(p.part.n_free), 0);
    for (Index k : p.part.interior(l)) inside[static_cast<std::size_t>(k)] = 1;
    for (Index k = 0; k < p.part.n_free; ++k)
      if (!inside[static_cast<std::size_t>(k)]) CHECK(w[k] == 0.0);
    // Layer Poisson problem with y = 1: interior rows of A_l w = b.
    const Vector r = p.K[l] * w - p.b.values;
    for (Index k : p.part.interior(l)) CHECK(std::abs(r[k]) < 1e-13);
  }
}

TEST_CASE("subdomain solution reproduces a Laplace eigenfunction") {
  // f = sin(pi x2) sin(pi x1) restricted to each unit square layer is
  // 2 pi^2 times an eigenfunction vanishing on the layer boundary.
  std::vector<double> errors;
  for (int m : {8, 16, 32}) {
    const auto p = make_problem(LayerProfile::square(), 3, 1.0 / m, "sin(pi*x2)*sin(pi*x1)");
    const Decomposition d(p.K, p.part);
    const Vector exact = interpolate(p, [](double x1, double x2) {
      return std::sin(kPi * x2) * std::sin(kPi * x1) / (2.0 * kPi * kPi);
    });
    double err = 0.0;
    for (int l = 1; l <= 3; ++l) {
      const Vector w = d.solve_subdomain(l, p.b);
      for (Index k : p.part.interior(l)) err = std::max(err, std::abs(w[k] - exact[k]));
    }
    errors.push_back(err);
  }
  CHECK(errors[0] / errors[1] > 3.5);
  CHECK(errors[1] / errors[2] > 3.5);
  CHECK(errors[2] < 1e-4);
}

TEST_CASE("harmonic extension operators") {
  const auto p = make_problem(LayerProfile::crown(), 3, 1.0 / 16, "x2");
  const Decomposition d(p.K, p.part);
  for (auto side : {ExtensionSide::FromLeft, ExtensionSide::FromRight}) {
    const auto op = d.build_extension(1, side);
    CHECK(op.layer == 2);
    CHECK(op.trace_interface == (side == ExtensionSide::FromLeft ? 1 : 2));
    const auto& other = p.part.interface(side == ExtensionSide::FromLeft ? 2 : 1);
    for (std::size_t k = 0; k < op.trace.size(); ++k) {
      Vector unit = Vector::Zero(static_cast<Index>(op.trace.size()));
      unit[static_cast<Index>(k)] = 1.0;
      const Vector col = op.apply(unit);
      // Discretely harmonic, unit trace, zero on the opposite interface.
      CHECK(interior_residual(p, 2, col) < 1e-10);
      for (std::size_t j = 0; j < op.trace.size(); ++j) CHECK(col[op.trace[j]] == (j == k ? 1.0 : 0.0));
      for (Index o : other) CHECK(col[o] == 0.0);
      const Vector patch = solve_patch_dirichlet(p.K, p.part, 2, {{op.trace[k], 1.0}});
      CHECK((col - patch).cwiseAbs().maxCoeff() < 1e-12);
    }
    std::mt19937_64 rng(3);
    const Vector a = random_vector(rng, static_cast<Index>(op.trace.size()));
    const Vector b = random_vector(rng, static_cast<Index>(op.trace.size()));
    CHECK((op.apply(a + b) - op.apply(a) - op.apply(b)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(op.apply(Vector::Zero(3)), InvalidInput);
  }
  CHECK_THROWS_AS(d.build_extension(2, ExtensionSide::FromRight), InvalidInput);
  CHECK_THROWS_AS(d.build_extension(0, ExtensionSide::FromLeft), InvalidInput);
}

TEST_CASE("sine trace extends to the analytic harmonic mode") {
  for (int n : {1, 2}) {
    std::vector<double> errors;
    for (int m : {16, 32, 64}) {
      const auto p = make_problem(LayerProfile::square(), 3, 1.0 / m, "zero");
      const Decomposition d(p.K, p.part);
      const Vector field = d.build_extension(1, ExtensionSide::FromLeft).apply(sine_trace(p, 1, n));
      const Vector exact = interpolate(p, [n](double x1, double x2) {
        return x1 >= 1.0 && x1 <= 2.0 ? analytic::harmonic_mode(n, x1 - 1.0, x2) : 0.0;
      });
      double err = 0.0;
      for (Index k : p.part.interior(2)) err = std::max(err, std::abs(field[k] - exact[k]));
      errors.push_back(err);
    }
    CHECK(errors[0] / errors[1] > 3.5);
    CHECK(errors[1] / errors[2] > 3.5);
  }
}

TEST_CASE("interface energy matrices") {
  const auto p = make_problem(LayerProfile::crown(), 3, 1.0 / 80, "x2");
  const Decomposition d(p.K, p.part);
  const auto c = d.interface_energy_matrices(1);
  REQUIRE(c.c01.has_value());
  REQUIRE(c.c11.has_value());
  CHECK((c.c00 - c.c00.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(c.c00).eigenvalues().minCoeff() > 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(*c.c11).eigenvalues().minCoeff() > 0.0);
  CHECK(c.c01->rows() == c.c00.rows());
  CHECK(c.c01->cols() == c.c11->rows());

  const auto last = d.interface_energy_matrices(2);
  CHECK_FALSE(last.c01.has_value());
  CHECK_FALSE(last.c11.has_value());
  CHECK_THROWS_AS(d.cross_energy(2), InvalidInput);
  CHECK_NOTHROW(d.cross_energy(1));

  // C_nm = Z^T A Z computed from the extension fields directly.
  const auto z0 = d.build_extension(1, ExtensionSide::FromLeft);
  const auto z1 = d.build_extension(1, ExtensionSide::FromRight);
  std::mt19937_64 rng(11);
  const Vector a = random_vector(rng, c.c00.rows());
  const Vector b = random_vector(rng, c.c11->rows());
  const double direct = p.K[2].quadratic(z0.apply(a), z1.apply(b));
  CHECK(a.dot(*c.c01 * b) == Approx(direct).epsilon(1e-10));
  CHECK(a.dot(c.c00 * a) == Approx(p.K[2].quadratic(z0.apply(a), z0.apply(a))).epsilon(1e-10));
}

TEST_CASE("mirror symmetry of the interface energies") {
  const auto p = make_problem(LayerProfile::crown(), 4, 1.0 / 24, "x2");
  const Decomposition d(p.K, p.part);
  for (int i = 1; i + 1 <= d.n_interfaces(); ++i) {
    const auto ci = d.interface_energy_matrices(i);
    const auto cn = d.interface_energy_matrices(i + 1);
    const double scale = ci.c00.cwiseAbs().maxCoeff();
    CHECK((*ci.c11 - cn.c00).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  }
  for (int i = 1; i <= d.n_interfaces(); ++i) {
    const double scale = d.energy_into_right(i).cwiseAbs().maxCoeff();
    CHECK((d.energy_into_left(i) - d.energy_into_right(i)).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  }
  const double s = d.cross_energy(1).cwiseAbs().maxCoeff();
  // Reflecting layer 2 onto layer 3 swaps the roles of the two interfaces.
  CHECK((d.cross_energy(1).transpose() - d.cross_energy(2)).cwiseAbs().maxCoeff() <= 1e-12 * s);
}

TEST_CASE("square-layer energies match the sine-mode formulas") {
  std::vector<double> e_diag, e_cross;
  for (int m : {32, 64}) {
    const auto p = make_problem(LayerProfile::square(), 3, 1.0 / m, "zero");
    const Decomposition d(p.K, p.part);
    const auto c = d.interface_energy_matrices(1);
    double worst_diag = 0.0, worst_cross = 0.0;
    for (int n : {1, 2, 3}) {
      const Vector s1 = sine_trace(p, 1, n);
      const Vector s2 = sine_trace(p, 2, n);
      worst_diag = std::max(worst_diag, std::abs(s1.dot(c.c00 * s1) / analytic::mode_energy(n) - 1.0));
      worst_cross = std::max(worst_cross, std::abs(s1.dot(*c.c01 * s2) / analytic::mode_cross(n) - 1.0));
      // Different modes are energy-orthogonal.
      const Vector other = sine_trace(p, 1, n + 1);
      CHECK(std::abs(other.dot(c.c00 * s1)) < 1e-12 * analytic::mode_energy(n));
    }
    e_diag.push_back(worst_diag);
    e_cross.push_back(worst_cross);
  }
  // Relative error scales like (pi n h)^2, about 0.02 for n = 3 at h = 1/64.
  CHECK(e_diag[1] < 0.03);
  CHECK(e_cross[1] < 0.03);
  CHECK(e_diag[0] / e_diag[1] > 3.5);
  CHECK(e_cross[0] / e_cross[1] > 3.5);
}

TEST_CASE("subdomain and interface parts are energy orthogonal") {
  const auto p = make_problem(LayerProfile::crown(), 3, 1.0 / 16, "x2");
  const Decomposition d(p.K, p.part);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const ParameterVector y = random_parameters(rng, 3);
    for (int i = 1; i <= 2; ++i) {
      const Vector z = d.extend_trace(i, random_vector(rng, static_cast<Index>(p.part.interface_size(i))));
      for (int l = 1; l <= 3; ++l) {
        const Vector w = d.solve_subdomain(l, p.b);
        Vector v = Vector::Zero(p.part.n_free);
        for (Index k : p.part.interior(l)) v[k] = std::uniform_real_distribution<double>(-1, 1)(rng);
        const double nz = energy_norm(p.K, y, z);
        CHECK(std::abs(energy_inner(p.K, y, w, z)) <= 1e-10 * energy_norm(p.K, y, w) * nz);
        CHECK(std::abs(energy_inner(p.K, y, v, z)) <= 1e-10 * energy_norm(p.K, y, v) * nz);
      }
    }
  }
}

TEST_CASE("decomposition completeness") {
  const auto p = make_problem(LayerProfile::crown(), 3, 1.0 / 16, "x2");
  const Decomposition d(p.K, p.part);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const ParameterVector y = random_parameters(rng, 3);
    Vector rest = solve_full(p.K, y, p.b, SolverBackend::Direct);
    for (int l = 1; l <= 3; ++l) rest -= d.solve_subdomain(l, p.b) / y[static_cast<std::size_t>(l - 1)];
    for (int l = 1; l <= 3; ++l) CHECK(interior_residual(p, l, rest) < 1e-10);
    // The remainder is the sum of its interface extensions.
    Vector rebuilt = Vector::Zero(p.part.n_free);
    for (int i = 1; i <= 2; ++i) {
      const auto& dofs = p.part.interface(i);
      Vector trace(static_cast<Index>(dofs.size()));
      for (std::size_t k = 0; k < dofs.size(); ++k) trace[static_cast<Index>(k)] = rest[dofs[k]];
      rebuilt += d.extend_trace(i, trace);
    }
    CHECK((rebuilt - rest).norm() <= 1e-10 * rest.norm());
  }
}

TEST_CASE("trace load equals the load of the extended unit traces") {
  const auto p = make_problem(LayerProfile::crown(), 3, 1.0 / 16, "x2");
  const Decomposition d(p.K, p.part);
  const Vector g = d.trace_load(2, p.b);
  for (Index k = 0; k < g.size(); ++k) {
    Vector unit = Vector::Zero(g.size());
    unit[k] = 1.0;
    CHECK(g[k] == Approx(p.b.values.dot(d.extend_trace(2, unit))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(d.extend_trace(1, Vector::Zero(2)), InvalidInput);
}
