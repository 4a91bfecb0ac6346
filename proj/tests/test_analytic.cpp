#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "layered/analytic_square.hpp"

using namespace layered;
using namespace layered::analytic;
using Catch::Approx;

namespace {

// Test-side gradient formulas, written out with plain sinh/cosh.
struct Grad {
  double g1, g2;
};

// Extension of sin(pi n x2) from the side x1 = 0 of the unit square into it.
Grad grad_from_left(int n, double x1, double x2) {
  const double a = kPi * n;
  return {-a * std::sin(a * x2) * std::cosh(a * (1 - x1)) / std::sinh(a),
          a * std::cos(a * x2) * std::sinh(a * (1 - x1)) / std::sinh(a)};
}

// Extension from the side x1 = 1.
Grad grad_from_right(int n, double x1, double x2) {
  const double a = kPi * n;
  return {a * std::sin(a * x2) * std::cosh(a * x1) / std::sinh(a),
          a * std::cos(a * x2) * std::sinh(a * x1) / std::sinh(a)};
}

template <class F>
double unit_square_quadrature(F g) {
  double total = 0.0;
  const auto rule = gauss_rule<64>(0.0, 1.0);
  for (const auto& [x1, w1] : rule)
    for (const auto& [x2, w2] : rule) total += w1 * w2 * g(x1, x2);
  return total;
}

double half_energy(int m, int n) {
  return unit_square_quadrature([&](double x1, double x2) {
    const Grad a = grad_from_left(m, x1, x2), b = grad_from_left(n, x1, x2);
    return a.g1 * b.g1 + a.g2 * b.g2;
  });
}

double cross_energy(int n) {
  return unit_square_quadrature([&](double x1, double x2) {
    const Grad a = grad_from_left(n, x1, x2), b = grad_from_right(n, x1, x2);
    return a.g1 * b.g1 + a.g2 * b.g2;
  });
}

}  // namespace

TEST_CASE("harmonic modes") {
  CHECK(harmonic_mode(1, 0.0, 0.5) == Approx(1.0).epsilon(1e-15));
  for (int n = 1; n <= 40; ++n)
    for (double x2 : {0.0, 0.3, 0.77, 1.0}) {
      CHECK(harmonic_mode(n, 1.0, x2) == 0.0);
      CHECK(harmonic_mode(n, -1.0, x2) == 0.0);
      CHECK(harmonic_mode(n, 0.0, x2) == Approx(std::sin(kPi * n * x2)).margin(1e-15));
    }
  CHECK(std::isfinite(harmonic_mode(400, 0.1, 0.3)));
  CHECK(harmonic_mode(2, 0.25, 0.3) == Approx(std::sin(2 * kPi * 0.3) * std::sinh(2 * kPi * 0.75) / std::sinh(2 * kPi)));
  CHECK(harmonic_mode(2, -0.25, 0.3) == harmonic_mode(2, 0.25, 0.3));
  CHECK_THROWS_AS(harmonic_mode(0, 0.0, 0.5), InvalidInput);
  CHECK_THROWS_AS(harmonic_mode(1, 1.5, 0.5), InvalidInput);
  const auto g = harmonic_mode_gradient(2, 0.25, 0.3);
  const Grad ref = grad_from_left(2, 0.25, 0.3);
  CHECK(g.first == Approx(ref.g1));
  CHECK(g.second == Approx(ref.g2));
}

TEST_CASE("harmonic modes satisfy the discrete Laplace equation to second order") {
  std::vector<double> residuals;
  for (int m : {32, 64}) {
    const double h = 1.0 / m;
    double worst = 0.0;
    for (double lo : {-1.0, 0.0})
      for (int i = 1; i < m; ++i)
        for (int j = 1; j < m; ++j) {
          const double x1 = lo + i * h, x2 = j * h;
          const double lap = harmonic_mode(2, x1 + h, x2) + harmonic_mode(2, x1 - h, x2) + harmonic_mode(2, x1, x2 + h) +
                             harmonic_mode(2, x1, x2 - h) - 4.0 * harmonic_mode(2, x1, x2);
          worst = std::max(worst, std::abs(lap) / (h * h));
        }
    residuals.push_back(worst);
  }
  CHECK(residuals[0] / residuals[1] > 3.5);
}

TEST_CASE("interface coefficients") {
  const auto sine = interface_coefficients([](double, double x2) { return std::sin(kPi * x2); }, 8);
  CHECK(sine.converged);
  REQUIRE(sine.alpha.size() == 8);
  CHECK(sine.alpha[0] == Approx(0.0925805356053675445).epsilon(1e-13));
  CHECK(sine_source_alpha1() == Approx(0.0925805356053675445).epsilon(1e-14));
  for (std::size_t m = 1; m < 8; ++m) CHECK(std::abs(sine.alpha[m]) < 1e-12);

  const auto zero = interface_coefficients([](double, double) { return 0.0; }, 4);
  for (double a : zero.alpha) CHECK(a == 0.0);

  const auto second = interface_coefficients([](double, double x2) { return std::sin(2 * kPi * x2); }, 4);
  CHECK(std::abs(second.alpha[0]) < 1e-12);
  CHECK(second.alpha[1] == Approx(0.025235690486525478).epsilon(1e-12));

  CHECK_THROWS_AS(interface_coefficients([](double, double) { return 1.0; }, 0), InvalidInput);
}

TEST_CASE("closed-form interface solution") {
  for (double x2 : {0.1, 0.5, 0.9}) {
    CHECK(closed_form_wGamma(1.0, x2) == 0.0);
    CHECK(closed_form_wGamma(-1.0, x2) == 0.0);
  }
  CHECK(closed_form_wGamma(0.0, 0.5) == Approx(0.0925805356053675445).epsilon(1e-14));
  const double a1 = interface_coefficients([](double, double x2) { return std::sin(kPi * x2); }, 1).alpha[0];
  for (double x1 : {-0.9, -0.3, 0.0, 0.4, 0.8})
    for (double x2 : {0.05, 0.5, 0.7}) CHECK(std::abs(closed_form_wGamma(x1, x2) - a1 * harmonic_mode(1, x1, x2)) < 1e-12);
}

TEST_CASE("mode interaction equals 1/cosh(pi n) by quadrature of the gradients") {
  for (int n = 1; n <= 6; ++n) {
    const double energy = half_energy(n, n);
    const double cross = cross_energy(n);
    CHECK(energy == Approx(mode_energy(n)).epsilon(1e-12));
    CHECK(cross == Approx(mode_cross(n)).epsilon(1e-10));
    CHECK(std::abs(cross) / energy == Approx(1.0 / std::cosh(kPi * n)).epsilon(1e-10));
    CHECK(mode_interaction(n) == Approx(std::abs(cross) / energy).epsilon(1e-10));
  }
  CHECK(mode_interaction(1) == Approx(0.0862667383340544147).epsilon(1e-14));
  CHECK(mode_interaction(12) / mode_interaction(11) == Approx(std::exp(-kPi)).epsilon(1e-12));
  for (int n = 1; n <= 10; ++n) CHECK(mode_interaction(n) <= 2.004 * std::exp(-kPi * n));
  CHECK_THROWS_AS(mode_interaction(0), InvalidInput);
}

TEST_CASE("sine modes are energy orthogonal") {
  for (int m = 1; m <= 4; ++m)
    for (int n = 1; n <= 4; ++n)
      if (m != n) CHECK(std::abs(half_energy(m, n)) < 1e-10);
}

TEST_CASE("averaging identity for symmetric interface functions") {
  // a_1 = a_2 for mirror-symmetric u, v, so y1 a_1 + y2 a_2 = (y1+y2)/2 (a_1 + a_2).
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> coef(-1.0, 1.0), param(1.0, 10.0);
  for (int trial = 0; trial < 10; ++trial) {
    double cu[4], cv[4];
    for (int k = 0; k < 4; ++k) {
      cu[k] = coef(rng);
      cv[k] = coef(rng);
    }
    auto grad = [&](const double* c, double x1, double x2) {
      Grad g{0, 0};
      for (int k = 0; k < 4; ++k) {
        const auto [g1, g2] = harmonic_mode_gradient(k + 1, x1, x2);
        g.g1 += c[k] * g1;
        g.g2 += c[k] * g2;
      }
      return g;
    };
    auto inner = [&](double lo) {
      double total = 0.0;
      const auto r1 = gauss_rule<64>(lo, lo + 1.0), r2 = gauss_rule<64>(0.0, 1.0);
      for (const auto& [x1, w1] : r1)
        for (const auto& [x2, w2] : r2) {
          const Grad a = grad(cu, x1, x2), b = grad(cv, x1, x2);
          total += w1 * w2 * (a.g1 * b.g1 + a.g2 * b.g2);
        }
      return total;
    };
    const double a_left = inner(-1.0), a_right = inner(0.0);
    const double y1 = param(rng), y2 = param(rng);
    const double lhs = y1 * a_left + y2 * a_right;
    const double rhs = 0.5 * (y1 + y2) * (a_left + a_right);
    double nu = 0.0, nv = 0.0;
    for (int k = 0; k < 4; ++k) {
      nu += 2 * cu[k] * cu[k] * mode_energy(k + 1);
      nv += 2 * cv[k] * cv[k] * mode_energy(k + 1);
    }
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::sqrt(nu * nv) * (y1 + y2));
  }
}

TEST_CASE("interaction bounds") {
  const auto b0 = interaction_bounds(0);
  CHECK(b0.decay_constant == Approx(2.0037418731973213).epsilon(1e-15));
  CHECK(std::abs(b0.decay_constant - 2.004) < 5e-4);
  CHECK(b0.lambda_bound == Approx(0.086589537530046942).epsilon(1e-14));
  CHECK(b0.eps_f_bound == Approx(0.086589537530046942).epsilon(1e-14));
  CHECK(interaction_bounds(1).eps_f_bound == Approx(0.0037418731973212882).epsilon(1e-14));
  CHECK(interaction_bounds(2).eps_f_bound == Approx(0.00016170100250244228).epsilon(1e-14));
  for (int n = 0; n < 10; ++n) {
    const double ratio = interaction_bounds(n + 1).eps_f_bound / interaction_bounds(n).eps_f_bound;
    CHECK(ratio == Approx(std::exp(-kPi)).epsilon(1e-14));
    CHECK(interaction_bounds(n).eps_f_bound > 0.0);
  }
  CHECK_THROWS_AS(interaction_bounds(-1), InvalidInput);
}

TEST_CASE("frame conversion round trip") {
  for (int i : {1, 2, 5})
    for (double x : {0.0, 0.25, 1.0, 3.5}) CHECK(from_symmetric_frame(to_symmetric_frame(x, i), i) == x);
  CHECK(to_symmetric_frame(1.5, 1) == 0.5);
}

TEST_CASE("mode table CSV") {
  std::ostringstream out;
  write_mode_table(out, {0.5, 0.0}, "# h");
  CHECK(out.str().rfind("# h\nn,alpha_n,mode_interaction\n1,0.5,0.086266738334054", 0) == 0);
}
