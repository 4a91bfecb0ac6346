#pragma once

// Closed-form sine-mode machinery for unit-square layers.
//
// Frame: the two layers adjacent to an interface are mapped to
// (-1,1) x (0,1) with the interface at x1 = 0. Layer-frame abscissae are
// converted with to_symmetric_frame / from_symmetric_frame.

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "layered/errors.hpp"
#include "layered/format.hpp"

namespace layered::analytic {

inline constexpr double kPi = std::numbers::pi;

/// x1 in the layer frame (layers at (i-1,i)) to the frame centred on interface i.
inline double to_symmetric_frame(double x1, int interface) { return x1 - static_cast<double>(interface); }
inline double from_symmetric_frame(double s, int interface) { return s + static_cast<double>(interface); }

/// sinh(a(1-d))/sinh(a) for d in [0,1], evaluated without overflow.
inline double sinh_ratio(double a, double d) {
  return std::exp(-a * d) * (-std::expm1(-2.0 * a * (1.0 - d))) / (-std::expm1(-2.0 * a));
}

/// cosh(a(1-d))/sinh(a), the x1-derivative profile of psi_n up to the factor a.
inline double cosh_ratio(double a, double d) {
  return std::exp(-a * d) * (1.0 + std::exp(-2.0 * a * (1.0 - d))) / (-std::expm1(-2.0 * a));
}

/// psi_n(x1,x2) = sin(pi n x2) sinh(pi n (1-|x1|)) / sinh(pi n).
inline double harmonic_mode(int n, double x1, double x2) {
  if (n < 1) throw InvalidInput("mode index must be positive");
  if (std::abs(x1) > 1.0 || x2 < 0.0 || x2 > 1.0) throw InvalidInput("point outside (-1,1)x(0,1)");
  const double a = kPi * n;
  return std::sin(a * x2) * sinh_ratio(a, std::abs(x1));
}

/// Gradient of psi_n for x1 != 0.
inline std::pair<double, double> harmonic_mode_gradient(int n, double x1, double x2) {
  const double a = kPi * n;
  const double d = std::abs(x1);
  const double sign = x1 < 0.0 ? 1.0 : -1.0;
  return {sign * a * std::sin(a * x2) * cosh_ratio(a, d), a * std::cos(a * x2) * sinh_ratio(a, d)};
}

/// Gauss-Legendre rule on [lo,hi] expanded from the symmetric half tables.
template <int Points>
std::vector<std::pair<double, double>> gauss_rule(double lo, double hi) {
  using rule = boost::math::quadrature::gauss<double, Points>;
  const auto& x = rule::abscissa();
  const auto& w = rule::weights();
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  std::vector<std::pair<double, double>> nodes;
  nodes.reserve(Points);
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] == 0.0) {
      nodes.emplace_back(mid, half * w[k]);
      continue;
    }
    nodes.emplace_back(mid - half * x[k], half * w[k]);
    nodes.emplace_back(mid + half * x[k], half * w[k]);
  }
  return nodes;
}

/// Tensor Gauss quadrature of g over (-1,0)x(0,1) and (0,1)x(0,1).
template <int Points>
double integrate_square_pair(const std::function<double(double, double)>& g) {
  double total = 0.0;
  const auto rule_x2 = gauss_rule<Points>(0.0, 1.0);
  for (const double lo : {-1.0, 0.0}) {
    const auto rule_x1 = gauss_rule<Points>(lo, lo + 1.0);
    for (const auto& [x1, w1] : rule_x1)
      for (const auto& [x2, w2] : rule_x2) total += w1 * w2 * g(x1, x2);
  }
  return total;
}

struct InterfaceCoefficients {
  std::vector<double> alpha;  // alpha[m-1] = alpha_m
  bool converged = true;      // 64- and 48-point rules agree to 1e-12
  double max_discrepancy = 0.0;
};

/// alpha_m = tanh(pi m)/(pi m) * int_Omega f psi_m for f given in the symmetric frame.
inline InterfaceCoefficients interface_coefficients(const std::function<double(double, double)>& f,
                                                    int n_max = 32) {
  if (n_max < 1) throw InvalidInput("n_max must be positive");
  InterfaceCoefficients out;
  out.alpha.reserve(static_cast<std::size_t>(n_max));
  for (int m = 1; m <= n_max; ++m) {
    auto integrand = [&](double x1, double x2) { return f(x1, x2) * harmonic_mode(m, x1, x2); };
    const double fine = integrate_square_pair<64>(integrand);
    const double coarse = integrate_square_pair<48>(integrand);
    const double scale = std::tanh(kPi * m) / (kPi * m);
    const double gap = scale * std::abs(fine - coarse);
    out.max_discrepancy = std::max(out.max_discrepancy, gap);
    if (gap > 1e-12 * std::max(1.0, std::abs(scale * fine))) out.converged = false;
    out.alpha.push_back(scale * fine);
  }
  return out;
}

/// alpha_1 for f = sin(pi x2).
inline double sine_source_alpha1() {
  return 2.0 * std::pow(std::sinh(kPi), 2) * std::tanh(kPi / 2.0) / (kPi * kPi * std::sinh(2.0 * kPi));
}

/// Explicit interface solution for f = sin(pi x2) on (-1,1)x(0,1).
inline double closed_form_wGamma(double x1, double x2) {
  const double factor = 2.0 * std::sinh(kPi) * std::tanh(kPi / 2.0) / (kPi * kPi * std::sinh(2.0 * kPi));
  return factor * std::sin(kPi * x2) * std::sinh(kPi * (1.0 - std::abs(x1)));
}

/// Energy of psi_n on one half square.
inline double mode_energy(int n) {
  const double a = kPi * n;
  // a sinh(2a) / (4 sinh^2 a) = a coth(a) / 2
  return 0.5 * a / std::tanh(a);
}

/// Cross energy on one unit square of the extensions of sin(pi n x2) from
/// its two opposite vertical sides.
inline double mode_cross(int n) {
  const double a = kPi * n;
  return -a * std::exp(-a) / (-std::expm1(-2.0 * a));
}

/// Normalized interaction |mode_cross| / mode_energy = 1/cosh(pi n).
inline double mode_interaction(int n) {
  if (n < 1) throw InvalidInput("mode index must be positive");
  return 1.0 / std::cosh(kPi * n);
}

struct AnalyticConstants {
  int n_s = 0;
  double decay_constant = 0.0;  // C = 2/(1-e^{-2 pi})
  double eps_f_bound = 0.0;     // C e^{-pi (n_s+1)}
  double lambda_bound = 0.0;    // 2 e^{-pi}/(1-e^{-2 pi})
};

inline double decay_constant() { return 2.0 / (-std::expm1(-2.0 * kPi)); }

inline AnalyticConstants interaction_bounds(int n_s) {
  if (n_s < 0) throw InvalidInput("slow mode cutoff must be nonnegative");
  AnalyticConstants c;
  c.n_s = n_s;
  c.decay_constant = decay_constant();
  c.eps_f_bound = c.decay_constant * std::exp(-kPi * (n_s + 1));
  c.lambda_bound = c.decay_constant * std::exp(-kPi);
  return c;
}

/// CSV "n,alpha_n,mode_interaction".
inline void write_mode_table(std::ostream& out, const std::vector<double>& alpha, const std::string& provenance = {}) {
  if (!provenance.empty()) out << provenance << '\n';
  out << "n,alpha_n,mode_interaction\n";
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    const int n = static_cast<int>(k) + 1;
    out << n << ',' << format_real(alpha[k]) << ',' << format_real(mode_interaction(n)) << '\n';
  }
}

}  // namespace layered::analytic
