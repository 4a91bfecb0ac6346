#pragma once

// Reduced parameter-to-solution map, the exact two-layer map, error sweeps
// and n-width reporting.

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <charconv>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "layered/analytic_square.hpp"
#include "layered/decomposition.hpp"
#include "layered/errors.hpp"
#include "layered/fem.hpp"
#include "layered/format.hpp"
#include "layered/slowfast.hpp"

namespace layered {

struct RomSolution {
  std::vector<double> subdomain_coefficients;  // 1/y_i
  std::vector<double> fast_coefficients;       // 2/(y_i+y_{i+1})
  Vector slow_coefficients;                    // c(y)
};

class ReducedModel {
 public:
  int n_layers = 0;
  Index n_free = 0;
  std::vector<int> ranks;
  std::vector<Vector> sigma;  // per interface
  double lambda = 0.0;
  double eps_f = 0.0;
  std::vector<Vector> subdomain;  // w_{Omega_i}
  std::vector<Vector> fast;       // w_{fi}
  Matrix slow;                    // extended slow basis, one column per slow trace
  std::vector<Matrix> blocks;     // S^T A_j S
  Vector load;                    // S^T b

  int slow_dimension() const { return static_cast<int>(slow.cols()); }
  int dimension() const { return 2 * n_layers - 1 + slow_dimension(); }

  RomSolution evaluate(const ParameterVector& y) const {
    if (static_cast<int>(y.size()) != n_layers)
      throw InvalidInput("parameter vector has " + std::to_string(y.size()) + " entries for " +
                         std::to_string(n_layers) + " layers");
    RomSolution s;
    for (int i = 0; i < n_layers; ++i) s.subdomain_coefficients.push_back(1.0 / y[static_cast<std::size_t>(i)]);
    for (int i = 0; i + 1 < n_layers; ++i)
      s.fast_coefficients.push_back(2.0 / (y[static_cast<std::size_t>(i)] + y[static_cast<std::size_t>(i + 1)]));
    const Index m = slow.cols();
    s.slow_coefficients = Vector::Zero(m);
    if (m == 0) return s;
    Matrix system = Matrix::Zero(m, m);
    for (int j = 0; j < n_layers; ++j) system += y[static_cast<std::size_t>(j)] * blocks[static_cast<std::size_t>(j)];
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success) throw NumericalFailure("reduced slow system is not positive definite");
    s.slow_coefficients = llt.solve(load);
    return s;
  }

  Vector assemble(const RomSolution& s) const {
    Vector u = Vector::Zero(n_free);
    for (std::size_t i = 0; i < subdomain.size(); ++i) u += s.subdomain_coefficients[i] * subdomain[i];
    for (std::size_t i = 0; i < fast.size(); ++i) u += s.fast_coefficients[i] * fast[i];
    if (slow.cols() > 0) u += slow * s.slow_coefficients;
    return u;
  }

  Vector solve(const ParameterVector& y) const { return assemble(evaluate(y)); }
};

/// Precomputes every y-independent part of the approximate map.
inline ReducedModel build_rom(const Decomposition& d, const LayerStiffness& K, const LoadVector& b,
                              const SlowFastBasis& basis) {
  if (K.size() != d.n_free() || b.values.size() != d.n_free() || basis.n_interfaces() != d.n_interfaces())
    throw InvalidInput("reduced model inputs are built on different meshes");
  ReducedModel rom;
  rom.n_layers = d.n_layers();
  rom.n_free = d.n_free();
  rom.ranks = basis.ranks();
  rom.lambda = basis.lambda();
  rom.eps_f = basis.eps_f();
  for (const auto& t : basis.svds()) rom.sigma.push_back(t.sigma);
  for (int i = 1; i <= d.n_layers(); ++i) rom.subdomain.push_back(d.solve_subdomain(i, b));
  for (int i = 1; i <= d.n_interfaces(); ++i) rom.fast.push_back(solve_fast(i, basis, d, b));

  rom.slow = Matrix(d.n_free(), basis.slow_dimension());
  Index col = 0;
  for (int i = 1; i <= d.n_interfaces(); ++i) {
    const Matrix& s = basis.slow(i);
    if (s.cols() == 0) continue;
    rom.slow.middleCols(col, s.cols()) = d.extend_traces(i, s);
    col += s.cols();
  }
  for (int j = 1; j <= d.n_layers(); ++j) {
    Matrix block = rom.slow.transpose() * (K[j] * rom.slow);
    rom.blocks.push_back(0.5 * (block + block.transpose()));
  }
  rom.load = rom.slow.transpose() * b.values;
  return rom;
}

/// ||truth - approx||_E / ||truth||_E at y; NaN for a zero truth.
inline double relative_error(const LayerStiffness& K, const ParameterVector& y, const Vector& truth,
                             const Vector& approx) {
  const double denom = energy_norm(K, y, truth);
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return energy_norm(K, y, truth - approx) / denom;
}

inline double relative_error(const ReducedModel& rom, const LayerStiffness& K, const ParameterVector& y,
                             const Vector& truth) {
  return relative_error(K, y, truth, rom.solve(y));
}

/// u(y) = w1/y1 + w2/y2 + 2/(y1+y2) wG, recovered from three truth solves.
struct TwoLayerMap {
  Vector w1;
  Vector w2;
  Vector w_gamma;

  Vector evaluate(const ParameterVector& y) const {
    if (y.size() != 2) throw InvalidInput("two-layer map takes two parameters");
    return w1 / y[0] + w2 / y[1] + (2.0 / (y[0] + y[1])) * w_gamma;
  }
};

inline TwoLayerMap two_layer_exact(const LayerStiffness& K, const DofPartition& part, const LoadVector& b,
                                   SolverBackend backend = SolverBackend::Direct) {
  if (K.n_layers() != 2 || part.n_layers != 2) throw InvalidInput("the exact map needs exactly two layers");
  const double points[3][2] = {{1.0, 1.0}, {1.0, 2.0}, {2.0, 1.0}};
  Eigen::Matrix3d coeff;
  std::vector<Vector> solves;
  for (int k = 0; k < 3; ++k) {
    const double y1 = points[k][0];
    const double y2 = points[k][1];
    coeff.row(k) << 1.0 / y1, 1.0 / y2, 2.0 / (y1 + y2);
    solves.push_back(solve_full(K, ParameterVector({y1, y2}), b, backend));
  }
  const Eigen::Matrix3d inv = coeff.inverse();
  TwoLayerMap map;
  Vector* out[3] = {&map.w1, &map.w2, &map.w_gamma};
  for (int r = 0; r < 3; ++r) *out[r] = inv(r, 0) * solves[0] + inv(r, 1) * solves[1] + inv(r, 2) * solves[2];

  // Each subdomain part must vanish outside its own layer interior.
  for (int layer = 1; layer <= 2; ++layer) {
    const Vector& w = layer == 1 ? map.w1 : map.w2;
    Vector outside = w;
    for (Index dof : part.interior(layer)) outside[dof] = 0.0;
    const double norm = w.norm();
    if (norm > 0.0 && outside.norm() > 1e-8 * norm)
      throw ConsistencyError("layer " + std::to_string(layer) +
                             " part of the two-layer map leaks outside its layer; mesh is not mirror symmetric");
  }
  return map;
}

struct SweepOptions {
  std::vector<int> ranks{5, 4, 3, 2, 1};
  int n_samples = 100;
  double lower = 1.0;
  double upper = 10.0;
  std::uint64_t seed = 20240601;
};

struct ErrorRow {
  int r = 0;
  double sigma_r = 0.0;          // max_i sigma_r^{(i)}
  double sigma_r_plus_1 = 0.0;   // eps_{h,f}
  double max_rel_error = 0.0;
  std::vector<double> errors;    // per sample
  double seconds = 0.0;
};

struct ErrorReport {
  std::vector<ErrorRow> rows;
  int n_samples = 0;
  std::uint64_t seed = 0;
  double truth_seconds = 0.0;
};

inline std::vector<ParameterVector> sample_parameters(int n_layers, const SweepOptions& opt) {
  if (opt.n_samples < 1) throw InvalidInput("sample count must be positive");
  if (!(opt.lower > 0.0) || !(opt.upper > opt.lower) || !std::isfinite(opt.upper))
    throw InvalidInput("parameter box must satisfy 0 < a < b");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> dist(opt.lower, opt.upper);
  std::vector<ParameterVector> out;
  out.reserve(static_cast<std::size_t>(opt.n_samples));
  for (int s = 0; s < opt.n_samples; ++s) {
    std::vector<double> y(static_cast<std::size_t>(n_layers));
    for (auto& v : y) v = dist(rng);
    out.emplace_back(std::move(y));
  }
  return out;
}

/// Max relative energy error over uniform samples, one row per fixed rank.
inline ErrorReport sweep(const Decomposition& d, const LayerStiffness& K, const LoadVector& b, const SweepOptions& opt) {
  using clock = std::chrono::steady_clock;
  ErrorReport report;
  report.n_samples = opt.n_samples;
  report.seed = opt.seed;
  const auto samples = sample_parameters(d.n_layers(), opt);
  const auto t0 = clock::now();
  std::vector<Vector> truths;
  truths.reserve(samples.size());
  for (const auto& y : samples) truths.push_back(solve_full(K, y, b, SolverBackend::Direct));
  report.truth_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  const auto svds = interaction_svds(d);
  for (int r : opt.ranks) {
    const auto start = clock::now();
    SlowFastBasis basis(svds, choose_ranks(svds, FixedRank{r}));
    const ReducedModel rom = build_rom(d, K, b, basis);
    ErrorRow row;
    row.r = r;
    row.sigma_r = std::numeric_limits<double>::quiet_NaN();
    if (r >= 1) {
      row.sigma_r = 0.0;
      for (const auto& t : svds) row.sigma_r = std::max(row.sigma_r, t.sigma_at(r));
    }
    row.sigma_r_plus_1 = basis.eps_f();
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const double e = relative_error(rom, K, samples[s], truths[s]);
      row.errors.push_back(e);
      row.max_rel_error = std::max(row.max_rel_error, e);
    }
    row.seconds = std::chrono::duration<double>(clock::now() - start).count();
    report.rows.push_back(std::move(row));
  }
  return report;
}

/// CSV "r,sigma_r,sigma_r_plus_1,max_rel_error,n_samples,seed".
inline void write_error_csv(std::ostream& out, const ErrorReport& report, const std::string& provenance = {}) {
  if (!provenance.empty()) out << provenance << '\n';
  out << "r,sigma_r,sigma_r_plus_1,max_rel_error,n_samples,seed\n";
  for (const auto& row : report.rows)
    out << row.r << ',' << format_real(row.sigma_r) << ',' << format_real(row.sigma_r_plus_1) << ','
        << format_real(row.max_rel_error) << ',' << report.n_samples << ',' << report.seed << '\n';
}

struct NWidthPair {
  int dimension = 0;
  double bound = 0.0;
};

/// (2N-1+sum r_i, eps_{h,f}).
inline NWidthPair nwidth_bound(const ReducedModel& rom) { return {rom.dimension(), rom.eps_f}; }

/// (2N-1+(N-1) n_s, C e^{-pi(n_s+1)}) for unit-square layers.
inline NWidthPair square_nwidth_bound(int n_layers, int n_s) {
  if (n_layers < 2) throw InvalidInput("at least two layers are required");
  return {2 * n_layers - 1 + (n_layers - 1) * n_s, analytic::interaction_bounds(n_s).eps_f_bound};
}

// Text serialization of a reduced model.

namespace detail {

inline void write_vector_line(std::ostream& out, const Vector& v) {
  for (Index k = 0; k < v.size(); ++k) out << (k ? " " : "") << format_real(v[k]);
  out << '\n';
}

inline double parse_real(const std::string& token) {
  double value = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  if (token == "nan") return std::numeric_limits<double>::quiet_NaN();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw InvalidInput("malformed number '" + token + "' in model file");
  return value;
}

inline Vector read_vector(std::istream& in, Index n) {
  Vector v(n);
  std::string token;
  for (Index k = 0; k < n; ++k) {
    if (!(in >> token)) throw InvalidInput("model file truncated");
    v[k] = parse_real(token);
  }
  return v;
}

inline void expect(std::istream& in, const std::string& word) {
  std::string token;
  if (!(in >> token) || token != word) throw InvalidInput("model file: expected '" + word + "'");
}

}  // namespace detail

inline void write_model(std::ostream& out, const ReducedModel& rom, const std::string& provenance = {}) {
  if (!provenance.empty()) out << provenance << '\n';
  out << "layered-model 1\n";
  out << "layers " << rom.n_layers << "\nfree " << rom.n_free << "\nranks";
  for (int r : rom.ranks) out << ' ' << r;
  out << "\nlambda " << format_real(rom.lambda) << "\neps_f " << format_real(rom.eps_f) << '\n';
  for (std::size_t i = 0; i < rom.sigma.size(); ++i) {
    out << "sigma " << rom.sigma[i].size() << '\n';
    detail::write_vector_line(out, rom.sigma[i]);
  }
  const Index m = rom.slow.cols();
  out << "slow " << m << "\nload\n";
  detail::write_vector_line(out, rom.load);
  for (const auto& block : rom.blocks) {
    out << "block\n";
    detail::write_vector_line(out, Eigen::Map<const Vector>(block.data(), block.size()));
  }
  for (const auto& w : rom.subdomain) {
    out << "subdomain\n";
    detail::write_vector_line(out, w);
  }
  for (const auto& w : rom.fast) {
    out << "fast\n";
    detail::write_vector_line(out, w);
  }
  for (Index k = 0; k < m; ++k) {
    out << "slowfield\n";
    detail::write_vector_line(out, rom.slow.col(k));
  }
}

inline ReducedModel read_model(std::istream& in) {
  std::string line;
  while (in.peek() == '#') std::getline(in, line);
  detail::expect(in, "layered-model");
  detail::expect(in, "1");
  ReducedModel rom;
  detail::expect(in, "layers");
  in >> rom.n_layers;
  detail::expect(in, "free");
  in >> rom.n_free;
  if (!in || rom.n_layers < 2 || rom.n_free < 1) throw InvalidInput("model file: bad header");
  detail::expect(in, "ranks");
  rom.ranks.resize(static_cast<std::size_t>(rom.n_layers - 1));
  for (int& r : rom.ranks) in >> r;
  std::string token;
  detail::expect(in, "lambda");
  in >> token;
  rom.lambda = detail::parse_real(token);
  detail::expect(in, "eps_f");
  in >> token;
  rom.eps_f = detail::parse_real(token);
  for (int i = 0; i + 1 < rom.n_layers; ++i) {
    detail::expect(in, "sigma");
    Index n = 0;
    in >> n;
    rom.sigma.push_back(detail::read_vector(in, n));
  }
  Index m = 0;
  detail::expect(in, "slow");
  in >> m;
  detail::expect(in, "load");
  rom.load = detail::read_vector(in, m);
  for (int j = 0; j < rom.n_layers; ++j) {
    detail::expect(in, "block");
    const Vector flat = detail::read_vector(in, m * m);
    rom.blocks.push_back(Eigen::Map<const Matrix>(flat.data(), m, m));
  }
  for (int i = 0; i < rom.n_layers; ++i) {
    detail::expect(in, "subdomain");
    rom.subdomain.push_back(detail::read_vector(in, rom.n_free));
  }
  for (int i = 0; i + 1 < rom.n_layers; ++i) {
    detail::expect(in, "fast");
    rom.fast.push_back(detail::read_vector(in, rom.n_free));
  }
  rom.slow = Matrix(rom.n_free, m);
  for (Index k = 0; k < m; ++k) {
    detail::expect(in, "slowfield");
    rom.slow.col(k) = detail::read_vector(in, rom.n_free);
  }
  int total = 0;
  for (int r : rom.ranks) total += r;
  if (total != m) throw InvalidInput("model file: ranks do not match the slow dimension");
  return rom;
}

/// Lists the stored terms with their coefficient rule, or values at y.
inline void write_manifest(std::ostream& out, const ReducedModel& rom, const RomSolution* at = nullptr,
                           const std::string& provenance = {}) {
  if (!provenance.empty()) out << provenance << '\n';
  out << "term,field,coefficient\n";
  int term = 1;
  for (int i = 1; i <= rom.n_layers; ++i, ++term)
    out << term << ",subdomain_" << i << ','
        << (at ? format_real(at->subdomain_coefficients[static_cast<std::size_t>(i - 1)])
               : "1/y" + std::to_string(i))
        << '\n';
  for (int i = 1; i < rom.n_layers; ++i, ++term)
    out << term << ",fast_" << i << ','
        << (at ? format_real(at->fast_coefficients[static_cast<std::size_t>(i - 1)])
               : "2/(y" + std::to_string(i) + "+y" + std::to_string(i + 1) + ")")
        << '\n';
  for (Index k = 0; k < rom.slow.cols(); ++k, ++term)
    out << term << ",slow_" << k + 1 << ',' << (at ? format_real(at->slow_coefficients[k]) : "c" + std::to_string(k + 1) + "(y)")
        << '\n';
}

}  // namespace layered
