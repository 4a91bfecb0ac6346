#pragma once

// Run configuration ("key = value" text) and source-term expressions.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "layered/errors.hpp"
#include "layered/fem.hpp"
#include "layered/geometry.hpp"
#include "layered/rom.hpp"
#include "layered/slowfast.hpp"

namespace layered {

namespace expr {

/// Recursive-descent parser for sources such as "sin(pi*x2)*x1^2".
/// Grammar: sum := term (('+'|'-') term)*; term := unary (('*'|'/') unary)*;
/// unary := '-' unary | power; power := atom ('^' unary)?.
class Parser {
 public:
  explicit Parser(std::string text) : text_(std::move(text)) {}

  SourceFunction parse() {
    auto f = sum();
    skip();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return f;
  }

 private:
  using Fn = SourceFunction;

  [[noreturn]] void fail(const std::string& what) const {
    throw InvalidInput("source expression '" + text_ + "': " + what + " at offset " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Fn sum() {
    Fn lhs = term();
    for (;;) {
      if (accept('+')) {
        Fn rhs = term();
        lhs = [lhs, rhs](double a, double b) { return lhs(a, b) + rhs(a, b); };
      } else if (accept('-')) {
        Fn rhs = term();
        lhs = [lhs, rhs](double a, double b) { return lhs(a, b) - rhs(a, b); };
      } else {
        return lhs;
      }
    }
  }

  Fn term() {
    Fn lhs = unary();
    for (;;) {
      if (accept('*')) {
        Fn rhs = unary();
        lhs = [lhs, rhs](double a, double b) { return lhs(a, b) * rhs(a, b); };
      } else if (accept('/')) {
        Fn rhs = unary();
        lhs = [lhs, rhs](double a, double b) { return lhs(a, b) / rhs(a, b); };
      } else {
        return lhs;
      }
    }
  }

  Fn unary() {
    if (accept('-')) {
      Fn inner = unary();
      return [inner](double a, double b) { return -inner(a, b); };
    }
    if (accept('+')) return unary();
    return power();
  }

  Fn power() {
    Fn base = atom();
    if (accept('^')) {
      Fn exponent = unary();
      return [base, exponent](double a, double b) { return std::pow(base(a, b), exponent(a, b)); };
    }
    return base;
  }

  Fn atom() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end");
    if (accept('(')) {
      Fn inner = sum();
      if (!accept(')')) fail("missing ')'");
      return inner;
    }
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
      if (ec != std::errc{}) fail("malformed number");
      pos_ = static_cast<std::size_t>(ptr - text_.data());
      return [value](double, double) { return value; };
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      const std::string name = text_.substr(start, pos_ - start);
      if (name == "x1") return [](double a, double) { return a; };
      if (name == "x2") return [](double, double b) { return b; };
      if (name == "pi") return [](double, double) { return std::numbers::pi; };
      double (*unary_fn)(double) = nullptr;
      if (name == "sin") unary_fn = [](double v) { return std::sin(v); };
      else if (name == "cos") unary_fn = [](double v) { return std::cos(v); };
      else if (name == "exp") unary_fn = [](double v) { return std::exp(v); };
      else if (name == "sqrt") unary_fn = [](double v) { return std::sqrt(v); };
      else if (name == "abs") unary_fn = [](double v) { return std::abs(v); };
      if (!unary_fn) fail("unknown name '" + name + "'");
      if (!accept('(')) fail("expected '(' after " + name);
      Fn arg = sum();
      if (!accept(')')) fail("missing ')'");
      return [unary_fn, arg](double a, double b) { return unary_fn(arg(a, b)); };
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string text_;
  std::size_t pos_ = 0;
};

}  // namespace expr

/// Named sources "x2", "sin_pi_x2", "zero", or an expression in x1, x2.
inline SourceFunction parse_source(const std::string& spec) {
  if (spec == "x2") return [](double, double x2) { return x2; };
  if (spec == "sin_pi_x2") return [](double, double x2) { return std::sin(std::numbers::pi * x2); };
  if (spec == "zero") return [](double, double) { return 0.0; };
  if (spec.empty()) throw InvalidInput("empty source expression");
  return expr::Parser(spec).parse();
}

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  const auto slash = t.find('/');
  auto one = [&](const std::string& part) {
    double v = 0.0;
    const std::string p = trim(part);
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v);
    if (p.empty() || ec != std::errc{} || ptr != p.data() + p.size())
      throw InvalidInput("'" + key + "': '" + text + "' is not a number");
    return v;
  };
  if (slash == std::string::npos) return one(t);
  const double den = one(t.substr(slash + 1));
  if (den == 0.0) throw InvalidInput("'" + key + "': division by zero");
  return one(t.substr(0, slash)) / den;
}

inline int parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  int v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
    throw InvalidInput("'" + key + "': '" + text + "' is not an integer");
  return v;
}

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

inline std::vector<double> parse_number_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number(key, item));
  return out;
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_int(key, item));
  return out;
}

/// Everything a CLI run needs. Values are kept as text so the canonical form
/// (and hence the output fingerprint) is independent of how they were given.
class RunConfig {
 public:
  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"geometry", "crown"},  {"layers", "3"},      {"h", "1/80"},      {"source", "x2"},
        {"rank_policy", "threshold"}, {"tau", "1e-7"}, {"rank", "3"},     {"ranks", "5,4,3,2,1"},
        {"box", "1,10"},       {"samples", "100"},   {"seed", "20240601"}, {"output", "out"},
    };
    return d;
  }

  RunConfig() : values_(defaults()) {}

  static RunConfig parse(std::istream& in) {
    RunConfig c;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw InvalidInput("config line " + std::to_string(number) + ": expected 'key = value'");
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
  }

  void set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) throw InvalidInput("unknown config key '" + key + "'");
    values_[key] = value;
  }
  const std::string& get(const std::string& key) const { return values_.at(key); }

  std::string geometry() const { return get("geometry"); }
  int layers() const { return parse_int("layers", get("layers")); }
  double h() const { return parse_number("h", get("h")); }
  std::string source() const { return get("source"); }
  std::string output() const { return get("output"); }
  int samples() const { return parse_int("samples", get("samples")); }
  std::uint64_t seed() const {
    const std::string t = get("seed");
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) throw InvalidInput("'seed' must be an unsigned integer");
    return v;
  }
  std::pair<double, double> box() const {
    const auto v = parse_number_list("box", get("box"));
    if (v.size() != 2) throw InvalidInput("'box' needs two numbers a,b");
    return {v[0], v[1]};
  }
  std::vector<int> sweep_ranks() const { return parse_int_list("ranks", get("ranks")); }

  RankPolicy rank_policy() const {
    const std::string kind = get("rank_policy");
    if (kind == "threshold") return ThresholdRank{parse_number("tau", get("tau"))};
    if (kind == "fixed") return FixedRank{parse_int("rank", get("rank"))};
    if (kind == "list") return RankList{parse_int_list("ranks", get("ranks"))};
    throw InvalidInput("'rank_policy' must be threshold, fixed or list");
  }

  LayerProfile profile() const { return load_profile(geometry()); }

  SweepOptions sweep_options() const {
    SweepOptions opt;
    opt.ranks = sweep_ranks();
    opt.n_samples = samples();
    std::tie(opt.lower, opt.upper) = box();
    opt.seed = seed();
    return opt;
  }

  /// Checks every field against the module preconditions.
  void validate() const {
    (void)profile();
    if (layers() < 2) throw InvalidInput("'layers' must be at least 2");
    const double hv = h();
    if (!(hv > 0.0) || !std::isfinite(hv)) throw InvalidInput("'h' must be positive");
    (void)parse_source(source());
    const auto policy = rank_policy();
    if (const auto* t = std::get_if<ThresholdRank>(&policy); t && !(t->tau > 0.0))
      throw InvalidInput("'tau' must be positive");
    if (const auto* f = std::get_if<FixedRank>(&policy); f && f->r < 0) throw InvalidInput("'rank' must be nonnegative");
    for (int r : sweep_ranks())
      if (r < 0) throw InvalidInput("'ranks' entries must be nonnegative");
    if (samples() < 1) throw InvalidInput("'samples' must be positive");
    const auto [a, b] = box();
    if (!(a > 0.0) || !(b > a)) throw InvalidInput("'box' must satisfy 0 < a < b");
    (void)seed();
    if (output().empty()) throw InvalidInput("'output' must not be empty");
  }

  /// Sorted "key = value" lines; the fingerprint of every written file.
  /// The output directory is left out so relocated reruns match byte for byte.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_)
      if (k != "output") out += k + " = " + v + "\n";
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace layered
