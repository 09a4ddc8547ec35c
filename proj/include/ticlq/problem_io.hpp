#pragma once

// Problem-definition files: a JSON document describing the horizon and the
// five coefficient maps, either directly (constant / polynomial / table
// kinds) or through the scalar `problem_c` shorthand. Parse errors carry the
// offending line or field path.

#include "ticlq/problem.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ticlq {

class ProblemParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParsedProblem {
  CoefficientSet coeffs;
  bool is_problem_c = false;
};

namespace io_detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw ProblemParseError("problem file: field '" + path + "': " + what);
}

inline const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) fail(path + "." + key, "missing");
  return j.at(key);
}

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

inline Matrix as_matrix(const json& j, int rows, int cols, const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    fail(path, "expected " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      fail(path + "[" + std::to_string(i) + "]", "expected " + std::to_string(cols) + " columns");
    }
    for (int k = 0; k < cols; ++k) {
      m(i, k) = as_number(row.at(static_cast<std::size_t>(k)),
                          path + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
    }
  }
  if (!m.allFinite()) fail(path, "non-finite entry");
  return m;
}

inline std::vector<double> as_breakpoints(const json& j, double T, const std::string& path) {
  if (!j.is_array() || j.size() < 2) fail(path, "expected at least two breakpoints");
  std::vector<double> t;
  for (std::size_t i = 0; i < j.size(); ++i) {
    t.push_back(as_number(j.at(i), path + "[" + std::to_string(i) + "]"));
    if (i > 0 && !(t[i] > t[i - 1])) fail(path, "breakpoints must be strictly increasing");
  }
  if (t.front() > 1e-12 || t.back() < T - 1e-12) {
    fail(path, "breakpoints must cover [0, horizon]");
  }
  return t;
}

inline double int_pow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

// Locate s in breakpoints: returns (index, weight) for linear interpolation.
inline std::pair<std::size_t, double> bracket(const std::vector<double>& t, double s) {
  if (s <= t.front()) return {0, 0.0};
  if (s >= t.back()) return {t.size() - 2, 1.0};
  std::size_t lo = 0;
  while (lo + 2 < t.size() && t[lo + 1] <= s) ++lo;
  return {lo, (s - t[lo]) / (t[lo + 1] - t[lo])};
}

inline MatrixMap2 parse_map2(const json& j, int rows, int cols, double T,
                             const std::string& path) {
  const std::string kind = require(j, "kind", path).get<std::string>();
  if (kind == "constant") {
    const Matrix m = as_matrix(require(j, "value", path), rows, cols, path + ".value");
    return [m](double, double) { return m; };
  }
  if (kind == "polynomial") {
    const json& terms = require(j, "terms", path);
    if (!terms.is_array() || terms.empty()) fail(path + ".terms", "expected a non-empty array");
    std::vector<std::tuple<int, int, Matrix>> parsed;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const std::string tp = path + ".terms[" + std::to_string(i) + "]";
      const json& term = terms.at(i);
      const int t_pow = static_cast<int>(as_number(require(term, "t_pow", tp), tp + ".t_pow"));
      const int s_pow = static_cast<int>(as_number(require(term, "s_pow", tp), tp + ".s_pow"));
      if (t_pow < 0 || s_pow < 0 || t_pow > 8 || s_pow > 8) fail(tp, "powers must be in [0, 8]");
      parsed.emplace_back(t_pow, s_pow,
                          as_matrix(require(term, "coef", tp), rows, cols, tp + ".coef"));
    }
    return [parsed, rows, cols](double t, double s) {
      Matrix m = Matrix::Zero(rows, cols);
      for (const auto& [tp, sp, coef] : parsed) m += int_pow(t, tp) * int_pow(s, sp) * coef;
      return m;
    };
  }
  if (kind == "table") {
    const auto tb = as_breakpoints(require(j, "t", path), T, path + ".t");
    const auto sb = as_breakpoints(require(j, "s", path), T, path + ".s");
    const json& values = require(j, "values", path);
    if (!values.is_array() || values.size() != tb.size()) {
      fail(path + ".values", "expected one row of matrices per t breakpoint");
    }
    std::vector<std::vector<Matrix>> table;
    for (std::size_t i = 0; i < tb.size(); ++i) {
      const json& row = values.at(i);
      const std::string rp = path + ".values[" + std::to_string(i) + "]";
      if (!row.is_array() || row.size() != sb.size()) {
        fail(rp, "expected one matrix per s breakpoint");
      }
      std::vector<Matrix> cells;
      for (std::size_t k = 0; k < sb.size(); ++k) {
        cells.push_back(as_matrix(row.at(k), rows, cols, rp + "[" + std::to_string(k) + "]"));
      }
      table.push_back(std::move(cells));
    }
    return [tb, sb, table](double t, double s) {
      const auto [it, wt] = bracket(tb, t);
      const auto [is, ws] = bracket(sb, s);
      return Matrix((1.0 - wt) * ((1.0 - ws) * table[it][is] + ws * table[it][is + 1]) +
                    wt * ((1.0 - ws) * table[it + 1][is] + ws * table[it + 1][is + 1]));
    };
  }
  fail(path + ".kind", "unknown kind '" + kind + "'");
}

inline MatrixMap1 parse_map1(const json& j, int dim, double T, const std::string& path) {
  const std::string kind = require(j, "kind", path).get<std::string>();
  if (kind == "constant") {
    const Matrix m = as_matrix(require(j, "value", path), dim, dim, path + ".value");
    return [m](double) { return m; };
  }
  if (kind == "polynomial") {
    const json& terms = require(j, "terms", path);
    if (!terms.is_array() || terms.empty()) fail(path + ".terms", "expected a non-empty array");
    std::vector<std::pair<int, Matrix>> parsed;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const std::string tp = path + ".terms[" + std::to_string(i) + "]";
      const json& term = terms.at(i);
      const int t_pow = static_cast<int>(as_number(require(term, "t_pow", tp), tp + ".t_pow"));
      if (t_pow < 0 || t_pow > 8) fail(tp, "powers must be in [0, 8]");
      parsed.emplace_back(t_pow, as_matrix(require(term, "coef", tp), dim, dim, tp + ".coef"));
    }
    return [parsed, dim](double t) {
      Matrix m = Matrix::Zero(dim, dim);
      for (const auto& [tp, coef] : parsed) m += int_pow(t, tp) * coef;
      return m;
    };
  }
  if (kind == "table") {
    const auto tb = as_breakpoints(require(j, "t", path), T, path + ".t");
    const json& values = require(j, "values", path);
    if (!values.is_array() || values.size() != tb.size()) {
      fail(path + ".values", "expected one matrix per breakpoint");
    }
    std::vector<Matrix> table;
    for (std::size_t i = 0; i < tb.size(); ++i) {
      table.push_back(as_matrix(values.at(i), dim, dim,
                                path + ".values[" + std::to_string(i) + "]"));
    }
    return [tb, table](double t) {
      const auto [it, wt] = bracket(tb, t);
      return Matrix((1.0 - wt) * table[it] + wt * table[it + 1]);
    };
  }
  fail(path + ".kind", "unknown kind '" + kind + "'");
}

inline ScalarFn parse_weight(const json& j, double T, const std::string& path) {
  const std::string kind = require(j, "kind", path).get<std::string>();
  if (kind == "constant") {
    const double v = as_number(require(j, "value", path), path + ".value");
    return [v](double) { return v; };
  }
  if (kind == "affine") {
    const double a = as_number(require(j, "intercept", path), path + ".intercept");
    const double b = as_number(require(j, "slope", path), path + ".slope");
    return [a, b](double t) { return a + b * t; };
  }
  if (kind == "table") {
    const auto tb = as_breakpoints(require(j, "t", path), T, path + ".t");
    const json& values = require(j, "values", path);
    if (!values.is_array() || values.size() != tb.size()) {
      fail(path + ".values", "expected one value per breakpoint");
    }
    std::vector<double> v;
    for (std::size_t i = 0; i < tb.size(); ++i) {
      v.push_back(as_number(values.at(i), path + ".values[" + std::to_string(i) + "]"));
    }
    return [tb, v](double t) {
      const auto [it, wt] = bracket(tb, t);
      return (1.0 - wt) * v[it] + wt * v[it + 1];
    };
  }
  fail(path + ".kind", "unknown kind '" + kind + "'");
}

}  // namespace io_detail

inline ParsedProblem parse_problem(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset -> line for a friendlier message
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ProblemParseError("problem file: line " + std::to_string(line) + ": " + e.what());
  }
  if (!doc.is_object()) throw ProblemParseError("problem file: top level must be an object");

  const double T = io_detail::as_number(io_detail::require(doc, "horizon", ""), "horizon");
  if (!(T > 0.0)) io_detail::fail("horizon", "must be positive");

  ParsedProblem out;
  if (doc.contains("problem_c")) {
    const ScalarFn h =
        io_detail::parse_weight(io_detail::require(doc.at("problem_c"), "h", "problem_c"), T,
                                "problem_c.h");
    try {
      out.coeffs = make_problem_c(h, T);
    } catch (const std::invalid_argument& e) {
      throw ProblemParseError(std::string("problem file: problem_c.h: ") + e.what());
    }
    out.is_problem_c = true;
    return out;
  }

  const int n = static_cast<int>(
      io_detail::as_number(io_detail::require(doc, "state_dim", ""), "state_dim"));
  const int m = static_cast<int>(
      io_detail::as_number(io_detail::require(doc, "control_dim", ""), "control_dim"));
  if (n < 1 || m < 1) io_detail::fail("state_dim/control_dim", "must be positive");

  CoefficientSet c;
  c.n = n;
  c.m = m;
  c.T = T;
  c.A = io_detail::parse_map2(io_detail::require(doc, "A", ""), n, n, T, "A");
  c.B = io_detail::parse_map2(io_detail::require(doc, "B", ""), n, m, T, "B");
  c.Q = io_detail::parse_map2(io_detail::require(doc, "Q", ""), n, n, T, "Q");
  c.R = io_detail::parse_map2(io_detail::require(doc, "R", ""), m, m, T, "R");
  c.G = io_detail::parse_map1(io_detail::require(doc, "G", ""), n, T, "G");
  out.coeffs = std::move(c);
  return out;
}

inline ParsedProblem load_problem(const std::string& filename) {
  std::ifstream in(filename, std::ios::binary);
  if (!in) throw ProblemParseError("problem file: cannot open '" + filename + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_problem(buf.str());
}

}  // namespace ticlq
