#pragma once

// Problem data for the time-varying LQ family: evaluable coefficient maps
// A(t,s), B(t,s), Q(t,s), R(t,s), G(t) on [0,T]², partitions of [0,T], and
// the per-segment frozen coefficients used by the game discretization.

#include "ticlq/numerics.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ticlq {

class OutOfHorizonError : public std::runtime_error {
 public:
  explicit OutOfHorizonError(double s)
      : std::runtime_error("out of horizon: s=" + std::to_string(s)) {}
};

class CoefficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using MatrixMap2 = std::function<Matrix(double, double)>;  // (t, s) -> matrix
using MatrixMap1 = std::function<Matrix(double)>;          // t -> matrix
using ScalarFn = std::function<double(double)>;

/// The problem data (A, B, Q, R, G) as evaluable maps. Q, R, G are
/// symmetrized on evaluation; dimensions are fixed at construction.
struct CoefficientSet {
  int n = 0;        // state dimension
  int m = 0;        // control dimension
  double T = 0.0;   // horizon
  MatrixMap2 A;     // n×n
  MatrixMap2 B;     // n×m
  MatrixMap2 Q;     // n×n symmetric
  MatrixMap2 R;     // m×m symmetric
  MatrixMap1 G;     // n×n symmetric

  // Set when this instance was built by make_problem_c; used by the
  // inconsistency-gap tooling, which only exists for the scalar problem.
  std::optional<ScalarFn> scalar_terminal_weight;

  Matrix eval_A(double t, double s) const { return checked(A(t, s), n, n, "A", t, s); }
  Matrix eval_B(double t, double s) const { return checked(B(t, s), n, m, "B", t, s); }
  Matrix eval_Q(double t, double s) const {
    return symmetrized(checked(Q(t, s), n, n, "Q", t, s));
  }
  Matrix eval_R(double t, double s) const {
    return symmetrized(checked(R(t, s), m, m, "R", t, s));
  }
  Matrix eval_G(double t) const { return symmetrized(checked(G(t), n, n, "G", t, t)); }

  static CoefficientSet constant(const Matrix& A0, const Matrix& B0, const Matrix& Q0,
                                 const Matrix& R0, const Matrix& G0, double T) {
    CoefficientSet c;
    c.n = static_cast<int>(A0.rows());
    c.m = static_cast<int>(B0.cols());
    c.T = T;
    c.A = [A0](double, double) { return A0; };
    c.B = [B0](double, double) { return B0; };
    c.Q = [Q0](double, double) { return Q0; };
    c.R = [R0](double, double) { return R0; };
    c.G = [G0](double) { return G0; };
    return c;
  }

 private:
  static Matrix checked(Matrix v, int rows, int cols, const char* name, double t, double s) {
    if (v.rows() != rows || v.cols() != cols) {
      throw CoefficientError(std::string("coefficient ") + name + ": wrong dimensions");
    }
    if (!v.allFinite()) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "coefficient evaluation failure: %s(%g, %g) non-finite",
                    name, t, s);
      throw CoefficientError(buf);
    }
    return v;
  }
};

/// Scalar single-integrator problem: n = m = 1, A = 0, B = 1, Q = 0, R = 1,
/// G(t) = h(t) with a terminal weight h ≥ δ > 0. This is the one family with
/// closed-form solutions, used throughout the tests as ground truth.
inline CoefficientSet make_problem_c(const ScalarFn& h, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("make_problem_c: T must be > 0");
  const int samples = 1000;
  for (int i = 0; i <= samples; ++i) {
    const double t = T * static_cast<double>(i) / samples;
    const double v = h(t);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("invalid terminal weight: h(" + std::to_string(t) +
                                  ") = " + std::to_string(v));
    }
  }
  CoefficientSet c;
  c.n = 1;
  c.m = 1;
  c.T = T;
  c.A = [](double, double) { return Matrix::Zero(1, 1); };
  c.B = [](double, double) { return Matrix::Identity(1, 1); };
  c.Q = [](double, double) { return Matrix::Zero(1, 1); };
  c.R = [](double, double) { return Matrix::Identity(1, 1); };
  c.G = [h](double t) { return (Matrix(1, 1) << h(t)).finished(); };
  c.scalar_terminal_weight = h;
  return c;
}

/// Partition 0 = t₀ < t₁ < … < t_N = T of the horizon.
class Partition {
 public:
  explicit Partition(std::vector<double> knots) : knots_(std::move(knots)) {
    if (knots_.size() < 2) throw std::invalid_argument("empty partition");
    if (knots_.front() != 0.0) throw std::invalid_argument("partition must start at 0");
    for (std::size_t k = 1; k < knots_.size(); ++k) {
      if (!(knots_[k] > knots_[k - 1])) {
        throw std::invalid_argument("partition knots must be strictly increasing");
      }
    }
  }

  static Partition uniform(int segments, double T) {
    if (segments < 1) throw std::invalid_argument("empty partition");
    if (!(T > 0.0)) throw std::invalid_argument("horizon must be positive");
    std::vector<double> knots(static_cast<std::size_t>(segments) + 1);
    for (int k = 0; k <= segments; ++k) {
      knots[static_cast<std::size_t>(k)] = T * static_cast<double>(k) / segments;
    }
    return Partition(std::move(knots));
  }

  int segments() const { return static_cast<int>(knots_.size()) - 1; }
  double knot(int k) const { return knots_[static_cast<std::size_t>(k)]; }
  double T() const { return knots_.back(); }
  const std::vector<double>& knots() const { return knots_; }
  double segment_length(int j) const { return knot(j + 1) - knot(j); }

  double mesh() const {
    double m = 0.0;
    for (int j = 0; j < segments(); ++j) m = std::max(m, segment_length(j));
    return m;
  }

  /// Segment index j with t_j ≤ s < t_{j+1} (right-open); s == T maps to the
  /// last segment. Throws OutOfHorizonError outside [0, T].
  int segment_of(double s) const {
    if (s < 0.0 || s > T()) throw OutOfHorizonError(s);
    if (s == T()) return segments() - 1;
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
    return static_cast<int>(it - knots_.begin()) - 1;
  }

 private:
  std::vector<double> knots_;
};

inline Partition build_uniform_partition(int segments, double T) {
  return Partition::uniform(segments, T);
}

/// Coefficients frozen along the partition: on s ∈ [t_{k−1}, t_k) every map
/// is evaluated with first argument t_{k−1}.
struct FrozenCoefficients {
  CoefficientSet coeffs;
  Partition delta;

  FrozenCoefficients(CoefficientSet c, Partition d)
      : coeffs(std::move(c)), delta(std::move(d)) {}

  double frozen_time(double s) const { return delta.knot(delta.segment_of(s)); }

  Matrix A(double s) const { return coeffs.eval_A(frozen_time(s), s); }
  Matrix B(double s) const { return coeffs.eval_B(frozen_time(s), s); }
  Matrix Q(double s) const { return coeffs.eval_Q(frozen_time(s), s); }
  Matrix R(double s) const { return coeffs.eval_R(frozen_time(s), s); }
};

inline FrozenCoefficients freeze(const CoefficientSet& c, const Partition& delta) {
  return FrozenCoefficients(c, delta);
}

/// Sampled check of the standing assumptions: positive semidefiniteness and
/// coercivity (with the estimated δ and Lipschitz constant), plus the
/// monotonicity-in-t of Q, R, G needed by the comparison bounds. Violations
/// are reported, never thrown: the game solver only needs the first group.
struct AssumptionReport {
  bool h1_psd_ok = true;
  double h1_r_delta = 0.0;           // min λ_min(R) over samples
  double h1_lipschitz_estimate = 0.0;
  bool h2_g_ok = true;
  bool h2_q_ok = true;
  bool h2_r_ok = true;
  long sample_count = 0;
  std::vector<std::string> violations;

  bool h1_ok() const { return h1_psd_ok && h1_r_delta > 0.0; }
  bool h2_monotone_ok() const { return h2_g_ok && h2_q_ok && h2_r_ok; }
};

inline AssumptionReport check_assumptions(const CoefficientSet& c, int density = 21) {
  if (density < 2) throw std::invalid_argument("check_assumptions: density must be >= 2");
  AssumptionReport rep;
  const double psd_tol = 1e-10;
  const auto grid_pt = [&](int i) { return c.T * static_cast<double>(i) / (density - 1); };

  auto note = [&rep](const char* what, double t, double s) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s at (t=%.6g, s=%.6g)", what, t, s);
    if (rep.violations.size() < 256) rep.violations.emplace_back(buf);
  };

  rep.h1_r_delta = std::numeric_limits<double>::infinity();
  double lips = 0.0;

  std::vector<std::vector<Matrix>> Gs(1), Qs, Rs;  // [t index][s index]
  Qs.resize(static_cast<std::size_t>(density));
  Rs.resize(static_cast<std::size_t>(density));
  Gs[0].resize(static_cast<std::size_t>(density));

  for (int i = 0; i < density; ++i) {
    const double t = grid_pt(i);
    Gs[0][static_cast<std::size_t>(i)] = c.eval_G(t);
    const double gmin = min_eigenvalue(Gs[0][static_cast<std::size_t>(i)]);
    if (gmin < -psd_tol) {
      rep.h1_psd_ok = false;
      note("G not PSD", t, t);
    }
    for (int j = 0; j < density; ++j) {
      const double s = grid_pt(j);
      Qs[static_cast<std::size_t>(i)].push_back(c.eval_Q(t, s));
      Rs[static_cast<std::size_t>(i)].push_back(c.eval_R(t, s));
      ++rep.sample_count;
      const double qmin = min_eigenvalue(Qs[static_cast<std::size_t>(i)].back());
      if (qmin < -psd_tol) {
        rep.h1_psd_ok = false;
        note("Q not PSD", t, s);
      }
      rep.h1_r_delta =
          std::min(rep.h1_r_delta, min_eigenvalue(Rs[static_cast<std::size_t>(i)].back()));
    }
  }
  if (rep.h1_r_delta <= 0.0) rep.h1_psd_ok = false;

  // Lipschitz-in-t estimate from consecutive sample pairs.
  for (int i = 0; i + 1 < density; ++i) {
    const double t0 = grid_pt(i), t1 = grid_pt(i + 1);
    const double dt = t1 - t0;
    lips = std::max(lips, (c.eval_G(t1) - c.eval_G(t0)).norm() / dt);
    for (int j = 0; j < density; ++j) {
      const double s = grid_pt(j);
      lips = std::max(lips, (c.eval_A(t1, s) - c.eval_A(t0, s)).norm() / dt);
      lips = std::max(lips, (c.eval_B(t1, s) - c.eval_B(t0, s)).norm() / dt);
      lips = std::max(
          lips, (Qs[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j)] -
                 Qs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
                        .norm() /
                    dt);
      lips = std::max(
          lips, (Rs[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j)] -
                 Rs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
                        .norm() /
                    dt);
    }
  }
  rep.h1_lipschitz_estimate = lips;

  // Monotonicity in t: G(t) ≤ G(r) for t ≤ r, and Q(t,s) ≤ Q(r,s),
  // R(t,s) ≤ R(r,s) for t ≤ r ≤ s.
  for (int i = 0; i < density; ++i) {
    for (int k = i + 1; k < density; ++k) {
      const double t = grid_pt(i), r = grid_pt(k);
      if (min_eigenvalue(c.eval_G(r) - c.eval_G(t)) < -psd_tol) {
        rep.h2_g_ok = false;
        note("G not monotone", t, r);
      }
      for (int j = k; j < density; ++j) {
        const double s = grid_pt(j);
        if (min_eigenvalue(Qs[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] -
                           Qs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) <
            -psd_tol) {
          rep.h2_q_ok = false;
          note("Q not monotone", t, s);
        }
        if (min_eigenvalue(Rs[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] -
                           Rs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) <
            -psd_tol) {
          rep.h2_r_ok = false;
          note("R not monotone", t, s);
        }
      }
    }
  }
  return rep;
}

}  // namespace ticlq
