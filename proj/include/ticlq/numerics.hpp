#pragma once

// Dense small-matrix algebra, fixed-step RK4 integration and quadrature
// shared by all solvers. Everything here is a pure function of its inputs
// and safe to call concurrently on distinct data.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ticlq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when an integration produces a non-finite value.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double t)
      : std::runtime_error(what + " at t=" + std::to_string(t)), time(t) {}
  double time;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Symmetric matrix with symmetrized storage: the constructor replaces the
/// input by (M + Mᵀ)/2, so entries(i,j) == entries(j,i) holds exactly.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(const Matrix& m) {
    if (m.rows() != m.cols()) {
      throw std::invalid_argument("SymMatrix: input must be square");
    }
    if (!m.allFinite()) {
      throw std::invalid_argument("SymMatrix: non-finite entries");
    }
    mat_ = 0.5 * (m + m.transpose());
  }

  static SymMatrix Zero(Eigen::Index n) { return SymMatrix(Matrix::Zero(n, n)); }
  static SymMatrix Identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }

  Eigen::Index dim() const { return mat_.rows(); }
  const Matrix& mat() const { return mat_; }
  operator const Matrix&() const { return mat_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return mat_(i, j); }

 private:
  Matrix mat_;
};

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

struct PsdReport {
  bool ok = false;
  double min_eigenvalue = 0.0;
};

/// True iff λ_min(M) ≥ −tol; the report carries λ_min.
inline PsdReport psd_check(const SymMatrix& m, double tol = 0.0) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat(), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return {lmin >= -tol, lmin};
}

inline double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Uniform grid of n intervals on [a, b]; point(n) == b exactly.
struct TimeGrid {
  double a = 0.0;
  double b = 0.0;
  std::size_t intervals = 0;

  static TimeGrid uniform(double a, double b, std::size_t n) {
    if (n == 0 || !(b > a)) {
      throw std::invalid_argument("TimeGrid: need n >= 1 and b > a");
    }
    return {a, b, n};
  }

  std::size_t size() const { return intervals + 1; }
  double step() const { return (b - a) / static_cast<double>(intervals); }
  double point(std::size_t i) const {
    return a + (b - a) * (static_cast<double>(i) / static_cast<double>(intervals));
  }
};

/// Matrix-valued path sampled on a uniform grid, ascending in time.
struct MatrixPath {
  TimeGrid grid;
  std::vector<Matrix> values;

  const Matrix& front() const { return values.front(); }
  const Matrix& back() const { return values.back(); }
};

namespace detail {

// Index of the node nearest to s, or npos if s is off-node.
inline std::size_t node_index(const TimeGrid& g, double s) {
  const double u = (s - g.a) / g.step();
  const double r = std::round(u);
  if (std::abs(u - r) < 1e-9 && r >= 0.0 && r <= static_cast<double>(g.intervals)) {
    return static_cast<std::size_t>(r);
  }
  return static_cast<std::size_t>(-1);
}

}  // namespace detail

/// Value of a sampled path at time s. Node hits return the stored sample;
/// off-node queries use 4-point Lagrange interpolation (clamped stencil),
/// degrading to the available order on very short paths. Interpolation is
/// O(h⁴) for smooth paths, which keeps RK4 stage queries at full order.
inline Matrix path_value(const MatrixPath& p, double s) {
  const TimeGrid& g = p.grid;
  const std::size_t n = g.intervals;
  const std::size_t hit = detail::node_index(g, s);
  if (hit != static_cast<std::size_t>(-1)) return p.values[hit];

  double u = (s - g.a) / g.step();
  if (u < 0.0) u = 0.0;
  if (u > static_cast<double>(n)) u = static_cast<double>(n);

  if (p.values.size() < 4) {  // linear / quadratic fallback for short paths
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(u), n - 1);
    const double w = u - static_cast<double>(i);
    return (1.0 - w) * p.values[i] + w * p.values[i + 1];
  }

  std::size_t i0 = static_cast<std::size_t>(u);
  i0 = (i0 == 0) ? 0 : i0 - 1;
  if (i0 + 3 > n) i0 = n - 3;

  Matrix out = Matrix::Zero(p.values.front().rows(), p.values.front().cols());
  for (std::size_t j = 0; j < 4; ++j) {
    double w = 1.0;
    const double xj = static_cast<double>(i0 + j);
    for (std::size_t k = 0; k < 4; ++k) {
      if (k == j) continue;
      const double xk = static_cast<double>(i0 + k);
      w *= (u - xk) / (xj - xk);
    }
    out += w * p.values[i0 + j];
  }
  return out;
}

using MatrixRhs = std::function<Matrix(double, const Matrix&)>;

struct OdeOptions {
  bool symmetrize = false;  // re-symmetrize state after every step
  std::string label = "integration";
};

/// Samples of a matrix ODE solution in integration order: times[i] runs from
/// a to b (decreasing when b < a).
struct OdeResult {
  std::vector<double> times;
  std::vector<Matrix> values;
};

/// Classical fixed-step RK4 for dX/dt = rhs(t, X) from t=a to t=b (either
/// direction). `step` is a target magnitude; the span is divided into
/// max(1, round(|b−a|/step)) equal steps so both endpoints are sampled.
/// Throws DivergenceError when a non-finite value appears.
inline OdeResult integrate_matrix_ode(const MatrixRhs& rhs, const Matrix& initial,
                                      double a, double b, double step,
                                      const OdeOptions& opts = {}) {
  if (!(step > 0.0)) throw std::invalid_argument("integrate_matrix_ode: step must be > 0");
  if (a == b) throw std::invalid_argument("integrate_matrix_ode: empty span");
  const double span = b - a;
  const auto n = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(std::abs(span) / step)));
  const double h = span / static_cast<double>(n);

  OdeResult out;
  out.times.reserve(n + 1);
  out.values.reserve(n + 1);
  Matrix x = initial;
  if (!all_finite(x)) throw DivergenceError(opts.label + ": divergence", a);
  out.times.push_back(a);
  out.values.push_back(x);

  for (std::size_t i = 0; i < n; ++i) {
    const double t = a + span * (static_cast<double>(i) / static_cast<double>(n));
    const Matrix k1 = rhs(t, x);
    const Matrix k2 = rhs(t + 0.5 * h, x + (0.5 * h) * k1);
    const Matrix k3 = rhs(t + 0.5 * h, x + (0.5 * h) * k2);
    const Matrix k4 = rhs(t + h, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (opts.symmetrize) x = symmetrized(x);
    const double tn = a + span * (static_cast<double>(i + 1) / static_cast<double>(n));
    if (!all_finite(x)) throw DivergenceError(opts.label + ": divergence", tn);
    out.times.push_back(tn);
    out.values.push_back(x);
  }
  out.times.back() = b;
  return out;
}

/// Composite trapezoid rule over uniformly spaced samples.
inline Matrix trapezoid_quad(const std::vector<Matrix>& samples, double step) {
  if (samples.size() < 2) throw std::invalid_argument("trapezoid_quad: insufficient samples");
  Matrix acc = 0.5 * (samples.front() + samples.back());
  for (std::size_t i = 1; i + 1 < samples.size(); ++i) acc += samples[i];
  return step * acc;
}

inline double frobenius(const Matrix& m) { return m.norm(); }

}  // namespace ticlq
