#pragma once

// Closed-form ground truth for the scalar single-integrator problem with
// state-independent dynamics (A=0, B=1, Q=0, R=1) and time-indexed terminal
// weight h(t): the pre-committed Riccati solution, the re-optimization gap,
// the per-segment discrete recursion, and the classical (time-consistent)
// Riccati oracle for matrix problems with t-independent coefficients.

#include "ticlq/numerics.hpp"
#include "ticlq/problem.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ticlq::oracles {

/// Scalar problem data: horizon T and terminal weight h(t) ≥ δ > 0.
struct ScalarProblemC {
  double T = 1.0;
  ScalarFn h;
};

/// Pre-committed Riccati value P(s; t) = h(t) / (1 + h(t)(T − s)) — solution
/// of ṗ = p², p(T) = h(t) for the problem anchored at initial time t.
inline double pre_committed_riccati(const ScalarProblemC& pc, double t, double s) {
  if (s < t) throw std::invalid_argument("pre_committed_riccati: invalid span (s < t)");
  const double ht = pc.h(t);
  return ht / (1.0 + ht * (pc.T - s));
}

struct PreCommittedPair {
  ScalarFn trajectory;  // X̄(s; t, x)
  double control;       // ū(s; t, x), constant in s
};

/// Optimal pair for the problem anchored at (t, x):
/// X̄(s) = x (1 + h(t)(T − s)) / (1 + h(t)(T − t)),  ū ≡ −x h(t) / (1 + h(t)(T − t)).
inline PreCommittedPair pre_committed_pair(const ScalarProblemC& pc, double t, double x) {
  if (!(t >= 0.0 && t < pc.T)) throw std::invalid_argument("pre_committed_pair: need 0 <= t < T");
  const double ht = pc.h(t);
  const double denom = 1.0 + ht * (pc.T - t);
  const double T = pc.T;
  return {[x, ht, denom, T](double s) { return x * (1.0 + ht * (T - s)) / denom; },
          -x * ht / denom};
}

struct GapResult {
  double t = 0.0;
  double tau = 0.0;
  double x = 0.0;
  double pre_committed_cost = 0.0;  // cost of ū|[τ,T] under the weight h(τ)
  double reoptimized_value = 0.0;   // inf over controls of the (τ, y) problem
  double gap = 0.0;                 // their difference, ≥ 0
};

/// Loss from restricting the control committed at time t to [τ, T] instead
/// of re-optimizing at (τ, X̄(τ)). With a = h(t), b = h(τ):
///
///   gap = x² (T−τ) (b − a)² / ( [1 + b(T−τ)] [1 + a(T−t)]² ).
///
/// The denominator follows from expanding cost − value directly:
///   cost  = x²a²(T−τ)/(1+a(T−t))² + x²b/(1+a(T−t))²
///   value = b y² / (1 + b(T−τ)),  y = x(1+a(T−τ))/(1+a(T−t))
/// whose difference has numerator (a²(T−τ)+b)(1+b(T−τ)) − b(1+a(T−τ))²
/// = (T−τ)(a−b)², all over (1+b(T−τ))(1+a(T−t))².
inline GapResult inconsistency_gap(const ScalarProblemC& pc, double t, double tau, double x) {
  if (!(t >= 0.0 && t < tau && tau < pc.T)) {
    throw std::invalid_argument("inconsistency_gap: invalid order (need 0 <= t < tau < T)");
  }
  const double a = pc.h(t);
  const double b = pc.h(tau);
  const double T = pc.T;
  const double d1 = 1.0 + a * (T - t);

  GapResult r;
  r.t = t;
  r.tau = tau;
  r.x = x;
  r.pre_committed_cost = x * x * a * a * (T - tau) / (d1 * d1) + x * x * b / (d1 * d1);
  const double y = x * (1.0 + a * (T - tau)) / d1;
  r.reoptimized_value = b * y * y / (1.0 + b * (T - tau));
  r.gap = x * x * (T - tau) * (b - a) * (b - a) / ((1.0 + b * (T - tau)) * d1 * d1);
  return r;
}

struct DiscreteRecursion {
  std::vector<double> terminal_weights;  // effective weight g_k per segment, k = 1..N
  std::vector<double> left_values;       // P^k(t_{k−1}): segment value at its left knot
  std::vector<double> jumps;             // P(t_k+0) − P(t_k−0), interior knots k = 1..N−1

  double value(int segment, double s, const Partition& delta) const {
    const double g = terminal_weights[static_cast<std::size_t>(segment)];
    return g / (1.0 + g * (delta.knot(segment + 1) - s));
  }
};

/// Per-segment scalar recursion. Each segment k solves ṗ = p² backward from
/// the effective terminal weight g_k, where g_k folds the player's own
/// terminal weight h(t_{k−1}) through the downstream feedback costs:
/// starting from c = h(t_{k−1}), for j = N down to k+1,
///   c ← (g_j² ℓ_j + c) / (1 + g_j ℓ_j)²,   ℓ_j = t_j − t_{j−1},
/// and g_k = c. For the last segment g_N = h(t_{N−1}).
inline DiscreteRecursion discrete_recursion(const ScalarProblemC& pc, const Partition& delta) {
  const int N = delta.segments();
  DiscreteRecursion r;
  r.terminal_weights.resize(static_cast<std::size_t>(N));
  r.terminal_weights[static_cast<std::size_t>(N - 1)] = pc.h(delta.knot(N - 1));
  for (int k = N - 2; k >= 0; --k) {
    double c = pc.h(delta.knot(k));
    for (int j = N - 1; j > k; --j) {
      const double g = r.terminal_weights[static_cast<std::size_t>(j)];
      const double len = delta.segment_length(j);
      const double d = 1.0 + g * len;
      c = (g * g * len + c) / (d * d);
    }
    r.terminal_weights[static_cast<std::size_t>(k)] = c;
  }
  for (int k = 0; k < N; ++k) {
    const double g = r.terminal_weights[static_cast<std::size_t>(k)];
    r.left_values.push_back(g / (1.0 + g * delta.segment_length(k)));
  }
  for (int k = 1; k < N; ++k) {
    r.jumps.push_back(r.left_values[static_cast<std::size_t>(k)] -
                      r.terminal_weights[static_cast<std::size_t>(k - 1)]);
  }
  return r;
}

/// Numerical cross-check of the gap: simulate the control committed at t and
/// restricted to [τ, T], price it under the weight h(τ), and subtract the
/// value obtained by re-solving the Riccati equation at τ numerically. Fully
/// independent of the closed-form algebra in inconsistency_gap.
inline double simulated_gap(const ScalarProblemC& pc, double t, double tau, double x,
                            double step = 1e-4) {
  if (!(t >= 0.0 && t < tau && tau < pc.T)) {
    throw std::invalid_argument("simulated_gap: invalid order (need 0 <= t < tau < T)");
  }
  const PreCommittedPair committed = pre_committed_pair(pc, t, x);
  const double u = committed.control;
  const double y = committed.trajectory(tau);

  // simulate the restricted control from (τ, y) and accumulate its cost
  const auto n = static_cast<std::size_t>(
      std::max<long long>(1, std::llround((pc.T - tau) / step)));
  const double h = (pc.T - tau) / static_cast<double>(n);
  double state = y;
  double cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    state += h * u;      // RK4 of a constant-derivative flow collapses to Euler
    cost += h * u * u;   // constant running integrand
  }
  cost += pc.h(tau) * state * state;

  // re-solved value at (τ, y): integrate p' = p², p(T) = h(τ) back to τ
  const auto rhs = [](double, const Matrix& p) { return Matrix(p * p); };
  const OdeResult res = integrate_matrix_ode(
      rhs, (Matrix(1, 1) << pc.h(tau)).finished(), pc.T, tau, step);
  const double value = res.values.back()(0, 0) * y * y;
  return cost - value;
}

/// Classical time-consistent Riccati oracle: requires coefficients that do
/// not depend on their first argument (checked by sampling), then solves the
/// single backward Riccati equation with terminal weight G on [0, T].
inline MatrixPath classical_lq_riccati(const CoefficientSet& c, double step) {
  const int probes = 13;
  for (int i = 0; i < probes; ++i) {
    const double t = c.T * static_cast<double>(i) / (probes - 1);
    const double s = c.T * static_cast<double>((i * 7) % probes) / (probes - 1);
    const double drift = (c.eval_A(t, s) - c.eval_A(0.0, s)).norm() +
                         (c.eval_B(t, s) - c.eval_B(0.0, s)).norm() +
                         (c.eval_Q(t, s) - c.eval_Q(0.0, s)).norm() +
                         (c.eval_R(t, s) - c.eval_R(0.0, s)).norm() +
                         (c.eval_G(t) - c.eval_G(0.0)).norm();
    if (drift > 1e-12) {
      throw std::invalid_argument("classical_lq_riccati: not time-consistent input");
    }
  }

  const auto rhs = [&c](double s, const Matrix& P) {
    const Matrix A = c.eval_A(0.0, s);
    const Matrix B = c.eval_B(0.0, s);
    const Matrix R = c.eval_R(0.0, s);
    const Matrix BtP = B.transpose() * P;
    const Matrix quad = BtP.transpose() * R.llt().solve(BtP);
    return symmetrized(-(P * A + A.transpose() * P + c.eval_Q(0.0, s)) + quad);
  };
  OdeOptions opts;
  opts.symmetrize = true;
  opts.label = "classical riccati";
  OdeResult res = integrate_matrix_ode(rhs, c.eval_G(0.0), c.T, 0.0, step, opts);

  MatrixPath path;
  path.grid = TimeGrid::uniform(0.0, c.T, res.values.size() - 1);
  path.values.assign(res.values.rbegin(), res.values.rend());
  return path;
}

}  // namespace ticlq::oracles
