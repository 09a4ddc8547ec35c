#pragma once

// Backward-induction solver for the N-player discretization of the
// time-inconsistent LQ problem. Player k controls [t_{k−1}, t_k] and
// measures cost with coefficients frozen at t_{k−1}; the downstream players
// respond with their own feedback laws. The resulting value matrix P solves
// a per-segment Riccati equation whose terminal condition at each knot
// re-weights all downstream costs, producing jumps at the interior knots.
//
// The effective terminal weight of segment k,
//
//   W_k = Φ(T;t_{k+1})ᵀ G(t_k) Φ(T;t_{k+1})
//         + ∫_{t_{k+1}}^T [ΦᵀQ(t_k,s)Φ + ΨᵀR(t_k,s)Ψ] ds,
//
// is computed by transporting V(s) backward along the already-solved closed
// loop (V̇ = −MᵀV − VM − Q_w − PBR⁻¹R_wR⁻¹BᵀP, V(T) = G(t_k)), which is
// O(step⁴) accurate and avoids quadrature error in the jump records.

#include "ticlq/numerics.hpp"
#include "ticlq/parallel.hpp"
#include "ticlq/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ticlq {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularControlWeightError : public SolverError {
 public:
  explicit SingularControlWeightError(double s)
      : SolverError("control weight singular at s=" + std::to_string(s)) {}
};

class IncompatibleSamplingError : public std::invalid_argument {
 public:
  IncompatibleSamplingError() : std::invalid_argument("incompatible sampling") {}
};

/// Vector-valued path on a uniform grid (state / control samples).
struct VectorPath {
  TimeGrid grid;
  std::vector<Vector> values;
};

namespace detail {

template <class V>
V lagrange_value(const TimeGrid& g, const std::vector<V>& values, double s) {
  const std::size_t n = g.intervals;
  const std::size_t hit = node_index(g, s);
  if (hit != static_cast<std::size_t>(-1)) return values[hit];

  double u = (s - g.a) / g.step();
  if (u < 0.0) u = 0.0;
  if (u > static_cast<double>(n)) u = static_cast<double>(n);

  if (values.size() < 4) {
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(u), n - 1);
    const double w = u - static_cast<double>(i);
    return (1.0 - w) * values[i] + w * values[i + 1];
  }
  std::size_t i0 = static_cast<std::size_t>(u);
  i0 = (i0 == 0) ? 0 : i0 - 1;
  if (i0 + 3 > n) i0 = n - 3;
  V out = V::Zero(values.front().rows(), values.front().cols());
  for (std::size_t j = 0; j < 4; ++j) {
    double w = 1.0;
    const double xj = static_cast<double>(i0 + j);
    for (std::size_t k = 0; k < 4; ++k) {
      if (k == j) continue;
      const double xk = static_cast<double>(i0 + k);
      w *= (u - xk) / (xj - xk);
    }
    out += w * values[i0 + j];
  }
  return out;
}

}  // namespace detail

inline Vector path_value(const VectorPath& p, double s) {
  return detail::lagrange_value(p.grid, p.values, s);
}

/// R(·)⁻¹M via SPD factorization. A failed factorization or a diagonal entry
/// below 1e-12 (which bounds λ_min from above) rejects the weight.
inline Matrix spd_solve(const Matrix& R, const Matrix& rhs, double s) {
  if (R.diagonal().minCoeff() < 1e-12) throw SingularControlWeightError(s);
  Eigen::LLT<Matrix> llt(R);
  if (llt.info() != Eigen::Success) throw SingularControlWeightError(s);
  return llt.solve(rhs);
}

/// Value matrix of the game: per-segment backward Riccati samples with the
/// recorded knot jumps and effective terminal weights.
struct PiecewiseRiccatiSolution {
  Partition delta;
  std::vector<MatrixPath> P;             // segment j sampled on [t_j, t_{j+1}]
  std::vector<Matrix> terminal_weights;  // W_j = P(t_{j+1} − 0)
  std::vector<Matrix> jumps;             // ΔP(t_k) = P(t_k+0) − P(t_k−0), k = 1..N−1

  PiecewiseRiccatiSolution(Partition d) : delta(std::move(d)) {}

  double max_jump_norm() const {
    double m = 0.0;
    for (const auto& j : jumps) m = std::max(m, frobenius(j));
    return m;
  }

  /// Empirical constant in ‖ΔP(t_k)‖ ≤ K (t_k − t_{k−1}).
  double jump_rate() const {
    double k = 0.0;
    for (std::size_t i = 0; i < jumps.size(); ++i) {
      k = std::max(k, frobenius(jumps[i]) / delta.segment_length(static_cast<int>(i)));
    }
    return k;
  }

  /// P at s; at interior knots the `right_limit` flag picks the branch.
  Matrix value(double s, bool right_limit = true) const {
    int j = delta.segment_of(s);
    if (!right_limit && j > 0 && s == delta.knot(j)) j -= 1;
    return path_value(P[static_cast<std::size_t>(j)], s);
  }
};

/// Feedback transition families anchored at the knots: Φ(s; t_k) solves the
/// closed-loop equation forward from identity, Ψ(s; t_k) = −R⁻¹BᵀP Φ(s; t_k).
struct TransitionFamily {
  Partition delta;
  // phi[k][d]: anchor t_k, sampled over segment k+d; psi likewise.
  std::vector<std::vector<MatrixPath>> phi;
  std::vector<std::vector<MatrixPath>> psi;

  TransitionFamily(Partition d) : delta(std::move(d)) {}

  Matrix phi_value(int anchor, double s) const {
    const int j = std::max(delta.segment_of(s), anchor);
    return path_value(phi[static_cast<std::size_t>(anchor)][static_cast<std::size_t>(j - anchor)], s);
  }

  const Matrix& phi_horizon(int anchor) const {
    return phi[static_cast<std::size_t>(anchor)].back().values.back();
  }
};

/// Sampled control on the solver grids, one path per segment.
struct SampledControl {
  std::vector<VectorPath> segments;
};

/// Equilibrium trajectory/control samples and the per-player costs J_k.
struct EquilibriumPair {
  Partition delta;
  Vector x0;
  std::vector<VectorPath> state;    // X̄ per segment
  std::vector<VectorPath> control;  // ū per segment
  std::vector<double> costs;        // J_k, k = 1..N

  EquilibriumPair(Partition d) : delta(std::move(d)) {}

  SampledControl control_samples() const { return {control}; }
};

struct GameSolution {
  PiecewiseRiccatiSolution riccati;
  TransitionFamily transitions;
  EquilibriumPair equilibrium;
};

/// Comparison solutions of the Lyapunov equations: P0 shares the Riccati
/// terminal weights (and jump structure); Pbar0 is the jump-free solution
/// with the single terminal weight G(t_{N−1}).
struct LyapunovBounds {
  Partition delta;
  std::vector<MatrixPath> P0;
  std::vector<MatrixPath> Pbar0;

  LyapunovBounds(Partition d) : delta(std::move(d)) {}
};

namespace detail {

inline int steps_for(double len, double step, int align = 1) {
  const double target = step * align;
  const long long n = std::max<long long>(1, std::llround(len / target));
  return static_cast<int>(n) * align;
}

inline double default_step(double T, double step) { return step > 0.0 ? step : T / 2000.0; }

struct SegmentContext {
  const CoefficientSet* coeffs = nullptr;
  const Partition* delta = nullptr;
  double step = 0.0;

  double frozen(int j) const { return delta->knot(j); }

  Matrix A(int j, double s) const { return coeffs->eval_A(frozen(j), s); }
  Matrix B(int j, double s) const { return coeffs->eval_B(frozen(j), s); }
  Matrix Q(int j, double s) const { return coeffs->eval_Q(frozen(j), s); }
  Matrix R(int j, double s) const { return coeffs->eval_R(frozen(j), s); }

  // Feedback gain K(s) = R^Δ(s)⁻¹ B^Δ(s)ᵀ P for the segment's frozen data.
  Matrix gain(int j, double s, const Matrix& P) const {
    return spd_solve(R(j, s), B(j, s).transpose() * P, s);
  }
};

// One RK4 sweep of the state+cost pair (x, ℓ) over [a, b] in n steps.
// fx gives ẋ(s, x); fl gives ℓ̇(s, x).
template <class FX, class FL>
void rk4_state_cost(FX&& fx, FL&& fl, Vector& x, double& cost, double a, double b, int n) {
  const double h = (b - a) / n;
  for (int i = 0; i < n; ++i) {
    const double s = a + (b - a) * (static_cast<double>(i) / n);
    const Vector k1 = fx(s, x);
    const double c1 = fl(s, x);
    const Vector x2 = x + (0.5 * h) * k1;
    const Vector k2 = fx(s + 0.5 * h, x2);
    const double c2 = fl(s + 0.5 * h, x2);
    const Vector x3 = x + (0.5 * h) * k2;
    const Vector k3 = fx(s + 0.5 * h, x3);
    const double c3 = fl(s + 0.5 * h, x3);
    const Vector x4 = x + h * k3;
    const Vector k4 = fx(s + h, x4);
    const double c4 = fl(s + h, x4);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    cost += (h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
    if (!x.allFinite() || !std::isfinite(cost)) {
      throw DivergenceError("cost integration: divergence", s + h);
    }
  }
}

}  // namespace detail

/// Solves the N-player game on the partition: the piecewise Riccati solution
/// with jump records, the transition families, and the equilibrium pair with
/// per-player costs. `step` ≤ 0 selects the default T/2000.
inline GameSolution solve_game(const CoefficientSet& coeffs, const Partition& delta,
                               const Vector& x0, double step = 0.0) {
  if (x0.size() != coeffs.n) throw std::invalid_argument("solve_game: bad initial state size");
  const int N = delta.segments();
  const double h = detail::default_step(coeffs.T, step);
  detail::SegmentContext ctx{&coeffs, &delta, h};

  PiecewiseRiccatiSolution riccati(delta);
  riccati.P.resize(static_cast<std::size_t>(N));
  riccati.terminal_weights.resize(static_cast<std::size_t>(N));

  std::vector<TimeGrid> grids(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) {
    grids[static_cast<std::size_t>(j)] = TimeGrid::uniform(
        delta.knot(j), delta.knot(j + 1), detail::steps_for(delta.segment_length(j), h));
  }

  // P within segment j, cubic off-node.
  const auto p_at = [&riccati](int j, double s) {
    return path_value(riccati.P[static_cast<std::size_t>(j)], s);
  };

  // Backward induction over segments.
  for (int j = N - 1; j >= 0; --j) {
    Matrix weight;
    if (j == N - 1) {
      weight = coeffs.eval_G(delta.knot(N - 1));
    } else {
      // Transport V backward from T to t_{j+1} along the solved closed loop,
      // carrying player j+1's frozen weights.
      const double tw = delta.knot(j);
      Matrix V = coeffs.eval_G(tw);
      for (int seg = N - 1; seg > j; --seg) {
        const auto rhs = [&](double s, const Matrix& v) {
          const Matrix P = p_at(seg, s);
          const Matrix K = ctx.gain(seg, s, P);
          const Matrix M = ctx.A(seg, s) - ctx.B(seg, s) * K;
          const Matrix W = coeffs.eval_Q(tw, s) + K.transpose() * coeffs.eval_R(tw, s) * K;
          return symmetrized(-(M.transpose() * v + v * M) - W);
        };
        OdeOptions opts;
        opts.symmetrize = true;
        opts.label = "terminal weight transport";
        const TimeGrid& g = grids[static_cast<std::size_t>(seg)];
        V = integrate_matrix_ode(rhs, V, g.b, g.a, g.step(), opts).values.back();
      }
      weight = V;
    }
    riccati.terminal_weights[static_cast<std::size_t>(j)] = weight;

    const auto rhs = [&](double s, const Matrix& P) {
      const Matrix A = ctx.A(j, s);
      const Matrix BtP = ctx.B(j, s).transpose() * P;
      const Matrix quad = BtP.transpose() * spd_solve(ctx.R(j, s), BtP, s);
      return symmetrized(-(P * A + A.transpose() * P + ctx.Q(j, s)) + quad);
    };
    OdeOptions opts;
    opts.symmetrize = true;
    opts.label = "riccati";
    const TimeGrid& g = grids[static_cast<std::size_t>(j)];
    OdeResult res;
    try {
      res = integrate_matrix_ode(rhs, weight, g.b, g.a, g.step(), opts);
    } catch (const DivergenceError& e) {
      throw SolverError("riccati divergence at t=" + std::to_string(e.time));
    }
    MatrixPath path;
    path.grid = g;
    path.values.assign(res.values.rbegin(), res.values.rend());
    riccati.P[static_cast<std::size_t>(j)] = std::move(path);
  }

  for (int k = 1; k < N; ++k) {
    riccati.jumps.push_back(riccati.P[static_cast<std::size_t>(k)].values.front() -
                            riccati.P[static_cast<std::size_t>(k - 1)].values.back());
  }

  // Transition families: anchors are independent once P is known.
  TransitionFamily family(delta);
  family.phi.resize(static_cast<std::size_t>(N));
  family.psi.resize(static_cast<std::size_t>(N));
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t a) {
    const int anchor = static_cast<int>(a);
    Matrix phi = Matrix::Identity(coeffs.n, coeffs.n);
    for (int seg = anchor; seg < N; ++seg) {
      const auto rhs = [&](double s, const Matrix& F) {
        const Matrix P = p_at(seg, s);
        return Matrix((ctx.A(seg, s) - ctx.B(seg, s) * ctx.gain(seg, s, P)) * F);
      };
      const TimeGrid& g = grids[static_cast<std::size_t>(seg)];
      OdeResult res = integrate_matrix_ode(rhs, phi, g.a, g.b, g.step(), {false, "transition"});
      MatrixPath phi_path{g, std::move(res.values)};
      MatrixPath psi_path{g, {}};
      psi_path.values.reserve(phi_path.values.size());
      for (std::size_t i = 0; i < phi_path.values.size(); ++i) {
        const double s = g.point(i);
        const Matrix& P = riccati.P[static_cast<std::size_t>(seg)].values[i];
        psi_path.values.push_back(-ctx.gain(seg, s, P) * phi_path.values[i]);
      }
      phi = phi_path.values.back();
      family.phi[a].push_back(std::move(phi_path));
      family.psi[a].push_back(std::move(psi_path));
    }
  });

  // Closed-loop equilibrium trajectory and feedback control samples.
  EquilibriumPair eq(delta);
  eq.x0 = x0;
  Vector x = x0;
  for (int seg = 0; seg < N; ++seg) {
    const TimeGrid& g = grids[static_cast<std::size_t>(seg)];
    const auto rhs = [&](double s, const Matrix& v) {
      const Matrix P = p_at(seg, s);
      return Matrix((ctx.A(seg, s) - ctx.B(seg, s) * ctx.gain(seg, s, P)) * v);
    };
    OdeResult res = integrate_matrix_ode(rhs, x, g.a, g.b, g.step(), {false, "closed loop"});
    VectorPath xs{g, {}}, us{g, {}};
    xs.values.reserve(res.values.size());
    us.values.reserve(res.values.size());
    for (std::size_t i = 0; i < res.values.size(); ++i) {
      const double s = g.point(i);
      const Matrix& P = riccati.P[static_cast<std::size_t>(seg)].values[i];
      xs.values.push_back(res.values[i]);
      us.values.push_back(-ctx.gain(seg, s, P) * res.values[i]);
    }
    x = xs.values.back();
    eq.state.push_back(std::move(xs));
    eq.control.push_back(std::move(us));
  }

  // J_k along the equilibrium: augmented closed-loop integration from t_{k−1}
  // with player k's weights.
  eq.costs.assign(static_cast<std::size_t>(N), 0.0);
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t p) {
    const double tw = delta.knot(static_cast<int>(p));
    Vector xk = eq.state[p].values.front();
    double cost = 0.0;
    for (int seg = static_cast<int>(p); seg < N; ++seg) {
      const TimeGrid& g = grids[static_cast<std::size_t>(seg)];
      const auto fx = [&](double s, const Vector& v) {
        const Matrix P = p_at(seg, s);
        return Vector((ctx.A(seg, s) - ctx.B(seg, s) * ctx.gain(seg, s, P)) * v);
      };
      const auto fl = [&](double s, const Vector& v) {
        const Matrix P = p_at(seg, s);
        const Vector u = -ctx.gain(seg, s, P) * v;
        return v.dot(coeffs.eval_Q(tw, s) * v) + u.dot(coeffs.eval_R(tw, s) * u);
      };
      detail::rk4_state_cost(fx, fl, xk, cost, g.a, g.b, static_cast<int>(g.intervals));
    }
    eq.costs[p] = cost + xk.dot(coeffs.eval_G(tw) * xk);
  });

  return GameSolution{std::move(riccati), std::move(family), std::move(eq)};
}

/// Lyapunov comparison solutions sharing the game's terminal weights: the
/// piecewise P0 (same jump structure) and the jump-free Pbar0.
inline LyapunovBounds solve_lyapunov_bounds(const CoefficientSet& coeffs, const Partition& delta,
                                            const GameSolution& game, double step = 0.0) {
  const int N = delta.segments();
  const double h = detail::default_step(coeffs.T, step);
  detail::SegmentContext ctx{&coeffs, &delta, h};
  LyapunovBounds out(delta);
  out.P0.resize(static_cast<std::size_t>(N));
  out.Pbar0.resize(static_cast<std::size_t>(N));

  const auto lyap_rhs = [&ctx](int seg) {
    return [&ctx, seg](double s, const Matrix& P) {
      const Matrix A = ctx.A(seg, s);
      return symmetrized(-(P * A + A.transpose() * P + ctx.Q(seg, s)));
    };
  };

  OdeOptions opts;
  opts.symmetrize = true;
  opts.label = "lyapunov";

  Matrix carried = coeffs.eval_G(delta.knot(N - 1));  // Pbar0 terminal value
  for (int j = N - 1; j >= 0; --j) {
    const TimeGrid& g = game.riccati.P[static_cast<std::size_t>(j)].grid;
    OdeResult seg0 = integrate_matrix_ode(
        lyap_rhs(j), game.riccati.terminal_weights[static_cast<std::size_t>(j)], g.b, g.a,
        g.step(), opts);
    MatrixPath p0{g, {}};
    p0.values.assign(seg0.values.rbegin(), seg0.values.rend());
    out.P0[static_cast<std::size_t>(j)] = std::move(p0);

    OdeResult segBar = integrate_matrix_ode(lyap_rhs(j), carried, g.b, g.a, g.step(), opts);
    carried = segBar.values.back();
    MatrixPath pbar{g, {}};
    pbar.values.assign(segBar.values.rbegin(), segBar.values.rend());
    out.Pbar0[static_cast<std::size_t>(j)] = std::move(pbar);
  }
  return out;
}

namespace detail {

/// Open-loop cost of player k (1-based): integrate the frozen-coefficient
/// state equation from x at time 0 under the control law `u`, then evaluate
/// player k's cost from t_{k−1}. With `interval_constant` the control is held
/// at its step-midpoint value across each RK4 step (exact treatment of
/// piecewise-constant deviations on aligned grids); otherwise it is sampled
/// at the stage times.
inline double eval_cost_open_loop(const CoefficientSet& coeffs, const Partition& delta, int k,
                                  const std::function<Vector(double)>& u, const Vector& x0,
                                  double step, bool interval_constant, int align = 1) {
  if (k < 1 || k > delta.segments()) throw std::invalid_argument("player index out of range");
  const double h = detail::default_step(coeffs.T, step);
  detail::SegmentContext ctx{&coeffs, &delta, h};
  const double t_player = delta.knot(k - 1);

  Vector x = x0;
  double cost = 0.0;
  for (int seg = 0; seg < delta.segments(); ++seg) {
    const double a = delta.knot(seg), b = delta.knot(seg + 1);
    const int n = detail::steps_for(b - a, h, align);
    const bool counted = seg >= k - 1;  // running cost starts at t_{k−1}
    const double hs = (b - a) / n;
    for (int i = 0; i < n; ++i) {
      const double s0 = a + (b - a) * (static_cast<double>(i) / n);
      Vector u_const;
      if (interval_constant) u_const = u(s0 + 0.5 * hs);
      const auto uv = [&](double s) { return interval_constant ? u_const : u(s); };
      const auto fx = [&](double s, const Vector& v) {
        return Vector(ctx.A(seg, s) * v + ctx.B(seg, s) * uv(s));
      };
      const auto fl = [&](double s, const Vector& v) {
        if (!counted) return 0.0;
        const Vector uu = uv(s);
        return v.dot(coeffs.eval_Q(t_player, s) * v) + uu.dot(coeffs.eval_R(t_player, s) * uu);
      };
      detail::rk4_state_cost(fx, fl, x, cost, s0, s0 + hs, 1);
    }
  }
  return cost + x.dot(coeffs.eval_G(t_player) * x);
}

}  // namespace detail

/// Cost J_k of a sampled control: the samples must live on the grids induced
/// by `step` (same per-segment node counts), otherwise the sampling is
/// rejected as incompatible.
inline double eval_game_cost(const CoefficientSet& coeffs, const Partition& delta, int k,
                             const SampledControl& u, const Vector& x0, double step = 0.0) {
  const double h = detail::default_step(coeffs.T, step);
  if (static_cast<int>(u.segments.size()) != delta.segments()) throw IncompatibleSamplingError();
  for (int j = 0; j < delta.segments(); ++j) {
    const auto& p = u.segments[static_cast<std::size_t>(j)];
    const auto n = static_cast<std::size_t>(detail::steps_for(delta.segment_length(j), h));
    if (p.values.size() != n + 1 || p.grid.intervals != n ||
        std::abs(p.grid.a - delta.knot(j)) > 1e-12 ||
        std::abs(p.grid.b - delta.knot(j + 1)) > 1e-12) {
      throw IncompatibleSamplingError();
    }
  }
  const auto u_fn = [&](double s) {
    const int j = delta.segment_of(s);
    return path_value(u.segments[static_cast<std::size_t>(j)], s);
  };
  return detail::eval_cost_open_loop(coeffs, delta, k, u_fn, x0, h, false);
}

struct DeviationReport {
  int trials = 0;
  std::uint64_t seed = 0;
  std::vector<double> baseline_costs;      // J_k of the represented equilibrium
  std::vector<double> min_margin_player;   // min over trials of J_k(dev) − J_k(eq)
  double min_margin = 0.0;

  bool pass(double tol = 1e-8) const { return min_margin >= -tol; }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic uniform draw in [−1, 1), independent of platform RNG
/// distributions.
class UnitRng {
 public:
  explicit UnitRng(std::uint64_t seed) : state_(seed) {}
  double next() {
    state_ = splitmix64(state_);
    return 2.0 * (static_cast<double>(state_ >> 11) * 0x1.0p-53) - 1.0;
  }

 private:
  std::uint64_t state_;
};

}  // namespace detail

/// Necessary-condition check of the equilibrium property: for each player,
/// random bounded piecewise-constant perturbations (8 chunks, amplitude ≤ 1)
/// of that player's control — other players held at equilibrium — must not
/// lower the player's cost beyond roundoff. Baseline and deviations share
/// the evaluation pipeline, so the zero perturbation has margin exactly 0.
inline DeviationReport verify_equilibrium(const CoefficientSet& coeffs, const Partition& delta,
                                          const GameSolution& game, int trials,
                                          std::uint64_t seed, double step = 0.0) {
  const int N = delta.segments();
  const double h = detail::default_step(coeffs.T, step);
  constexpr int kChunks = 8;

  const auto eq_u = [&](double s) {
    const int j = delta.segment_of(s);
    return path_value(game.equilibrium.control[static_cast<std::size_t>(j)], s);
  };

  DeviationReport rep;
  rep.trials = trials;
  rep.seed = seed;
  rep.baseline_costs.assign(static_cast<std::size_t>(N), 0.0);
  rep.min_margin_player.assign(static_cast<std::size_t>(N),
                               std::numeric_limits<double>::infinity());

  parallel_for(static_cast<std::size_t>(N), [&](std::size_t p) {
    const int player = static_cast<int>(p) + 1;
    const double lo = delta.knot(player - 1), hi = delta.knot(player);
    const double baseline =
        detail::eval_cost_open_loop(coeffs, delta, player, eq_u, game.equilibrium.x0, h, true,
                                    kChunks);
    rep.baseline_costs[p] = baseline;
    double min_margin = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < trials; ++trial) {
      detail::UnitRng rng(detail::splitmix64(seed ^ detail::splitmix64(
                              (static_cast<std::uint64_t>(p) << 32) |
                              static_cast<std::uint64_t>(trial))));
      Matrix bump(coeffs.m, kChunks);
      for (int c = 0; c < kChunks; ++c) {
        for (int r = 0; r < coeffs.m; ++r) bump(r, c) = rng.next();
      }
      const auto dev_u = [&](double s) {
        Vector u = eq_u(s);
        if (s >= lo && s < hi) {
          int c = static_cast<int>((s - lo) / (hi - lo) * kChunks);
          c = std::clamp(c, 0, kChunks - 1);
          u += bump.col(c);
        }
        return u;
      };
      const double cost = detail::eval_cost_open_loop(coeffs, delta, player, dev_u,
                                                      game.equilibrium.x0, h, true, kChunks);
      min_margin = std::min(min_margin, cost - baseline);
    }
    rep.min_margin_player[p] = min_margin;
  });

  rep.min_margin = std::numeric_limits<double>::infinity();
  for (double m : rep.min_margin_player) rep.min_margin = std::min(rep.min_margin, m);
  return rep;
}

}  // namespace ticlq
