#pragma once

// Limit of the game discretization as the mesh vanishes: the jump-removed
// interpolation of the piecewise Riccati solution, the coupled
// forward-backward Riccati–Volterra integral system for (P, Φ) with the
// diagonal coefficients A(s,s), B(s,s), R(s,s), and mesh-refinement studies
// comparing the two.

#include "ticlq/game.hpp"
#include "ticlq/numerics.hpp"
#include "ticlq/parallel.hpp"
#include "ticlq/problem.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ticlq {

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

/// Continuous path obtained by absorbing each knot jump linearly over the
/// preceding segment: P̃ = P + ((s − t_{k−1})/(t_k − t_{k−1})) ΔP(t_k), with
/// P̃ = P on the last segment.
struct JumpRemovedPath {
  Partition delta;
  std::vector<MatrixPath> segments;

  JumpRemovedPath(Partition d) : delta(std::move(d)) {}

  Matrix value(double s) const {
    const int j = delta.segment_of(s);
    return path_value(segments[static_cast<std::size_t>(j)], s);
  }

  double max_norm() const {
    double m = 0.0;
    for (const auto& seg : segments) {
      for (const auto& v : seg.values) m = std::max(m, frobenius(v));
    }
    return m;
  }

  /// Largest finite-difference slope between consecutive samples.
  double max_slope() const {
    double m = 0.0;
    for (const auto& seg : segments) {
      const double h = seg.grid.step();
      for (std::size_t i = 0; i + 1 < seg.values.size(); ++i) {
        m = std::max(m, frobenius(seg.values[i + 1] - seg.values[i]) / h);
      }
    }
    return m;
  }
};

inline JumpRemovedPath remove_jumps(const PiecewiseRiccatiSolution& r) {
  const int N = r.delta.segments();
  JumpRemovedPath out(r.delta);
  out.segments.reserve(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) {
    const MatrixPath& src = r.P[static_cast<std::size_t>(j)];
    MatrixPath dst{src.grid, src.values};
    if (j < N - 1) {
      const Matrix& jump = r.jumps[static_cast<std::size_t>(j)];
      const auto n = src.grid.intervals;
      for (std::size_t i = 0; i < dst.values.size(); ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(n);
        dst.values[i] += frac * jump;
      }
    }
    out.segments.push_back(std::move(dst));
  }
  return out;
}

enum class VolterraInit { Zero, Lyapunov, Game };

struct VolterraOptions {
  int resolution = 256;     // number of anchor intervals on [0, T]
  double tol = 1e-10;       // sup-norm fixed-point tolerance
  int max_iter = 200;
  VolterraInit init = VolterraInit::Game;
  double damping = 1.0;     // halved automatically on oscillation
  int init_game_segments = 8;
  double init_game_step = 0.0;
};

/// Solution of the forward-backward system
///   Φ(s;t) = I + ∫_t^s [A(r) − B(r)R(r)⁻¹B(r)ᵀP(r)] Φ(r;t) dr,
///   P(t)   = Φ(T;t)ᵀG(t)Φ(T;t) + ∫_t^T [ΦᵀQ(t,r)Φ + Ψ(r;t)ᵀR(t,r)Ψ(r;t)] dr,
/// with A(s) = A(s,s), B(s) = B(s,s), R(s) = R(s,s) and
/// Ψ(r;t) = −R(r)⁻¹B(r)ᵀP(r)Φ(r;t), sampled on a triangular anchor grid.
struct VolterraSolution {
  double T = 0.0;
  int resolution = 0;
  TimeGrid anchor_grid;
  std::vector<Matrix> P;                  // at anchors t_0..t_M
  std::vector<std::vector<Matrix>> Phi;   // Phi[i][d] = Φ(t_{i+d}; t_i)
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;
  double self_consistency = 0.0;          // re-insertion residual at the fixed point
  std::function<Matrix(double)> diag_A, diag_B, diag_R;

  double anchor(int i) const { return anchor_grid.point(static_cast<std::size_t>(i)); }

  Matrix value(double t) const { return detail::lagrange_value(anchor_grid, P, t); }
};

namespace detail {

struct VolterraWorkspace {
  const CoefficientSet* coeffs;
  TimeGrid grid;

  Matrix drift(double s, const std::vector<Matrix>& P_anchors) const {
    const Matrix P = lagrange_value(grid, P_anchors, s);
    const Matrix B = coeffs->eval_B(s, s);
    const Matrix K = spd_solve(coeffs->eval_R(s, s), B.transpose() * P, s);
    return coeffs->eval_A(s, s) - B * K;
  }
};

}  // namespace detail

/// Picard iteration for the Volterra system: each sweep integrates every
/// Φ(·;t_i) forward with the current P in the drift, then rebuilds P from the
/// integral formula (trapezoid over anchors). Iterates until the sup-norm
/// update falls below tol; throws NonConvergenceError (with the residual
/// history) otherwise. The returned Φ is integrated against the final P, and
/// `self_consistency` records the final re-insertion residual.
inline VolterraSolution solve_volterra(const CoefficientSet& coeffs, const VolterraOptions& opts) {
  if (opts.resolution < 2) throw std::invalid_argument("solve_volterra: resolution must be >= 2");
  const int M = opts.resolution;
  const int n = coeffs.n;

  VolterraSolution sol;
  sol.T = coeffs.T;
  sol.resolution = M;
  sol.anchor_grid = TimeGrid::uniform(0.0, coeffs.T, static_cast<std::size_t>(M));
  sol.diag_A = [c = coeffs](double s) { return c.eval_A(s, s); };
  sol.diag_B = [c = coeffs](double s) { return c.eval_B(s, s); };
  sol.diag_R = [c = coeffs](double s) { return c.eval_R(s, s); };
  const double eta = sol.anchor_grid.step();

  // Initial iterate.
  sol.P.assign(static_cast<std::size_t>(M) + 1, Matrix::Zero(n, n));
  switch (opts.init) {
    case VolterraInit::Zero:
      break;
    case VolterraInit::Lyapunov: {
      const auto rhs = [&coeffs](double s, const Matrix& P) {
        const Matrix A = coeffs.eval_A(s, s);
        return symmetrized(-(P * A + A.transpose() * P + coeffs.eval_Q(s, s)));
      };
      OdeOptions lopts;
      lopts.symmetrize = true;
      lopts.label = "lyapunov init";
      OdeResult res = integrate_matrix_ode(rhs, coeffs.eval_G(coeffs.T), coeffs.T, 0.0, eta, lopts);
      for (int i = 0; i <= M; ++i) {
        sol.P[static_cast<std::size_t>(i)] = res.values[static_cast<std::size_t>(M - i)];
      }
      break;
    }
    case VolterraInit::Game: {
      const Partition coarse = Partition::uniform(opts.init_game_segments, coeffs.T);
      const GameSolution game =
          solve_game(coeffs, coarse, Vector::Zero(n), opts.init_game_step);
      const JumpRemovedPath smooth = remove_jumps(game.riccati);
      for (int i = 0; i <= M; ++i) {
        sol.P[static_cast<std::size_t>(i)] = smooth.value(sol.anchor(i));
      }
      break;
    }
  }

  detail::VolterraWorkspace ws{&coeffs, sol.anchor_grid};

  // One sweep: Φ rows from P, then the integral-formula update of P.
  const auto sweep = [&](const std::vector<Matrix>& P_cur,
                         std::vector<std::vector<Matrix>>& phi_out,
                         std::vector<Matrix>& P_out) {
    phi_out.assign(static_cast<std::size_t>(M) + 1, {});
    P_out.assign(static_cast<std::size_t>(M) + 1, Matrix());

    // Per-anchor feedback factors d_q = R(t_q)⁻¹B(t_q)ᵀP_q for the weighted
    // control term.
    std::vector<Matrix> dq(static_cast<std::size_t>(M) + 1);
    for (int q = 0; q <= M; ++q) {
      const double tq = sol.anchor(q);
      dq[static_cast<std::size_t>(q)] = spd_solve(
          coeffs.eval_R(tq, tq), coeffs.eval_B(tq, tq).transpose() * P_cur[static_cast<std::size_t>(q)],
          tq);
    }

    parallel_for(static_cast<std::size_t>(M) + 1, [&](std::size_t ii) {
      const int i = static_cast<int>(ii);
      const double ti = sol.anchor(i);
      std::vector<Matrix>& row = phi_out[ii];
      row.reserve(static_cast<std::size_t>(M - i) + 1);
      Matrix phi = Matrix::Identity(n, n);
      row.push_back(phi);
      for (int q = i; q < M; ++q) {
        const double s0 = sol.anchor(q);
        const Matrix k1 = ws.drift(s0, P_cur) * phi;
        const Matrix k2 = ws.drift(s0 + 0.5 * eta, P_cur) * (phi + (0.5 * eta) * k1);
        const Matrix k3 = ws.drift(s0 + 0.5 * eta, P_cur) * (phi + (0.5 * eta) * k2);
        const Matrix k4 = ws.drift(s0 + eta, P_cur) * (phi + eta * k3);
        phi += (eta / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!phi.allFinite()) throw DivergenceError("volterra transition: divergence", s0 + eta);
        row.push_back(phi);
      }

      // P(t_i) via the integral formula (trapezoid over anchors).
      std::vector<Matrix> integrand;
      integrand.reserve(row.size());
      for (int q = i; q <= M; ++q) {
        const double tq = sol.anchor(q);
        const Matrix& d = dq[static_cast<std::size_t>(q)];
        const Matrix W = coeffs.eval_Q(ti, tq) + d.transpose() * coeffs.eval_R(ti, tq) * d;
        const Matrix& F = row[static_cast<std::size_t>(q - i)];
        integrand.push_back(F.transpose() * W * F);
      }
      Matrix P_new = row.back().transpose() * coeffs.eval_G(ti) * row.back();
      if (integrand.size() >= 2) P_new += trapezoid_quad(integrand, eta);
      P_out[ii] = symmetrized(P_new);
    });
  };

  std::vector<std::vector<Matrix>> phi;
  std::vector<Matrix> P_new;
  double theta = opts.damping;
  int increases = 0;
  double prev_residual = std::numeric_limits<double>::infinity();
  bool converged = false;

  for (int it = 1; it <= opts.max_iter; ++it) {
    sweep(sol.P, phi, P_new);
    double residual = 0.0;
    for (int i = 0; i <= M; ++i) {
      residual = std::max(residual,
                          frobenius(P_new[static_cast<std::size_t>(i)] - sol.P[static_cast<std::size_t>(i)]));
    }
    sol.residual_history.push_back(residual);
    sol.iterations = it;

    increases = (residual > prev_residual) ? increases + 1 : 0;
    if (increases >= 3 && theta == 1.0) {
      theta = 0.5;  // damp an oscillating iteration
      increases = 0;
    }
    prev_residual = residual;

    for (int i = 0; i <= M; ++i) {
      sol.P[static_cast<std::size_t>(i)] +=
          theta * (P_new[static_cast<std::size_t>(i)] - sol.P[static_cast<std::size_t>(i)]);
    }
    if (residual < opts.tol) {
      sol.residual = residual;
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NonConvergenceError("volterra solve: no convergence after " +
                                  std::to_string(opts.max_iter) + " iterations",
                              sol.residual_history);
  }

  // Final sweep against the converged P: Φ consistent with P, and the
  // re-insertion residual as a self-consistency certificate.
  sweep(sol.P, phi, P_new);
  double check = 0.0;
  for (int i = 0; i <= M; ++i) {
    check = std::max(check,
                     frobenius(P_new[static_cast<std::size_t>(i)] - sol.P[static_cast<std::size_t>(i)]));
  }
  sol.self_consistency = check;
  sol.Phi = std::move(phi);
  return sol;
}

/// Equilibrium pair of the limit problem: X̄(s) = Φ(s;0)x and the feedback
/// ū(s) = −R(s)⁻¹B(s)ᵀP(s)X̄(s), sampled at the anchors.
struct EquilibriumControl {
  TimeGrid anchor_grid;
  Vector x0;
  std::vector<Vector> state;
  std::vector<Vector> control;

  Vector state_at(double s) const { return detail::lagrange_value(anchor_grid, state, s); }
  Vector control_at(double s) const { return detail::lagrange_value(anchor_grid, control, s); }
};

inline EquilibriumControl equilibrium_from_volterra(const VolterraSolution& v, const Vector& x) {
  EquilibriumControl eq;
  eq.anchor_grid = v.anchor_grid;
  eq.x0 = x;
  const int M = v.resolution;
  eq.state.reserve(static_cast<std::size_t>(M) + 1);
  eq.control.reserve(static_cast<std::size_t>(M) + 1);
  for (int i = 0; i <= M; ++i) {
    const double ti = v.anchor(i);
    const Vector xi = v.Phi[0][static_cast<std::size_t>(i)] * x;
    const Matrix B = v.diag_B(ti);
    const Vector ui = -spd_solve(v.diag_R(ti), B.transpose() * (v.P[static_cast<std::size_t>(i)] * xi), ti);
    eq.state.push_back(xi);
    eq.control.push_back(ui);
  }
  return eq;
}

struct ConvergenceRow {
  int segments = 0;
  double mesh = 0.0;
  double sup_dist_P = 0.0;        // ‖P^Δ − P‖∞ over the game sample points
  double sup_dist_P_tilde = 0.0;  // ‖P̃^Δ − P‖∞
  double max_jump = 0.0;
  double cost_gap_max = 0.0;      // max_k [J_k(ū) − J_k(ū^Δ)]
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  std::vector<double> cauchy;  // ‖P̃^{Δ_{i+1}} − P̃^{Δ_i}‖∞ on a reference grid
  std::optional<double> fitted_order;
  std::vector<std::string> errors;
  VolterraSolution limit;
};

/// Mesh-refinement study: for each N solve the game, compare P^Δ and the
/// jump-removed P̃^Δ against the Volterra solution in sup norm, record the
/// jump sizes and the per-player cost gaps of the limit control evaluated on
/// the Δ-grid players, and fit the observed order by log-log regression.
/// Solver failures for individual N are recorded and skipped.
inline ConvergenceReport convergence_study(const CoefficientSet& coeffs,
                                           const std::vector<int>& n_list, const Vector& x,
                                           double step = 0.0, VolterraOptions vopts = {}) {
  if (n_list.empty()) throw std::invalid_argument("convergence_study: empty N list");
  vopts.init = VolterraInit::Game;
  vopts.init_game_segments = n_list.front();
  vopts.init_game_step = step;

  ConvergenceReport rep;
  rep.limit = solve_volterra(coeffs, vopts);
  const EquilibriumControl limit_eq = equilibrium_from_volterra(rep.limit, x);

  std::vector<JumpRemovedPath> smooth_paths;
  for (int N : n_list) {
    try {
      const Partition delta = Partition::uniform(N, coeffs.T);
      const GameSolution game = solve_game(coeffs, delta, x, step);
      const JumpRemovedPath smooth = remove_jumps(game.riccati);

      ConvergenceRow row;
      row.segments = N;
      row.mesh = delta.mesh();
      row.max_jump = game.riccati.max_jump_norm();
      for (int j = 0; j < N; ++j) {
        const MatrixPath& seg = game.riccati.P[static_cast<std::size_t>(j)];
        const MatrixPath& segs = smooth.segments[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < seg.values.size(); ++i) {
          const Matrix ref = rep.limit.value(seg.grid.point(i));
          row.sup_dist_P = std::max(row.sup_dist_P, frobenius(seg.values[i] - ref));
          row.sup_dist_P_tilde =
              std::max(row.sup_dist_P_tilde, frobenius(segs.values[i] - ref));
        }
      }

      const auto u_fn = [&limit_eq](double s) { return limit_eq.control_at(s); };
      double gap = -std::numeric_limits<double>::infinity();
      for (int k = 1; k <= N; ++k) {
        const double jk = detail::eval_cost_open_loop(coeffs, delta, k, u_fn, x, step, false);
        gap = std::max(gap, jk - game.equilibrium.costs[static_cast<std::size_t>(k - 1)]);
      }
      row.cost_gap_max = gap;

      rep.rows.push_back(row);
      smooth_paths.push_back(smooth);
    } catch (const std::exception& e) {
      rep.errors.push_back("N=" + std::to_string(N) + ": " + e.what());
    }
  }

  const int ref_points = 4097;
  for (std::size_t i = 0; i + 1 < smooth_paths.size(); ++i) {
    double d = 0.0;
    for (int p = 0; p < ref_points; ++p) {
      const double s = coeffs.T * static_cast<double>(p) / (ref_points - 1);
      d = std::max(d, frobenius(smooth_paths[i].value(s) - smooth_paths[i + 1].value(s)));
    }
    rep.cauchy.push_back(d);
  }

  if (rep.rows.size() >= 2) {  // slope of log dist vs log mesh
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto m = static_cast<double>(rep.rows.size());
    for (const auto& row : rep.rows) {
      const double lx = std::log(row.mesh), ly = std::log(row.sup_dist_P);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    rep.fitted_order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  }
  return rep;
}

}  // namespace ticlq
