#include <doctest.h>

#include "ticlq/volterra.hpp"
#include "support.hpp"

#include <cmath>

using namespace ticlq;

namespace {

Vector vec1(double v) { return (Vector(1) << v).finished(); }

CoefficientSet problem_c_const2() { return make_problem_c([](double) { return 2.0; }, 1.0); }
CoefficientSet problem_c_affine() {
  return make_problem_c([](double t) { return 1.0 + t; }, 1.0);
}

}  // namespace

TEST_CASE("remove_jumps: no jumps means the path is untouched") {
  const CoefficientSet c = testing::random_constant_problem(2, 1, 3u);
  const GameSolution sol = solve_game(c, build_uniform_partition(4, 1.0), Vector::Zero(2), 1e-3);
  const JumpRemovedPath smooth = remove_jumps(sol.riccati);
  for (int j = 0; j < 4; ++j) {
    for (std::size_t i = 0; i < smooth.segments[static_cast<std::size_t>(j)].values.size(); ++i) {
      CHECK((smooth.segments[static_cast<std::size_t>(j)].values[i] -
             sol.riccati.P[static_cast<std::size_t>(j)].values[i])
                .norm() <= 1e-10);
    }
  }
}

TEST_CASE("remove_jumps: continuity across knots and the sandwich bound") {
  const GameSolution sol =
      solve_game(problem_c_affine(), Partition({0.0, 0.5, 1.0}), vec1(1.0), 5e-4);
  const JumpRemovedPath smooth = remove_jumps(sol.riccati);

  // continuity at the knot: segment 0's right endpoint equals segment 1's left
  CHECK((smooth.segments[0].values.back() - smooth.segments[1].values.front()).norm() == 0.0);

  // ‖P̃ − P‖∞ equals the single jump size here, and is bounded by it everywhere
  double sup_diff = 0.0;
  for (int j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i < smooth.segments[static_cast<std::size_t>(j)].values.size(); ++i) {
      sup_diff = std::max(sup_diff,
                          (smooth.segments[static_cast<std::size_t>(j)].values[i] -
                           sol.riccati.P[static_cast<std::size_t>(j)].values[i])
                              .norm());
    }
  }
  const double jump = sol.riccati.max_jump_norm();
  CHECK(sup_diff <= jump + 1e-14);
  CHECK(sup_diff == doctest::Approx(jump));
  CHECK(jump == doctest::Approx(0.5 / 3.0625).epsilon(1e-5));
}

TEST_CASE("volterra: constant scalar weight reproduces the classical solution") {
  VolterraOptions opts;
  opts.resolution = 128;
  opts.tol = 1e-11;
  opts.init = VolterraInit::Zero;
  const VolterraSolution sol = solve_volterra(problem_c_const2(), opts);
  CHECK(sol.iterations <= 30);
  CHECK(sol.residual < opts.tol);
  for (int i = 0; i <= sol.resolution; i += 16) {
    const double t = sol.anchor(i);
    CHECK(std::abs(sol.P[static_cast<std::size_t>(i)](0, 0) - 2.0 / (1.0 + 2.0 * (1.0 - t))) <=
          1e-6);
  }
  // diagonal identity
  for (std::size_t i = 0; i < sol.Phi.size(); ++i) {
    CHECK((sol.Phi[i][0] - Matrix::Identity(1, 1)).norm() == 0.0);
  }
}

TEST_CASE("volterra: zero weights give the zero solution and the free transition") {
  Matrix a(1, 1);
  a << 0.7;
  const CoefficientSet c =
      CoefficientSet::constant(a, Matrix::Identity(1, 1), Matrix::Zero(1, 1),
                               Matrix::Identity(1, 1), Matrix::Zero(1, 1), 1.0);
  VolterraOptions opts;
  opts.resolution = 64;
  opts.tol = 1e-12;
  opts.init = VolterraInit::Zero;
  const VolterraSolution sol = solve_volterra(c, opts);
  for (const auto& p : sol.P) CHECK(p.norm() <= 1e-12);
  // Φ(s;0) = exp(0.7 s) for the uncontrolled scalar flow
  for (int i = 0; i <= 64; i += 8) {
    const double s = sol.anchor(i);
    CHECK(std::abs(sol.Phi[0][static_cast<std::size_t>(i)](0, 0) - std::exp(0.7 * s)) <= 1e-9);
  }
}

TEST_CASE("volterra: self-consistency and agreement across initializations") {
  VolterraOptions opts;
  opts.resolution = 96;
  opts.tol = 1e-11;
  opts.init = VolterraInit::Zero;
  const VolterraSolution from_zero = solve_volterra(problem_c_affine(), opts);
  CHECK(from_zero.self_consistency <= 2.0 * opts.tol);

  opts.init = VolterraInit::Game;
  opts.init_game_segments = 6;
  const VolterraSolution from_game = solve_volterra(problem_c_affine(), opts);
  double diff = 0.0;
  for (std::size_t i = 0; i < from_zero.P.size(); ++i) {
    diff = std::max(diff, (from_zero.P[i] - from_game.P[i]).norm());
  }
  CHECK(diff <= 10.0 * opts.tol);

  opts.init = VolterraInit::Lyapunov;
  const VolterraSolution from_lyap = solve_volterra(problem_c_affine(), opts);
  diff = 0.0;
  for (std::size_t i = 0; i < from_zero.P.size(); ++i) {
    diff = std::max(diff, (from_zero.P[i] - from_lyap.P[i]).norm());
  }
  CHECK(diff <= 10.0 * opts.tol);
}

TEST_CASE("volterra: non-convergence is reported with a residual history") {
  VolterraOptions opts;
  opts.resolution = 32;
  opts.tol = 1e-16;  // unreachable
  opts.max_iter = 3;
  opts.init = VolterraInit::Zero;
  try {
    solve_volterra(problem_c_affine(), opts);
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& e) {
    CHECK(e.residual_history.size() == 3);
  }
}

TEST_CASE("equilibrium_from_volterra: closed form, zero state, linearity") {
  VolterraOptions opts;
  opts.resolution = 128;
  opts.tol = 1e-11;
  opts.init = VolterraInit::Zero;
  const VolterraSolution sol = solve_volterra(problem_c_const2(), opts);

  const EquilibriumControl eq = equilibrium_from_volterra(sol, vec1(1.0));
  for (std::size_t i = 0; i < eq.control.size(); i += 16) {
    CHECK(std::abs(eq.control[i](0) + 2.0 / 3.0) <= 1e-6);
  }

  const EquilibriumControl zero = equilibrium_from_volterra(sol, vec1(0.0));
  for (const auto& u : zero.control) CHECK(u.norm() == 0.0);
  for (const auto& x : zero.state) CHECK(x.norm() == 0.0);

  const EquilibriumControl twice = equilibrium_from_volterra(sol, vec1(2.0));
  for (std::size_t i = 0; i < eq.state.size(); ++i) {
    CHECK((twice.state[i] - 2.0 * eq.state[i]).norm() <= 1e-12);
    CHECK((twice.control[i] - 2.0 * eq.control[i]).norm() <= 1e-12);
  }
}

TEST_CASE("convergence study: constant coefficients show no mesh dependence") {
  const CoefficientSet c = testing::random_constant_problem(2, 1, 29u);
  VolterraOptions opts;
  opts.resolution = 96;
  opts.tol = 1e-10;
  const ConvergenceReport rep =
      convergence_study(c, {2, 4, 8}, (Vector(2) << 1.0, 0.5).finished(), 2e-3, opts);
  REQUIRE(rep.rows.size() == 3);
  for (const auto& row : rep.rows) {
    CHECK(row.sup_dist_P <= 1e-5);
    CHECK(row.max_jump <= 1e-10);
  }
}

TEST_CASE("convergence study: affine scalar weight converges at first order") {
  VolterraOptions opts;
  opts.resolution = 128;
  opts.tol = 1e-10;
  const ConvergenceReport rep =
      convergence_study(problem_c_affine(), {4, 8, 16, 32}, vec1(1.0), 1e-3, opts);
  REQUIRE(rep.rows.size() == 4);
  REQUIRE(rep.errors.empty());
  for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) {
    CHECK(rep.rows[i + 1].sup_dist_P < rep.rows[i].sup_dist_P);
  }
  for (std::size_t i = 0; i + 1 < rep.cauchy.size(); ++i) {
    CHECK(rep.cauchy[i + 1] < rep.cauchy[i]);
  }
  REQUIRE(rep.fitted_order.has_value());
  CHECK(*rep.fitted_order == doctest::Approx(1.0).epsilon(0.35));
  // cost gaps behave like K·mesh with a stable constant
  for (const auto& row : rep.rows) {
    CHECK(row.cost_gap_max <= 1.0 * row.mesh);
    CHECK(row.cost_gap_max >= -1e-9);
  }
}

TEST_CASE("convergence study: equi-boundedness of the jump-removed family") {
  // Each partition's paths stay below that partition's jump-free Lyapunov
  // bound (plus the jump absorbed into P̃), and the whole family shares a
  // fixed bound and a fixed Lipschitz surrogate.
  const CoefficientSet c = problem_c_affine();
  double slope_bound = 0.0;
  for (int N : {4, 8, 16}) {
    const Partition delta = build_uniform_partition(N, 1.0);
    const GameSolution sol = solve_game(c, delta, vec1(1.0), 1e-3);
    const LyapunovBounds lb = solve_lyapunov_bounds(c, delta, sol, 1e-3);
    double bound = 0.0;
    for (const auto& seg : lb.Pbar0) {
      for (const auto& v : seg.values) bound = std::max(bound, v.norm());
    }
    const JumpRemovedPath smooth = remove_jumps(sol.riccati);
    CHECK(smooth.max_norm() <= bound + sol.riccati.max_jump_norm() + 1e-6);
    CHECK(smooth.max_norm() <= 2.0 + 1e-6);  // P ≤ h ≤ 2 for this family
    slope_bound = std::max(slope_bound, smooth.max_slope());
  }
  CHECK(slope_bound <= 10.0);  // uniform Lipschitz surrogate for this family
}
