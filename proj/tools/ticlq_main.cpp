// Command-line runner: loads a problem-definition file, dispatches one of
// the solver commands, and writes deterministic CSV results plus a key=value
// summary into the output directory.
//
// Exit codes: 0 success, 2 configuration/parse error, 3 solver failure,
// 4 fixed-point non-convergence.

#include <CLI11.hpp>

#include "ticlq/problem_io.hpp"
#include "ticlq/report.hpp"
#include "ticlq/ticlq.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace ticlq;

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    out.push_back(std::stod(cell));
  }
  return out;
}

std::vector<int> parse_csv_ints(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_csv_doubles(text)) out.push_back(static_cast<int>(v));
  return out;
}

std::string pad_index(int k, int max_value) {
  int width = 1;
  for (int v = max_value; v >= 10; v /= 10) ++width;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%0*d", width, k);
  return buf;
}

struct Config {
  std::string problem_path;
  std::string command;
  int n = 0;
  std::vector<int> n_list;
  double step = 0.0;
  double tol = 1e-10;
  int max_iter = 200;
  std::vector<double> x;
  double t = 0.0;
  double tau = 0.5;
  std::uint64_t seed = 42;
  int trials = 100;
  std::string out_dir = "out";

  std::string out_file(const std::string& name) const {
    return (std::filesystem::path(out_dir) / name).string();
  }
};

Vector initial_state(const Config& cfg, int n) {
  if (cfg.x.empty()) return Vector::Ones(n);
  if (static_cast<int>(cfg.x.size()) != n) {
    throw std::invalid_argument("--x must have state_dim entries");
  }
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = cfg.x[static_cast<std::size_t>(i)];
  return v;
}

std::vector<std::string> matrix_header(const std::string& prefix, int n) {
  std::vector<std::string> cols;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      cols.push_back(prefix + "_" + std::to_string(i) + "_" + std::to_string(j));
    }
  }
  return cols;
}

void append_upper(std::vector<double>& row, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i; j < m.cols(); ++j) row.push_back(m(i, j));
  }
}

void put_upper(Summary& s, const std::string& prefix, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i; j < m.cols(); ++j) {
      s.put(prefix + "_" + std::to_string(i) + "_" + std::to_string(j), m(i, j));
    }
  }
}

void put_assumptions(Summary& s, const AssumptionReport& rep) {
  s.put("h1_psd_ok", rep.h1_psd_ok);
  s.put("h1_r_delta", rep.h1_r_delta);
  s.put("h1_lipschitz_estimate", rep.h1_lipschitz_estimate);
  s.put("h2_g_ok", rep.h2_g_ok);
  s.put("h2_q_ok", rep.h2_q_ok);
  s.put("h2_r_ok", rep.h2_r_ok);
  s.put("h2_monotone_ok", rep.h2_monotone_ok());
  s.put("sample_count", rep.sample_count);
  s.put("violation_count", static_cast<long>(rep.violations.size()));
}

AssumptionReport require_h1(const CoefficientSet& coeffs) {
  const AssumptionReport rep = check_assumptions(coeffs, 15);
  if (!rep.h1_ok()) {
    std::string detail = rep.violations.empty() ? "R is not coercive" : rep.violations.front();
    throw SolverError("assumption (H1) fails on samples: " + detail);
  }
  return rep;
}

void write_riccati_csv(const std::string& file, const PiecewiseRiccatiSolution& riccati, int n) {
  std::vector<std::string> header{"t"};
  for (const auto& c : matrix_header("P", n)) header.push_back(c);
  header.push_back("jump_flag");
  CsvWriter csv(file, header);
  const int N = riccati.delta.segments();
  for (int j = 0; j < N; ++j) {
    const MatrixPath& seg = riccati.P[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < seg.values.size(); ++i) {
      std::vector<double> row{seg.grid.point(i)};
      append_upper(row, seg.values[i]);
      const bool at_left_knot = (i == 0 && j > 0);
      const bool at_right_knot = (i + 1 == seg.values.size() && j + 1 < N);
      row.push_back((at_left_knot || at_right_knot) ? 1.0 : 0.0);
      csv.row(row);
    }
  }
}

void write_trajectory_csv(const std::string& file, const EquilibriumPair& eq, int n, int m) {
  const int N = eq.delta.segments();
  std::vector<std::string> header{"s"};
  for (int i = 0; i < n; ++i) header.push_back("x_" + std::to_string(i));
  for (int i = 0; i < m; ++i) header.push_back("u_" + std::to_string(i));
  for (int k = 1; k <= N; ++k) header.push_back("J_" + std::to_string(k));
  CsvWriter csv(file, header);
  for (int j = 0; j < N; ++j) {
    const auto& xs = eq.state[static_cast<std::size_t>(j)];
    const auto& us = eq.control[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < xs.values.size(); ++i) {
      if (j > 0 && i == 0) continue;  // interior knots appear once
      std::vector<double> row{xs.grid.point(i)};
      for (int d = 0; d < n; ++d) row.push_back(xs.values[i](d));
      for (int d = 0; d < m; ++d) row.push_back(us.values[i](d));
      for (double jk : eq.costs) row.push_back(jk);
      csv.row(row);
    }
  }
}

void write_margins_csv(const std::string& file, const Partition& delta,
                       const DeviationReport& rep) {
  CsvWriter csv(file, {"k", "t_start", "baseline_cost", "min_margin"});
  for (std::size_t p = 0; p < rep.min_margin_player.size(); ++p) {
    csv.row({static_cast<double>(p + 1), delta.knot(static_cast<int>(p)),
             rep.baseline_costs[p], rep.min_margin_player[p]});
  }
}

Summary cmd_check(const Config& cfg, const ParsedProblem& problem) {
  const int density = cfg.n > 0 ? cfg.n : 21;
  const AssumptionReport rep = check_assumptions(problem.coeffs, density);
  Summary s;
  s.put("command", cfg.command);
  s.put("density", density);
  put_assumptions(s, rep);
  const std::size_t shown = std::min<std::size_t>(rep.violations.size(), 5);
  for (std::size_t i = 0; i < shown; ++i) {
    s.put("violation_" + std::to_string(i), rep.violations[i]);
  }
  return s;
}

Summary cmd_solve_game(const Config& cfg, const ParsedProblem& problem) {
  const CoefficientSet& coeffs = problem.coeffs;
  const int N = cfg.n > 0 ? cfg.n : 8;
  const Partition delta = build_uniform_partition(N, coeffs.T);
  const Vector x0 = initial_state(cfg, coeffs.n);
  const AssumptionReport assumptions = require_h1(coeffs);

  const GameSolution game = solve_game(coeffs, delta, x0, cfg.step);
  const LyapunovBounds bounds = solve_lyapunov_bounds(coeffs, delta, game, cfg.step);
  const DeviationReport margins =
      verify_equilibrium(coeffs, delta, game, cfg.trials, cfg.seed, cfg.step);

  write_riccati_csv(cfg.out_file("riccati.csv"), game.riccati, coeffs.n);
  write_trajectory_csv(cfg.out_file("trajectory.csv"), game.equilibrium, coeffs.n, coeffs.m);
  write_margins_csv(cfg.out_file("margins.csv"), delta, margins);

  double min_eig_p = std::numeric_limits<double>::infinity();
  double min_eig_p0_p = min_eig_p, min_eig_pbar_p0 = min_eig_p;
  for (int j = 0; j < N; ++j) {
    const auto& pj = game.riccati.P[static_cast<std::size_t>(j)].values;
    const auto& p0j = bounds.P0[static_cast<std::size_t>(j)].values;
    const auto& pbj = bounds.Pbar0[static_cast<std::size_t>(j)].values;
    for (std::size_t i = 0; i < pj.size(); ++i) {
      min_eig_p = std::min(min_eig_p, min_eigenvalue(pj[i]));
      min_eig_p0_p = std::min(min_eig_p0_p, min_eigenvalue(p0j[i] - pj[i]));
      min_eig_pbar_p0 = std::min(min_eig_pbar_p0, min_eigenvalue(pbj[i] - p0j[i]));
    }
  }

  Summary s;
  s.put("command", cfg.command);
  s.put("n", N);
  s.put("step", detail::default_step(coeffs.T, cfg.step));
  s.put("seed", static_cast<long>(cfg.seed));
  s.put("trials", cfg.trials);
  put_assumptions(s, assumptions);
  put_upper(s, "P0", game.riccati.P[0].values.front());
  for (int d = 0; d < coeffs.m; ++d) {
    s.put("u0_" + std::to_string(d), game.equilibrium.control[0].values.front()(d));
  }
  s.put("max_jump", game.riccati.max_jump_norm());
  s.put("jump_rate", game.riccati.jump_rate());
  s.put("min_eig_P", min_eig_p);
  s.put("min_eig_P0_minus_P", min_eig_p0_p);
  s.put("min_eig_Pbar0_minus_P0", min_eig_pbar_p0);
  if (!game.riccati.jumps.empty()) {
    double w = std::numeric_limits<double>::infinity();
    for (const auto& j : game.riccati.jumps) w = std::min(w, min_eigenvalue(j));
    s.put("min_eig_jumps", w);
  }
  for (int k = 1; k <= N; ++k) {
    s.put("J_" + pad_index(k, N), game.equilibrium.costs[static_cast<std::size_t>(k - 1)]);
    s.put("min_margin_" + pad_index(k, N),
          margins.min_margin_player[static_cast<std::size_t>(k - 1)]);
  }
  s.put("min_margin", margins.min_margin);
  s.put("equilibrium_ok", margins.pass(1e-8));
  return s;
}

Summary cmd_solve_limit(const Config& cfg, const ParsedProblem& problem) {
  const CoefficientSet& coeffs = problem.coeffs;
  require_h1(coeffs);
  VolterraOptions opts;
  opts.resolution = cfg.n > 0 ? cfg.n : 256;
  opts.tol = cfg.tol;
  opts.max_iter = cfg.max_iter;
  opts.init = VolterraInit::Game;
  opts.init_game_step = cfg.step;
  const VolterraSolution vol = solve_volterra(coeffs, opts);
  const EquilibriumControl eq = equilibrium_from_volterra(vol, initial_state(cfg, coeffs.n));

  {
    std::vector<std::string> header{"t"};
    for (const auto& c : matrix_header("P", coeffs.n)) header.push_back(c);
    header.push_back("residual");
    CsvWriter csv(cfg.out_file("volterra.csv"), header);
    for (int i = 0; i <= vol.resolution; ++i) {
      std::vector<double> row{vol.anchor(i)};
      append_upper(row, vol.P[static_cast<std::size_t>(i)]);
      row.push_back(vol.residual);
      csv.row(row);
    }
  }
  {
    std::vector<std::string> header{"s"};
    for (int i = 0; i < coeffs.n; ++i) header.push_back("x_" + std::to_string(i));
    for (int i = 0; i < coeffs.m; ++i) header.push_back("u_" + std::to_string(i));
    CsvWriter csv(cfg.out_file("equilibrium.csv"), header);
    for (int i = 0; i <= vol.resolution; ++i) {
      std::vector<double> row{vol.anchor(i)};
      for (int d = 0; d < coeffs.n; ++d) row.push_back(eq.state[static_cast<std::size_t>(i)](d));
      for (int d = 0; d < coeffs.m; ++d) {
        row.push_back(eq.control[static_cast<std::size_t>(i)](d));
      }
      csv.row(row);
    }
  }

  Summary s;
  s.put("command", cfg.command);
  s.put("resolution", vol.resolution);
  s.put("tol", cfg.tol);
  s.put("max_iter", cfg.max_iter);
  s.put("iterations", vol.iterations);
  s.put("residual", vol.residual);
  s.put("self_consistency", vol.self_consistency);
  put_upper(s, "P0", vol.P[0]);
  for (int d = 0; d < coeffs.m; ++d) s.put("u0_" + std::to_string(d), eq.control[0](d));
  return s;
}

Summary cmd_convergence(const Config& cfg, const ParsedProblem& problem) {
  const CoefficientSet& coeffs = problem.coeffs;
  if (cfg.n_list.empty()) throw std::invalid_argument("--n-list is required for convergence");
  require_h1(coeffs);
  VolterraOptions opts;
  opts.resolution = cfg.n > 0 ? cfg.n : 256;
  opts.tol = cfg.tol;
  opts.max_iter = cfg.max_iter;
  const ConvergenceReport rep = convergence_study(coeffs, cfg.n_list,
                                                  initial_state(cfg, coeffs.n), cfg.step, opts);

  CsvWriter csv(cfg.out_file("convergence.csv"),
                {"N", "mesh", "sup_dist_P", "max_jump", "cost_gap_max", "fitted_order"});
  for (const auto& row : rep.rows) {
    std::vector<std::string> cells{std::to_string(row.segments), format_double(row.mesh),
                                   format_double(row.sup_dist_P), format_double(row.max_jump),
                                   format_double(row.cost_gap_max)};
    cells.push_back(rep.fitted_order ? format_double(*rep.fitted_order) : "n/a");
    csv.row(cells);
  }

  Summary s;
  s.put("command", cfg.command);
  s.put("resolution", opts.resolution);
  if (rep.fitted_order) {
    s.put("fitted_order", *rep.fitted_order);
  } else {
    s.put("fitted_order", "n/a");
  }
  const int max_n = rep.rows.empty() ? 0 : rep.rows.back().segments;
  for (const auto& row : rep.rows) {
    const std::string tag = pad_index(row.segments, max_n);
    s.put("sup_dist_P_n" + tag, row.sup_dist_P);
    s.put("sup_dist_P_tilde_n" + tag, row.sup_dist_P_tilde);
    s.put("max_jump_n" + tag, row.max_jump);
    s.put("cost_gap_max_n" + tag, row.cost_gap_max);
  }
  for (std::size_t i = 0; i < rep.cauchy.size(); ++i) {
    s.put("cauchy_" + std::to_string(i), rep.cauchy[i]);
  }
  for (std::size_t i = 0; i < rep.errors.size(); ++i) {
    s.put("error_" + std::to_string(i), rep.errors[i]);
  }
  s.put("volterra_residual", rep.limit.residual);
  s.put("volterra_iterations", rep.limit.iterations);
  return s;
}

Summary cmd_gap(const Config& cfg, const ParsedProblem& problem) {
  if (!problem.is_problem_c || !problem.coeffs.scalar_terminal_weight) {
    throw std::invalid_argument("gap requires problem_c");
  }
  const oracles::ScalarProblemC pc{problem.coeffs.T, *problem.coeffs.scalar_terminal_weight};
  const double x = cfg.x.empty() ? 1.0 : cfg.x.front();
  const oracles::GapResult closed = oracles::inconsistency_gap(pc, cfg.t, cfg.tau, x);
  const double sim = oracles::simulated_gap(pc, cfg.t, cfg.tau, x,
                                            cfg.step > 0.0 ? cfg.step : 1e-4);
  Summary s;
  s.put("command", cfg.command);
  s.put("t", cfg.t);
  s.put("tau", cfg.tau);
  s.put("x", x);
  s.put("gap_closed_form", closed.gap);
  s.put("gap_simulated", sim);
  s.put("gap_abs_diff", std::abs(closed.gap - sim));
  s.put("pre_committed_cost", closed.pre_committed_cost);
  s.put("reoptimized_value", closed.reoptimized_value);
  return s;
}

Summary cmd_verify_equilibrium(const Config& cfg, const ParsedProblem& problem) {
  const CoefficientSet& coeffs = problem.coeffs;
  const int N = cfg.n > 0 ? cfg.n : 8;
  const Partition delta = build_uniform_partition(N, coeffs.T);
  require_h1(coeffs);
  const GameSolution game = solve_game(coeffs, delta, initial_state(cfg, coeffs.n), cfg.step);
  const DeviationReport margins =
      verify_equilibrium(coeffs, delta, game, cfg.trials, cfg.seed, cfg.step);
  write_margins_csv(cfg.out_file("margins.csv"), delta, margins);

  Summary s;
  s.put("command", cfg.command);
  s.put("n", N);
  s.put("seed", static_cast<long>(cfg.seed));
  s.put("trials", cfg.trials);
  for (int k = 1; k <= N; ++k) {
    s.put("min_margin_" + pad_index(k, N),
          margins.min_margin_player[static_cast<std::size_t>(k - 1)]);
  }
  s.put("min_margin", margins.min_margin);
  s.put("equilibrium_ok", margins.pass(1e-8));
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Solvers for the N-player discretization of time-inconsistent LQ control"};
  Config cfg;
  std::string n_list_str, x_str;

  app.add_option("--problem", cfg.problem_path, "problem-definition file (JSON)")->required();
  app.add_option("--command", cfg.command, "what to run")
      ->required()
      ->check(CLI::IsMember(
          {"check", "solve-game", "solve-limit", "convergence", "gap", "verify-equilibrium"}));
  app.add_option("--n", cfg.n, "partition segments / grid resolution / sample density");
  app.add_option("--n-list", n_list_str, "comma-separated segment counts for convergence");
  app.add_option("--step", cfg.step, "integration step (default horizon/2000)");
  app.add_option("--tol", cfg.tol, "fixed-point tolerance");
  app.add_option("--max-iter", cfg.max_iter, "fixed-point iteration cap");
  app.add_option("--x", x_str, "initial state, comma-separated");
  app.add_option("--t", cfg.t, "commitment time for gap");
  app.add_option("--tau", cfg.tau, "re-evaluation time for gap");
  app.add_option("--seed", cfg.seed, "random seed for deviation trials");
  app.add_option("--trials", cfg.trials, "deviation trials per player");
  app.add_option("--out", cfg.out_dir, "output directory");

  try {
    app.parse(argc, argv);
    cfg.n_list = parse_csv_ints(n_list_str);
    cfg.x = parse_csv_doubles(x_str);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  const auto started = std::chrono::steady_clock::now();
  try {
    const ParsedProblem problem = load_problem(cfg.problem_path);
    std::filesystem::create_directories(cfg.out_dir);

    Summary summary;
    if (cfg.command == "check") {
      summary = cmd_check(cfg, problem);
    } else if (cfg.command == "solve-game") {
      summary = cmd_solve_game(cfg, problem);
    } else if (cfg.command == "solve-limit") {
      summary = cmd_solve_limit(cfg, problem);
    } else if (cfg.command == "convergence") {
      summary = cmd_convergence(cfg, problem);
    } else if (cfg.command == "gap") {
      summary = cmd_gap(cfg, problem);
    } else {
      summary = cmd_verify_equilibrium(cfg, problem);
    }
    summary.put("problem", cfg.problem_path);
    summary.write(cfg.out_file("summary.txt"));
    std::cout << summary.text();

    const auto elapsed = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - started);
    std::fprintf(stderr, "%s completed in %.3f s\n", cfg.command.c_str(), elapsed.count());
    return 0;
  } catch (const ProblemParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (std::size_t i = 0; i < e.residual_history.size(); ++i) {
      std::fprintf(stderr, "  residual[%zu] = %.6g\n", i, e.residual_history[i]);
    }
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
