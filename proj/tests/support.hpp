#pragma once

// Shared test helpers: seeded random problems satisfying the standing
// assumptions (coercive R, PSD weights, nondecreasing-in-t Q, R, G).

#include "ticlq/problem.hpp"

#include <cstdint>
#include <random>

namespace ticlq::testing {

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = unif(rng);
  }
  return m;
}

inline Matrix random_psd(std::mt19937_64& rng, int dim, double shift) {
  const Matrix m = random_matrix(rng, dim, dim, 0.8);
  return Matrix(m * m.transpose() / dim + shift * Matrix::Identity(dim, dim));
}

/// Affine-in-(t,s) coefficients with PSD t-slopes on Q, R, G, so both (H1)
/// and (H2) hold by construction; R(t,s) ⪰ I.
inline CoefficientSet random_h2_problem(int n, int m, std::uint64_t seed, double T = 1.0) {
  std::mt19937_64 rng(seed);
  const Matrix A0 = random_matrix(rng, n, n, 0.8);
  const Matrix A1 = random_matrix(rng, n, n, 0.4);
  const Matrix A2 = random_matrix(rng, n, n, 0.4);
  const Matrix B0 = random_matrix(rng, n, m, 0.8);
  const Matrix B1 = random_matrix(rng, n, m, 0.4);
  const Matrix Q0 = random_psd(rng, n, 0.05);
  const Matrix Q1 = random_psd(rng, n, 0.05);
  const Matrix Q2 = random_psd(rng, n, 0.02);
  const Matrix R0 = random_psd(rng, m, 1.0);
  const Matrix R1 = random_psd(rng, m, 0.05);
  const Matrix G0 = random_psd(rng, n, 0.1);
  const Matrix G1 = random_psd(rng, n, 0.1);

  CoefficientSet c;
  c.n = n;
  c.m = m;
  c.T = T;
  c.A = [A0, A1, A2](double t, double s) { return Matrix(A0 + t * A1 + s * A2); };
  c.B = [B0, B1](double t, double) { return Matrix(B0 + t * B1); };
  c.Q = [Q0, Q1, Q2](double t, double s) { return Matrix(Q0 + t * Q1 + s * Q2); };
  c.R = [R0, R1](double t, double) { return Matrix(R0 + t * R1); };
  c.G = [G0, G1](double t) { return Matrix(G0 + t * G1); };
  return c;
}

/// Random constant-coefficient (time-consistent) problem with Q, G ⪰ 0 and
/// R ⪰ I.
inline CoefficientSet random_constant_problem(int n, int m, std::uint64_t seed, double T = 1.0) {
  std::mt19937_64 rng(seed);
  const Matrix A0 = random_matrix(rng, n, n, 0.8);
  const Matrix B0 = random_matrix(rng, n, m, 0.8);
  const Matrix Q0 = random_psd(rng, n, 0.0);
  const Matrix R0 = random_psd(rng, m, 1.0);
  const Matrix G0 = random_psd(rng, n, 0.0);
  return CoefficientSet::constant(A0, B0, Q0, R0, G0, T);
}

}  // namespace ticlq::testing
