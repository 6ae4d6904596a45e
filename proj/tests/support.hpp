#pragma once

#include "icrl/cmdp.hpp"

#include <random>

namespace icrl::testing {

/// Random row-stochastic (S*A) x S kernel; each row has at least one zero when S > 2.
inline Matrix random_kernel(std::mt19937_64& gen, int S, int A, bool sparse = true) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix p(S * A, S);
  for (int i = 0; i < S * A; ++i) {
    for (int j = 0; j < S; ++j) p(i, j) = (sparse && u(gen) < 0.4) ? 0.0 : u(gen);
    if (p.row(i).sum() == 0.0) p(i, static_cast<int>(u(gen) * S) % S) = 1.0;
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

inline Matrix random_matrix(std::mt19937_64& gen, int rows, int cols, double lo = 0.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = u(gen);
  }
  return m;
}

inline Matrix random_policy(std::mt19937_64& gen, int S, int A) {
  Matrix pi = random_matrix(gen, S, A, 0.01, 1.0);
  for (int s = 0; s < S; ++s) pi.row(s) /= pi.row(s).sum();
  return pi;
}

inline Vector random_distribution(std::mt19937_64& gen, int S) {
  Vector mu = random_matrix(gen, S, 1, 0.01, 1.0);
  return mu / mu.sum();
}

/// Cost matrix with roughly `density` of entries set to 1.
inline Matrix random_binary_cost(std::mt19937_64& gen, int S, int A, double density) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix c = Matrix::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) c(s, a) = u(gen) < density ? 1.0 : 0.0;
  }
  return c;
}

inline Cmdp random_cmdp(std::mt19937_64& gen, int S, int A, double gamma, double cost_density,
                        double budget = 0.0) {
  return Cmdp(random_kernel(gen, S, A), random_matrix(gen, S, A),
              random_binary_cost(gen, S, A, cost_density), budget, random_distribution(gen, S),
              gamma, 1.0, 1.0);
}

/// Kernel from a deterministic successor table next[s][a].
inline Matrix deterministic_kernel(const std::vector<std::vector<int>>& next) {
  const int S = static_cast<int>(next.size());
  const int A = static_cast<int>(next.front().size());
  Matrix p = Matrix::Zero(S * A, S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) p(s * A + a, next[s][a]) = 1.0;
  }
  return p;
}

inline Vector delta_at(int S, int s) {
  Vector mu = Vector::Zero(S);
  mu(s) = 1.0;
  return mu;
}

}  // namespace icrl::testing
