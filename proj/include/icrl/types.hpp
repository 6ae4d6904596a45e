#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace icrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Boolean state-action table; `true` marks a forbidden pair.
using ActionMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Integer counter tables.
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// Transition kernels are stored as (S*A) x S matrices; row s*A + a holds P(.|s,a).
inline Eigen::Index sa_index(Eigen::Index s, Eigen::Index a, Eigen::Index n_actions) {
  return s * n_actions + a;
}

/// One observed transition (s, a, s').
struct Transition {
  int s;
  int a;
  int next;
};

/// One expert action a_E observed at state s.
struct ExpertObservation {
  int s;
  int a;
};

}  // namespace icrl
