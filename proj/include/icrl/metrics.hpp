#pragma once

#include "icrl/envs.hpp"
#include "icrl/estimation.hpp"

#include <string>
#include <string_view>

namespace icrl {

enum class Signal { reward, cost };

/// sum_t gamma^t g_t over the recorded steps.
double discounted_return(const EpisodeRecord& episode, double gamma, Signal signal);

/// 0.2 prev + 0.8 current
inline double running_score(double prev, double current) { return 0.2 * prev + 0.8 * current; }

/// How the pairing <c_hat*, c*> inside the WGIoU denominator is read.
enum class WgiouVariant {
  hadamard,  ///< elementwise product, summed in the numerator
  scalar,    ///< full inner product, broadcast into the elementwise max
};

/**
 * Weighted generalised IoU between a recovered and a true cost, in [-1, 1].
 *
 * Both matrices are divided by the smaller of their smallest positive
 * entries (only by c's when c_hat is all zero). Entries must be
 * non-negative; a c_true without positive entries is rejected.
 */
double wgiou(const Matrix& c_hat, const Matrix& c_true,
             WgiouVariant variant = WgiouVariant::hadamard);

struct PacReport {
  double completeness = 0.0;
  double accuracy = 0.0;
  bool satisfied = false;  ///< both errors <= target
};

PacReport pac_report(const Matrix& c_true, const Matrix& c_hat, const Cmdp& cmdp,
                     const EstimatedProblem& est, double target_eps);

struct MetricRow {
  int k = 0;
  std::int64_t samples = 0;
  double eps_k = 0.0;
  double disc_reward = 0.0;
  double disc_cost = 0.0;
  double wgiou = 0.0;
  double running_reward = 0.0;
  double running_cost = 0.0;
};

inline constexpr std::string_view kMetricsHeader =
    "k,samples,eps_k,disc_reward,disc_cost,wgiou,running_reward,running_cost,strategy,seed";

/// One CSV line (no newline), decimals at 17 significant digits.
std::string format_metric_row(const MetricRow& row, std::string_view strategy, std::uint64_t seed);

}  // namespace icrl
