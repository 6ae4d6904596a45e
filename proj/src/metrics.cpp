#include "icrl/metrics.hpp"

#include "icrl/matrix_io.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace icrl {

double discounted_return(const EpisodeRecord& episode, double gamma, Signal signal) {
  double total = 0.0;
  double discount = 1.0;
  for (const Step& st : episode.steps) {
    total += discount * (signal == Signal::reward ? st.r : st.c);
    discount *= gamma;
  }
  return total;
}

namespace {

std::optional<double> min_positive(const Matrix& x) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    if (v < 0.0 || !std::isfinite(v)) {
      throw std::invalid_argument("wgiou: entries must be finite and non-negative");
    }
    if (v > 0.0 && v < best) best = v;
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

}  // namespace

double wgiou(const Matrix& c_hat, const Matrix& c_true, WgiouVariant variant) {
  if (c_hat.rows() != c_true.rows() || c_hat.cols() != c_true.cols()) {
    throw std::invalid_argument("wgiou: shape mismatch");
  }
  const auto m_true = min_positive(c_true);
  const auto m_hat = min_positive(c_hat);
  if (!m_true) throw std::invalid_argument("wgiou: true cost has no positive entry");
  const double scale = m_hat ? std::min(*m_hat, *m_true) : *m_true;
  const Eigen::ArrayXXd a = c_hat.array() / scale;
  const Eigen::ArrayXXd b = c_true.array() / scale;
  const Eigen::ArrayXXd prod = a * b;
  const double inner = prod.sum();

  double denom = 0.0;
  if (variant == WgiouVariant::hadamard) {
    denom = a.max(b).max(prod).sum();
  } else {
    denom = a.max(b).max(inner).sum();
  }
  const double overlap = inner > 0.0 ? inner / denom : 0.0;
  const double penalty = inner == 0.0 ? std::exp(-a.max(b).sum()) - 1.0 : 0.0;
  return overlap + penalty;
}

PacReport pac_report(const Matrix& c_true, const Matrix& c_hat, const Cmdp& cmdp,
                     const EstimatedProblem& est, double target_eps) {
  const PacError err = pac_error(c_true, c_hat, cmdp, est);
  return PacReport{err.completeness, err.accuracy,
                   err.completeness <= target_eps && err.accuracy <= target_eps};
}

std::string format_metric_row(const MetricRow& row, std::string_view strategy,
                              std::uint64_t seed) {
  std::string out;
  out += std::to_string(row.k);
  out += ',';
  out += std::to_string(row.samples);
  for (double v : {row.eps_k, row.disc_reward, row.disc_cost, row.wgiou, row.running_reward,
                   row.running_cost}) {
    out += ',';
    out += format_double(v);
  }
  out += ',';
  out += strategy;
  out += ',';
  out += std::to_string(seed);
  return out;
}

}  // namespace icrl
