#pragma once

// Continuation-ratio logits kernel: parameter maps, log-space kernel
// evaluation and the correspondence with the cumulative logit model.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crlmix {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Logistic helpers
// ---------------------------------------------------------------------------

/// Standard logistic function, stable for any finite argument.
inline double logistic(double t) noexcept {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(logistic(t)) without overflow or premature underflow.
inline double log_logistic(double t) noexcept {
  if (t >= 0.0) {
    return -std::log1p(std::exp(-t));
  }
  return t - std::log1p(std::exp(t));
}

/// log(1 - logistic(t)) == log_logistic(-t).
inline double log1m_logistic(double t) noexcept { return log_logistic(-t); }

inline double logit(double u) { return std::log(u) - std::log1p(-u); }

/// Numerically stable log(exp(a) + exp(b) + ...).
inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) {
    return -std::numeric_limits<double>::infinity();
  }
  double m = v[0];
  for (double x : v) {
    m = std::max(m, x);
  }
  if (!std::isfinite(m)) {
    return m;
  }
  double s = 0.0;
  for (double x : v) {
    s += std::exp(x - m);
  }
  return m + std::log(s);
}

// ---------------------------------------------------------------------------
// Strong types
// ---------------------------------------------------------------------------

/// Continuation-ratio logits theta_1..theta_{C-1}.
struct CrlTheta {
  VectorXd theta;

  CrlTheta() = default;
  explicit CrlTheta(VectorXd t) : theta(std::move(t)) {}

  [[nodiscard]] int categories() const noexcept { return static_cast<int>(theta.size()) + 1; }
};

/// Category probabilities pi_1..pi_C.
struct CategoryProbs {
  VectorXd pi;

  CategoryProbs() = default;
  explicit CategoryProbs(VectorXd p) : pi(std::move(p)) {}

  [[nodiscard]] int categories() const noexcept { return static_cast<int>(pi.size()); }
};

/// Cumulative logit parameters. Pr(Y <= j) = logistic(kappa_j - location)
/// with kappa_1 = 0; `kappa` stores kappa_2..kappa_{C-1}.
struct CumLogitParams {
  double location = 0.0;
  VectorXd kappa;

  /// Cut-off kappa_j for 1-based j in 1..C-1.
  [[nodiscard]] double cut(int j) const { return j == 1 ? 0.0 : kappa(j - 2); }
};

inline void require_finite(const VectorXd& v, const char* what) {
  for (Index k = 0; k < v.size(); ++k) {
    if (!std::isfinite(v(k))) {
      throw std::invalid_argument(std::string(what) + ": non-finite entry at index " +
                                  std::to_string(k));
    }
  }
}

// ---------------------------------------------------------------------------
// Parameter maps
// ---------------------------------------------------------------------------

/// pi_1 = phi(theta_1), pi_j = phi(theta_j) prod_{k<j} (1 - phi(theta_k)),
/// pi_C = prod_{k<C} (1 - phi(theta_k)).
inline CategoryProbs theta_to_pi(const CrlTheta& theta) {
  if (theta.theta.size() < 1) {
    throw std::invalid_argument("theta_to_pi: need at least one logit (C >= 2)");
  }
  require_finite(theta.theta, "theta_to_pi");
  const Index cm1 = theta.theta.size();
  VectorXd pi(cm1 + 1);
  double survive = 1.0;
  for (Index j = 0; j < cm1; ++j) {
    const double t = theta.theta(j);
    pi(j) = survive * logistic(t);
    survive *= logistic(-t);
  }
  pi(cm1) = survive;
  return CategoryProbs{std::move(pi)};
}

/// Inverse of theta_to_pi: theta_j = logit(pi_j / sum_{k>=j} pi_k).
inline CrlTheta pi_to_theta(const CategoryProbs& probs) {
  const VectorXd& pi = probs.pi;
  const Index c = pi.size();
  if (c < 2) {
    throw std::invalid_argument("pi_to_theta: need at least two categories");
  }
  for (Index j = 0; j < c; ++j) {
    if (!(pi(j) > 0.0 && pi(j) < 1.0)) {
      throw std::domain_error("pi_to_theta: pi_" + std::to_string(j + 1) +
                              " must lie strictly inside (0,1)");
    }
  }
  // Tail sums from the right keep precision for small trailing masses.
  VectorXd tail(c);
  tail(c - 1) = pi(c - 1);
  for (Index j = c - 2; j >= 0; --j) {
    tail(j) = tail(j + 1) + pi(j);
  }
  VectorXd theta(c - 1);
  for (Index j = 0; j + 1 < c; ++j) {
    const double rest = tail(j + 1);
    if (!(rest > 0.0)) {
      throw std::domain_error("pi_to_theta: partial sum reaches 1 at category " +
                              std::to_string(j + 1));
    }
    theta(j) = std::log(pi(j)) - std::log(rest);
  }
  return CrlTheta{std::move(theta)};
}

/// log pi_y for 1-based category y, accumulated from log-sigmoid terms.
inline double kernel_log_pmf(int y, const CrlTheta& theta) {
  const int c = theta.categories();
  if (y < 1 || y > c) {
    throw std::invalid_argument("kernel_log_pmf: category " + std::to_string(y) +
                                " outside 1.." + std::to_string(c));
  }
  double lp = 0.0;
  for (int k = 0; k < y - 1; ++k) {
    lp += log1m_logistic(theta.theta(k));
  }
  if (y < c) {
    lp += log_logistic(theta.theta(y - 1));
  }
  return lp;
}

/// Cumulative logit parameters with the same category probabilities.
inline CumLogitParams crl_to_cumlogit(const CrlTheta& theta) {
  if (theta.theta.size() < 1) {
    throw std::invalid_argument("crl_to_cumlogit: need at least one logit (C >= 2)");
  }
  const VectorXd& t = theta.theta;
  const Index cm1 = t.size();
  CumLogitParams out;
  out.location = -t(0);
  out.kappa.resize(std::max<Index>(cm1 - 1, 0));
  double prev = 0.0;
  for (Index j = 1; j < cm1; ++j) {
    const double terms[3] = {prev, prev + t(j), t(j) - t(0)};
    prev = log_sum_exp(terms);
    out.kappa(j - 1) = prev;
  }
  return out;
}

/// Category probabilities implied by a cumulative logit model.
inline CategoryProbs cumlogit_to_pi(const CumLogitParams& params) {
  const Index cm1 = params.kappa.size() + 1;
  VectorXd pi(cm1 + 1);
  double below = 0.0;
  for (Index j = 0; j < cm1; ++j) {
    const double cdf = logistic(params.cut(static_cast<int>(j) + 1) - params.location);
    pi(j) = cdf - below;
    below = cdf;
  }
  // 1 - F(kappa_{C-1}) computed directly avoids cancellation.
  pi(cm1) = logistic(params.location - params.cut(static_cast<int>(cm1)));
  return CategoryProbs{std::move(pi)};
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// n ordinal responses in 1..C with an n x p design whose first column is 1.
/// The binary expansion Y_ij and at-risk masses m_ij are derived from y.
class OrdinalDataset {
public:
  OrdinalDataset(std::vector<int> y, MatrixXd x, int categories)
      : y_(std::move(y)), x_(std::move(x)), c_(categories) {
    if (c_ < 2) {
      throw std::invalid_argument("OrdinalDataset: need C >= 2 categories");
    }
    if (x_.cols() < 1) {
      throw std::invalid_argument("OrdinalDataset: design needs an intercept column");
    }
    if (static_cast<Index>(y_.size()) != x_.rows()) {
      throw std::invalid_argument("OrdinalDataset: " + std::to_string(y_.size()) +
                                  " responses but " + std::to_string(x_.rows()) +
                                  " design rows");
    }
    for (std::size_t i = 0; i < y_.size(); ++i) {
      if (y_[i] < 1 || y_[i] > c_) {
        throw std::invalid_argument("OrdinalDataset: y[" + std::to_string(i) + "] = " +
                                    std::to_string(y_[i]) + " outside 1.." +
                                    std::to_string(c_));
      }
      if (x_(static_cast<Index>(i), 0) != 1.0) {
        throw std::invalid_argument("OrdinalDataset: design column 0 must be 1 (row " +
                                    std::to_string(i) + ")");
      }
    }
  }

  /// Zero-observation dataset for prior-only runs.
  static OrdinalDataset empty(int categories, int p) {
    return OrdinalDataset({}, MatrixXd(0, p), categories);
  }

  [[nodiscard]] Index n() const noexcept { return x_.rows(); }
  [[nodiscard]] int p() const noexcept { return static_cast<int>(x_.cols()); }
  [[nodiscard]] int categories() const noexcept { return c_; }
  [[nodiscard]] const std::vector<int>& y() const noexcept { return y_; }
  [[nodiscard]] const MatrixXd& x() const noexcept { return x_; }
  [[nodiscard]] auto row(Index i) const { return x_.row(i); }

  /// Y_ij for 0-based j in 0..C-1.
  [[nodiscard]] int indicator(Index i, int j) const noexcept { return y_[i] == j + 1 ? 1 : 0; }
  /// m_ij for 0-based j in 0..C-2: 1 while observation i is still at risk.
  [[nodiscard]] int at_risk(Index i, int j) const noexcept { return y_[i] >= j + 1 ? 1 : 0; }

private:
  std::vector<int> y_;
  MatrixXd x_;
  int c_;
};

} // namespace crlmix
