#pragma once

// Random variates used by the samplers: Polya-Gamma, Gaussian (moment and
// precision forms), inverse-Wishart, Gamma/Beta, and logit-normal
// expectations.

#include "crlmix/core.hpp"
#include "crlmix/errors.hpp"
#include "crlmix/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace crlmix {

// ---------------------------------------------------------------------------
// Scalar variates
// ---------------------------------------------------------------------------

inline double std_normal(RngStream& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double std_exponential(RngStream& rng) { return -std::log(rng.uniform()); }

/// Gamma(shape, rate).
inline double sample_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("sample_gamma: shape and rate must be positive");
  }
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

/// Inverse-gamma IG(shape, scale): 1/X with X ~ Gamma(shape, rate = scale).
inline double sample_inverse_gamma(double shape, double scale, RngStream& rng) {
  return 1.0 / sample_gamma(shape, scale, rng);
}

inline double sample_beta(double a, double b, RngStream& rng) {
  const double x = sample_gamma(a, 1.0, rng);
  const double y = sample_gamma(b, 1.0, rng);
  return x / (x + y);
}

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

namespace detail {

/// log Phi(z), accurate in the far left tail.
inline double log_std_normal_cdf(double z) {
  if (z > -30.0) {
    return std::log(std_normal_cdf(z));
  }
  // Mills-ratio asymptotic expansion.
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

constexpr double kPgTrunc = 0.64;

/// Terms of the alternating series for the Jacobi density J*(1, z).
inline double pg_series_term(double x, int n) {
  const double k = n + 0.5;
  if (x > kPgTrunc) {
    return std::numbers::pi * k * std::exp(-0.5 * k * k * std::numbers::pi * std::numbers::pi * x);
  }
  return std::pow(2.0 / (std::numbers::pi * x), 1.5) * std::numbers::pi * k *
         std::exp(-2.0 * k * k / x);
}

/// P(X < t) for the inverse Gaussian IG(mean = 1/z, shape = 1).
inline double log_inv_gauss_cdf_trunc(double z, double t) {
  const double rt = 1.0 / std::sqrt(t);
  const double b = rt * (t * z - 1.0);
  const double a = -rt * (t * z + 1.0);
  const double first = std::log(std_normal_cdf(b));
  const double second = 2.0 * z + log_std_normal_cdf(a);
  const double hi = std::max(first, second);
  return hi + std::log(std::exp(first - hi) + std::exp(second - hi));
}

/// Inverse Gaussian with mean 1/z, shape 1, truncated to (0, t).
inline double sample_trunc_inv_gauss(double z, double t, RngStream& rng) {
  double x = t + 1.0;
  if (1.0 / z > t) {
    // Mean beyond the truncation point: scaled inverse-chi-square proposal.
    double alpha = 0.0;
    while (rng.uniform() > alpha) {
      double e1 = 0.0;
      double e2 = 0.0;
      do {
        e1 = std_exponential(rng);
        e2 = std_exponential(rng);
      } while (e1 * e1 > 2.0 * e2 / t);
      x = t / ((1.0 + t * e1) * (1.0 + t * e1));
      alpha = std::exp(-0.5 * z * z * x);
    }
    return x;
  }
  const double mu = 1.0 / z;
  while (x >= t) {
    const double g = std_normal(rng);
    const double y = g * g;
    const double mu_y = mu * y;
    x = mu + 0.5 * mu * mu_y - 0.5 * mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
    if (rng.uniform() > mu / (mu + x)) {
      x = mu * mu / x;
    }
  }
  return x;
}

/// Exact PG(1, c) draw by Devroye's alternating-series rejection sampler.
inline double sample_pg1(double c, RngStream& rng) {
  const double z = 0.5 * std::fabs(c);
  const double t = kPgTrunc;
  const double k = std::numbers::pi * std::numbers::pi / 8.0 + 0.5 * z * z;
  const double log_p = std::log(std::numbers::pi / (2.0 * k)) - k * t;
  const double log_q = std::log(2.0) - z + log_inv_gauss_cdf_trunc(z, t);
  const double mix_right = 1.0 / (1.0 + std::exp(log_q - log_p));

  for (;;) {
    double x = 0.0;
    if (rng.uniform() < mix_right) {
      x = t + std_exponential(rng) / k;
    } else {
      x = sample_trunc_inv_gauss(z, t, rng);
    }
    double s = pg_series_term(x, 0);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= pg_series_term(x, n);
        if (y <= s) {
          return 0.25 * x;
        }
      } else {
        s += pg_series_term(x, n);
        if (y > s) {
          break;
        }
      }
    }
  }
}

} // namespace detail

/// Polya-Gamma PG(b, c) for integer b >= 1, as a sum of b PG(1, c) draws.
inline double sample_pg(int b, double c, RngStream& rng) {
  if (b < 1) {
    throw std::invalid_argument("sample_pg: shape b must be a positive integer");
  }
  if (!std::isfinite(c)) {
    throw std::invalid_argument("sample_pg: tilting parameter must be finite");
  }
  double sum = 0.0;
  for (int k = 0; k < b; ++k) {
    sum += detail::sample_pg1(c, rng);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Cholesky with jitter ladder
// ---------------------------------------------------------------------------

/// Lower Cholesky factor of a symmetric matrix. On failure the diagonal is
/// inflated by 1e-10 * trace/p, escalating x10 up to 1e-4 * trace/p.
inline Eigen::LLT<MatrixXd> robust_cholesky(const MatrixXd& a, const char* what) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) {
    return llt;
  }
  const Index p = a.rows();
  const double scale = std::fabs(a.trace()) / static_cast<double>(std::max<Index>(p, 1));
  for (double eps = 1e-10; eps <= 1e-4 * (1.0 + 1e-9); eps *= 10.0) {
    MatrixXd jittered = a;
    jittered.diagonal().array() += eps * scale;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) {
      return llt;
    }
  }
  std::ostringstream msg;
  msg << what << ": matrix not positive definite after jitter (p = " << p
      << ", trace = " << a.trace() << ", min diag = " << a.diagonal().minCoeff()
      << ", max diag = " << a.diagonal().maxCoeff() << ")";
  throw NumericError(msg.str());
}

// ---------------------------------------------------------------------------
// Multivariate normal
// ---------------------------------------------------------------------------

inline VectorXd std_normal_vector(Index p, RngStream& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  VectorXd z(p);
  for (Index k = 0; k < p; ++k) {
    z(k) = dist(rng);
  }
  return z;
}

/// N(mean, cov).
inline VectorXd sample_mvn(const VectorXd& mean, const MatrixXd& cov, RngStream& rng) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw std::invalid_argument("sample_mvn: covariance shape does not match mean");
  }
  const auto llt = robust_cholesky(cov, "sample_mvn");
  return mean + llt.matrixL() * std_normal_vector(mean.size(), rng);
}

/// Gaussian posterior in canonical form.
struct GaussianCanonical {
  VectorXd mean;
  MatrixXd covariance;
};

/// Mean Q^{-1} b and covariance Q^{-1} for precision Q and shift b.
inline GaussianCanonical canonical_to_moments(const MatrixXd& precision, const VectorXd& shift) {
  const auto llt = robust_cholesky(precision, "canonical_to_moments");
  GaussianCanonical out;
  out.mean = llt.solve(shift);
  out.covariance = llt.solve(MatrixXd::Identity(precision.rows(), precision.cols()));
  return out;
}

/// N(Q^{-1} b, Q^{-1}) without forming the inverse.
inline VectorXd sample_mvn_canonical(const MatrixXd& precision, const VectorXd& shift,
                                     RngStream& rng) {
  const auto llt = robust_cholesky(precision, "sample_mvn_canonical");
  VectorXd draw = llt.solve(shift);
  const VectorXd z = std_normal_vector(shift.size(), rng);
  draw += llt.matrixU().solve(z);
  return draw;
}

// ---------------------------------------------------------------------------
// Inverse-Wishart
// ---------------------------------------------------------------------------

/// Sigma ~ IW(nu, scale) with E(Sigma) = scale / (nu - p - 1), i.e.
/// Sigma^{-1} ~ Wishart(nu, scale^{-1}). Bartlett decomposition.
inline MatrixXd sample_inverse_wishart(double nu, const MatrixXd& scale, RngStream& rng) {
  const Index p = scale.rows();
  if (scale.cols() != p || p < 1) {
    throw std::invalid_argument("sample_inverse_wishart: scale must be square");
  }
  if (!(nu > static_cast<double>(p) - 1.0)) {
    throw std::invalid_argument("sample_inverse_wishart: need nu > p - 1");
  }
  const auto llt = robust_cholesky(scale, "sample_inverse_wishart");
  const MatrixXd u = llt.matrixL();

  MatrixXd bartlett = MatrixXd::Zero(p, p);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < p; ++i) {
    const double dof = nu - static_cast<double>(i);
    bartlett(i, i) = std::sqrt(2.0 * sample_gamma(0.5 * dof, 1.0, rng));
    for (Index k = 0; k < i; ++k) {
      bartlett(i, k) = normal(rng);
    }
  }
  // Sigma = U A^{-T} A^{-1} U^T = B B^T with B = U A^{-T}.
  const MatrixXd b = bartlett.triangularView<Eigen::Lower>().solve(u.transpose()).transpose();
  MatrixXd sigma = b * b.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

// ---------------------------------------------------------------------------
// Logit-normal expectations
// ---------------------------------------------------------------------------

/// Law of logistic(Z), Z ~ N(mu, sigma2).
struct LogitNormalParams {
  double mu = 0.0;
  double sigma2 = 1.0;
};

struct McEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

inline constexpr int kDefaultLogitNormalDraws = 100000;

/// Monte Carlo estimate of E(logistic(Z)) using antithetic pairs
/// (z, 2 mu - z); each pair average is one replicate for the standard error.
inline McEstimate logit_normal_mean_mc(const LogitNormalParams& params, int n_mc,
                                       RngStream& rng) {
  if (n_mc < 1) {
    throw std::invalid_argument("logit_normal_mean_mc: n_mc must be >= 1");
  }
  if (!(params.sigma2 >= 0.0)) {
    throw std::invalid_argument("logit_normal_mean_mc: sigma2 must be >= 0");
  }
  const double sd = std::sqrt(params.sigma2);
  const int pairs = std::max(1, (n_mc + 1) / 2);
  double mean = 0.0;
  double m2 = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const double dz = sd * std_normal(rng);
    const double v = 0.5 * (logistic(params.mu + dz) + logistic(params.mu - dz));
    const double delta = v - mean;
    mean += delta / (k + 1);
    m2 += delta * (v - mean);
  }
  McEstimate out;
  out.value = mean;
  out.standard_error = pairs > 1 ? std::sqrt(m2 / (pairs - 1) / pairs) : 0.0;
  return out;
}

/// Bracket phi(mu - sigma2/2) <= E(logistic(Z)) <= phi(mu + sigma2/2).
inline std::pair<double, double> logit_normal_mean_bounds(const LogitNormalParams& params) {
  if (!(params.sigma2 > 0.0)) {
    throw std::invalid_argument("logit_normal_mean_bounds: sigma2 must be > 0");
  }
  return {logistic(params.mu - 0.5 * params.sigma2), logistic(params.mu + 0.5 * params.sigma2)};
}

} // namespace crlmix
