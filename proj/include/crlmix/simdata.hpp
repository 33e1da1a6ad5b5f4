#pragma once

// Synthetic ordinal-regression designs with exact truth curves.
//
// Example 1: three-component mixture of continuation-ratio kernels with
// probit stick-breaking weights in one covariate on (-10, 10).
// Example 2: ordinal probit with a linear latent mean in one covariate.
// Example 3: continuation-ratio kernel with sine/exponential logits in two
// covariates on (0, 1).
//
// Default constants are artifact choices that give non-standard curve
// shapes; every constant can be overridden.

#include "crlmix/core.hpp"
#include "crlmix/draws_io.hpp"
#include "crlmix/evalmetrics.hpp"
#include "crlmix/inference.hpp"
#include "crlmix/randvar.hpp"
#include "crlmix/rng.hpp"

#include <array>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace crlmix {

struct SimTruth {
  std::string id;
  json params;
  TruthFunction truth; // raw covariates (no intercept) -> pi
  MatrixXd raw_x;      // n x q
  OrdinalDataset data;
  CovariateInfo covariates;
};

namespace detail {

inline OrdinalDataset design_dataset(const MatrixXd& raw, std::vector<int> y, int categories) {
  MatrixXd x(raw.rows(), raw.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(raw.cols()) = raw;
  return OrdinalDataset(std::move(y), std::move(x), categories);
}

inline CovariateInfo sim_covariates(const MatrixXd& raw) {
  CovariateInfo info = plain_covariates(static_cast<int>(raw.cols()) + 1);
  if (raw.rows() > 0) {
    info.observed_mean = raw.colwise().mean().transpose();
    info.observed_min = raw.colwise().minCoeff().transpose();
    info.observed_max = raw.colwise().maxCoeff().transpose();
  }
  return info;
}

inline SimTruth finish(std::string id, json params, TruthFunction truth, MatrixXd raw, int categories,
                       RngStream& rng) {
  std::vector<int> y(static_cast<std::size_t>(raw.rows()));
  for (Index i = 0; i < raw.rows(); ++i) {
    const VectorXd pi = truth(raw.row(i).transpose());
    y[static_cast<std::size_t>(i)] = sample_index(pi, rng.uniform()) + 1;
  }
  SimTruth out{std::move(id), std::move(params), std::move(truth), raw,
               design_dataset(raw, std::move(y), categories), sim_covariates(raw)};
  return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Example 1
// ---------------------------------------------------------------------------

struct Example1Params {
  // b[k][j] = (intercept, slope) of theta_{j,k}(x) for component k, category j.
  std::array<std::array<std::array<double, 2>, 2>, 3> b{{
      {{{3.0, 0.5}, {-1.0, -0.3}}},
      {{{-2.0, -0.6}, {1.0, 0.5}}},
      {{{-1.0, 0.2}, {0.5, -0.3}}},
  }};
  // a[j] = (intercept, slope) of p_j(x) = Phi(a_j0 + a_j1 x).
  std::array<std::array<double, 2>, 2> a{{{-5.0, -1.0}, {0.0, -1.0}}};
  double x_lo = -10.0;
  double x_hi = 10.0;
};

inline std::array<double, 3> example1_weights(const Example1Params& prm, double x) {
  const double p1 = std_normal_cdf(prm.a[0][0] + prm.a[0][1] * x);
  const double p2 = std_normal_cdf(prm.a[1][0] + prm.a[1][1] * x);
  return {p1, (1.0 - p1) * p2, (1.0 - p1) * (1.0 - p2)};
}

inline VectorXd example1_truth(const Example1Params& prm, double x) {
  const auto w = example1_weights(prm, x);
  VectorXd pi = VectorXd::Zero(3);
  for (int k = 0; k < 3; ++k) {
    VectorXd theta(2);
    for (int j = 0; j < 2; ++j) {
      theta(j) = prm.b[k][j][0] + prm.b[k][j][1] * x;
    }
    pi += w[k] * theta_to_pi(CrlTheta{theta}).pi;
  }
  return pi;
}

inline json example1_json(const Example1Params& prm) {
  return {{"b", prm.b}, {"a", prm.a}, {"x_range", {prm.x_lo, prm.x_hi}}};
}

inline SimTruth gen_example1(int n, const Example1Params& prm, RngStream& rng) {
  if (n < 1) {
    throw std::invalid_argument("gen_example1: need n >= 1");
  }
  MatrixXd raw(n, 1);
  for (int i = 0; i < n; ++i) {
    raw(i, 0) = prm.x_lo + (prm.x_hi - prm.x_lo) * rng.uniform();
  }
  TruthFunction truth = [prm](const VectorXd& x) { return example1_truth(prm, x(0)); };
  return detail::finish("example1", example1_json(prm), std::move(truth), std::move(raw), 3, rng);
}

// ---------------------------------------------------------------------------
// Example 2
// ---------------------------------------------------------------------------

struct Example2Params {
  double beta0 = 0.0;
  double beta1 = 0.4;
  std::vector<double> cutoffs{-1.0, 1.0};
  double x_lo = -10.0;
  double x_hi = 10.0;

  void validate() const {
    if (cutoffs.empty()) {
      throw std::invalid_argument("example 2: need at least one cut-off");
    }
    for (std::size_t k = 1; k < cutoffs.size(); ++k) {
      if (!(cutoffs[k] > cutoffs[k - 1])) {
        throw std::invalid_argument("example 2: cut-offs must be strictly increasing");
      }
    }
  }
};

inline VectorXd example2_truth(const Example2Params& prm, double x) {
  const double mu = prm.beta0 + prm.beta1 * x;
  const auto c = static_cast<Index>(prm.cutoffs.size()) + 1;
  VectorXd pi(c);
  double below = 0.0;
  for (Index j = 0; j + 1 < c; ++j) {
    const double cdf = std_normal_cdf(prm.cutoffs[static_cast<std::size_t>(j)] - mu);
    pi(j) = cdf - below;
    below = cdf;
  }
  pi(c - 1) = 1.0 - below;
  return pi;
}

inline json example2_json(const Example2Params& prm) {
  return {{"beta0", prm.beta0},
          {"beta1", prm.beta1},
          {"cutoffs", prm.cutoffs},
          {"x_range", {prm.x_lo, prm.x_hi}}};
}

/// Latent y~ ~ N(beta0 + beta1 x, 1), discretized at the cut-offs.
inline SimTruth gen_example2(int n, const Example2Params& prm, RngStream& rng) {
  prm.validate();
  if (n < 1) {
    throw std::invalid_argument("gen_example2: need n >= 1");
  }
  const int c = static_cast<int>(prm.cutoffs.size()) + 1;
  MatrixXd raw(n, 1);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    raw(i, 0) = prm.x_lo + (prm.x_hi - prm.x_lo) * rng.uniform();
    const double latent = prm.beta0 + prm.beta1 * raw(i, 0) + std_normal(rng);
    int cat = 1;
    while (cat < c && latent > prm.cutoffs[static_cast<std::size_t>(cat - 1)]) {
      ++cat;
    }
    y[static_cast<std::size_t>(i)] = cat;
  }
  TruthFunction truth = [prm](const VectorXd& x) { return example2_truth(prm, x(0)); };
  return SimTruth{"example2",
                  example2_json(prm),
                  std::move(truth),
                  raw,
                  detail::design_dataset(raw, std::move(y), c),
                  detail::sim_covariates(raw)};
}

// ---------------------------------------------------------------------------
// Example 3
// ---------------------------------------------------------------------------

struct Example3Params {
  // theta_1 = c11 + c12 sin(a11 x1 + a12 x2); theta_2 = c21 + c22 exp(a21 x1 + a22 x2)
  double c11 = 0.5, c12 = 2.0, a11 = 6.0, a12 = 3.0;
  double c21 = -1.5, c22 = 1.0, a21 = 1.5, a22 = -1.0;
};

inline VectorXd example3_truth(const Example3Params& prm, double x1, double x2) {
  VectorXd theta(2);
  theta(0) = prm.c11 + prm.c12 * std::sin(prm.a11 * x1 + prm.a12 * x2);
  theta(1) = prm.c21 + prm.c22 * std::exp(prm.a21 * x1 + prm.a22 * x2);
  return theta_to_pi(CrlTheta{theta}).pi;
}

inline json example3_json(const Example3Params& prm) {
  return {{"c11", prm.c11}, {"c12", prm.c12}, {"a11", prm.a11}, {"a12", prm.a12},
          {"c21", prm.c21}, {"c22", prm.c22}, {"a21", prm.a21}, {"a22", prm.a22}};
}

inline SimTruth gen_example3(int n, const Example3Params& prm, RngStream& rng) {
  if (n < 1) {
    throw std::invalid_argument("gen_example3: need n >= 1");
  }
  MatrixXd raw(n, 2);
  for (int i = 0; i < n; ++i) {
    raw(i, 0) = rng.uniform();
    raw(i, 1) = rng.uniform();
  }
  TruthFunction truth = [prm](const VectorXd& x) { return example3_truth(prm, x(0), x(1)); };
  return detail::finish("example3", example3_json(prm), std::move(truth), std::move(raw), 3, rng);
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// Truth on a grid in the curve CSV layout (degenerate bands).
inline CurveEstimate truth_curves(const TruthFunction& truth, const CurveGrid& grid) {
  const auto g = static_cast<Index>(grid.size());
  CurveEstimate est;
  est.grid = grid;
  for (Index r = 0; r < g; ++r) {
    const VectorXd pi = truth(grid.raw.row(r).transpose());
    if (r == 0) {
      est.categories = static_cast<int>(pi.size());
      est.mean.resize(g, pi.size());
    }
    est.mean.row(r) = pi.transpose();
  }
  est.lo = est.mean;
  est.hi = est.mean;
  return est;
}

/// Dataset in the ingest schema: covariate columns then y.
inline void write_dataset_csv(std::ostream& os, const SimTruth& sim) {
  for (const auto& name : sim.covariates.names) {
    os << name << ',';
  }
  os << "y\n";
  for (Index i = 0; i < sim.raw_x.rows(); ++i) {
    for (Index k = 0; k < sim.raw_x.cols(); ++k) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", sim.raw_x(i, k));
      os << buf << ',';
    }
    os << sim.data.y()[static_cast<std::size_t>(i)] << '\n';
  }
}

} // namespace crlmix
