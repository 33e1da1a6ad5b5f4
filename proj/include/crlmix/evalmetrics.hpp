#pragma once

// Posterior predictive loss (Gelfand-Ghosh) and curve-estimation metrics.

#include "crlmix/core.hpp"
#include "crlmix/inference.hpp"

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace crlmix {

/// Per-category goodness-of-fit G_j and penalty P_j.
struct GGResult {
  VectorXd g;
  VectorXd p;

  [[nodiscard]] double total_g() const { return g.sum(); }
  [[nodiscard]] double total_p() const { return p.sum(); }
  [[nodiscard]] double total() const { return g.sum() + p.sum(); }
};

/// G_j = sum_i (Y_ij - mean_t Y*_ijt)^2 and P_j = sum_i var_t Y*_ijt with
/// one-hot indicators; variances divide by T. `replicates` is n x T with
/// entries in 1..C.
inline GGResult gelfand_ghosh(const Eigen::MatrixXi& replicates, const std::vector<int>& observed,
                              int categories) {
  const Index n = replicates.rows();
  const Index t = replicates.cols();
  if (t < 2) {
    throw std::invalid_argument("gelfand_ghosh: need at least 2 replicate draws");
  }
  if (static_cast<Index>(observed.size()) != n) {
    throw std::invalid_argument("gelfand_ghosh: replicate rows do not match observations");
  }
  GGResult out{VectorXd::Zero(categories), VectorXd::Zero(categories)};
  VectorXd freq(categories);
  for (Index i = 0; i < n; ++i) {
    freq.setZero();
    for (Index k = 0; k < t; ++k) {
      const int y = replicates(i, k);
      if (y < 1 || y > categories) {
        throw std::invalid_argument("gelfand_ghosh: replicate category out of range");
      }
      freq(y - 1) += 1.0;
    }
    freq /= static_cast<double>(t);
    for (int j = 0; j < categories; ++j) {
      const double obs = observed[static_cast<std::size_t>(i)] == j + 1 ? 1.0 : 0.0;
      const double m = freq(j);
      out.g(j) += (obs - m) * (obs - m);
      out.p(j) += m * (1.0 - m);
    }
  }
  return out;
}

inline GGResult gelfand_ghosh(const Eigen::MatrixXi& replicates, const OrdinalDataset& data) {
  return gelfand_ghosh(replicates, data.y(), data.categories());
}

/// Per-category RMSE-type error, average band length and coverage.
struct CurveMetrics {
  VectorXd error;
  VectorXd length;
  VectorXd coverage;
};

/// Truth is evaluated at the raw covariate coordinates of each grid point.
using TruthFunction = std::function<VectorXd(const VectorXd&)>;

inline CurveMetrics curve_metrics(const TruthFunction& truth, const CurveEstimate& est) {
  const Index n = est.mean.rows();
  if (n == 0 || est.grid.raw.rows() != n) {
    throw std::invalid_argument("curve_metrics: estimate grid is empty or inconsistent");
  }
  const int c = est.categories;
  VectorXd sq = VectorXd::Zero(c);
  CurveMetrics out{VectorXd::Zero(c), VectorXd::Zero(c), VectorXd::Zero(c)};
  for (Index r = 0; r < n; ++r) {
    const VectorXd pi = truth(est.grid.raw.row(r).transpose());
    if (pi.size() != c) {
      throw std::invalid_argument("curve_metrics: truth has the wrong number of categories");
    }
    for (int j = 0; j < c; ++j) {
      const double d = pi(j) - est.mean(r, j);
      sq(j) += d * d;
      out.length(j) += est.hi(r, j) - est.lo(r, j);
      out.coverage(j) += (est.lo(r, j) <= pi(j) && pi(j) <= est.hi(r, j)) ? 1.0 : 0.0;
    }
  }
  const auto nd = static_cast<double>(n);
  out.error = sq.cwiseSqrt() / nd;
  out.length /= nd;
  out.coverage /= nd;
  return out;
}

/// Largest absolute pointwise error per grid point over categories.
inline VectorXd pointwise_abs_error(const TruthFunction& truth, const CurveEstimate& est) {
  VectorXd out(est.mean.rows());
  for (Index r = 0; r < est.mean.rows(); ++r) {
    const VectorXd pi = truth(est.grid.raw.row(r).transpose());
    out(r) = (pi - est.mean.row(r).transpose()).cwiseAbs().maxCoeff();
  }
  return out;
}

struct ComparisonRow {
  std::string model;
  GGResult gg;
};

/// model, G1, P1, ..., GC, PC, G, P, G+P
inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  if (rows.empty()) {
    return;
  }
  const Index c = rows.front().gg.g.size();
  os << "model";
  for (Index j = 1; j <= c; ++j) {
    os << ",G" << j << ",P" << j;
  }
  os << ",G,P,G+P\n";
  for (const auto& r : rows) {
    os << r.model;
    for (Index j = 0; j < c; ++j) {
      os << ',' << format_number(r.gg.g(j)) << ',' << format_number(r.gg.p(j));
    }
    os << ',' << format_number(r.gg.total_g()) << ',' << format_number(r.gg.total_p()) << ','
       << format_number(r.gg.total()) << '\n';
  }
}

} // namespace crlmix
