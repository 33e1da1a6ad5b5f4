#pragma once

// Posterior functionals of retained draws: marginal and conditional
// probability response curves, posterior predictive draws, ordered-weight
// profiles and label-invariant diagnostics.

#include "crlmix/core.hpp"
#include "crlmix/parallel.hpp"
#include "crlmix/rng.hpp"
#include "crlmix/state.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace crlmix {

// ---------------------------------------------------------------------------
// Quantiles
// ---------------------------------------------------------------------------

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) {
    throw std::invalid_argument("quantile of an empty sample");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("quantile level must lie in [0,1]");
  }
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return sorted_quantile(values, q);
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Covariate points in model units plus their raw-unit coordinates.
struct CurveGrid {
  std::vector<VectorXd> points; // length p, intercept first
  MatrixXd raw;                 // G x (p - 1), raw covariate values
  std::vector<std::string> names;

  [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
};

/// Raw covariate vector (without intercept) to a model-unit design row.
inline VectorXd design_point(const CovariateInfo& info, const VectorXd& raw) {
  VectorXd x(raw.size() + 1);
  x(0) = 1.0;
  for (Index k = 0; k < raw.size(); ++k) {
    const double c = info.center.size() > k ? info.center(k) : 0.0;
    const double s = info.scale.size() > k ? info.scale(k) : 1.0;
    x(k + 1) = (raw(k) - c) / s;
  }
  return x;
}

/// Grid from explicit raw covariate rows.
inline CurveGrid grid_from_rows(const CovariateInfo& info, const MatrixXd& raw) {
  CurveGrid g;
  g.raw = raw;
  g.names = info.names;
  if (g.names.empty()) {
    for (Index k = 0; k < raw.cols(); ++k) {
      g.names.push_back("x" + std::to_string(k + 1));
    }
  }
  for (Index r = 0; r < raw.rows(); ++r) {
    g.points.push_back(design_point(info, raw.row(r).transpose()));
  }
  return g;
}

/// First-order effect grid: covariate `k` (0-based, intercept excluded) runs
/// over `points` equally spaced raw values in [lo, hi]; every other covariate
/// is fixed at its observed average.
inline CurveGrid first_order_grid(const CovariateInfo& info, Index k, double lo, double hi,
                                  int points) {
  const Index q = info.observed_mean.size();
  if (k < 0 || k >= q) {
    throw std::invalid_argument("first_order_grid: covariate index out of range");
  }
  if (points < 1 || !(hi >= lo)) {
    throw std::invalid_argument("first_order_grid: need points >= 1 and hi >= lo");
  }
  MatrixXd raw(points, q);
  for (int r = 0; r < points; ++r) {
    raw.row(r) = info.observed_mean.transpose();
    raw(r, k) = points == 1 ? lo : lo + (hi - lo) * r / (points - 1.0);
  }
  return grid_from_rows(info, raw);
}

/// Identity bookkeeping for p - 1 raw covariates.
inline CovariateInfo plain_covariates(int p, VectorXd observed_mean = {}) {
  CovariateInfo info;
  const int q = p - 1;
  for (int k = 0; k < q; ++k) {
    info.names.push_back("x" + std::to_string(k + 1));
  }
  info.center = VectorXd::Zero(q);
  info.scale = VectorXd::Ones(q);
  info.observed_mean = observed_mean.size() == q ? observed_mean : VectorXd(VectorXd::Zero(q));
  info.observed_min = info.observed_mean;
  info.observed_max = info.observed_mean;
  return info;
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

struct CurveOptions {
  double lower = 0.025;
  double upper = 0.975;
  bool keep_traces = false;
  int threads = 1;
};

/// Posterior summaries of a probability response functional on a grid.
struct CurveEstimate {
  CurveGrid grid;
  int categories = 0;
  MatrixXd mean; // G x C
  MatrixXd lo;
  MatrixXd hi;
  std::vector<MatrixXd> traces; // per grid point, T x C (only if requested)
};

enum class CurveKind { Marginal, Conditional };

/// Pr(Y = j | Y >= j, G_x) from marginal probabilities: pi_j / sum_{k>=j} pi_k.
inline VectorXd conditional_from_marginal(const VectorXd& marginal) {
  const Index c = marginal.size();
  VectorXd out(c);
  double tail = 0.0;
  for (Index j = c - 1; j >= 0; --j) {
    tail += marginal(j);
    out(j) = tail > 0.0 ? marginal(j) / tail : 1.0;
  }
  out(c - 1) = 1.0;
  return out;
}

/// Same conditional probabilities through the component-weighted form:
/// sum_l w_jl(x) phi(theta_jl(x)) with w_jl proportional to
/// omega_l(x) prod_{k<j} (1 - phi(theta_kl(x))).
inline VectorXd conditional_weighted(const DrawRecord& d, const DrawsMeta& meta, const VectorXd& x) {
  const VectorXd w = draw_weights(d, meta, x);
  const int c = meta.categories;
  VectorXd num = VectorXd::Zero(c);
  VectorXd den = VectorXd::Zero(c);
  for (Index l = 0; l < w.size(); ++l) {
    const CrlTheta th = draw_component_theta(d, meta, x, l);
    double survive = w(l);
    for (int j = 0; j < c; ++j) {
      const double stop = j + 1 < c ? logistic(th.theta(j)) : 1.0;
      den(j) += survive;
      num(j) += survive * stop;
      survive *= 1.0 - stop;
    }
  }
  VectorXd out(c);
  for (int j = 0; j < c; ++j) {
    out(j) = den(j) > 0.0 ? num(j) / den(j) : 1.0;
  }
  out(c - 1) = 1.0;
  return out;
}

inline VectorXd draw_functional(const DrawRecord& d, const DrawsMeta& meta, const VectorXd& x,
                                CurveKind kind) {
  const VectorXd m = draw_probs(d, meta, x);
  return kind == CurveKind::Marginal ? m : conditional_from_marginal(m);
}

inline CurveEstimate summarize_curves(const PosteriorDraws& draws, const CurveGrid& grid,
                                      CurveKind kind, const CurveOptions& opts = {}) {
  if (draws.draws.empty()) {
    throw std::invalid_argument("curve summaries need at least one retained draw");
  }
  if (!(opts.lower >= 0.0 && opts.lower <= opts.upper && opts.upper <= 1.0)) {
    throw std::invalid_argument("curve quantile levels must satisfy 0 <= lower <= upper <= 1");
  }
  const auto& meta = draws.meta;
  for (const auto& x : grid.points) {
    if (x.size() != meta.p) {
      throw std::invalid_argument("grid point has dimension " + std::to_string(x.size()) +
                                  ", draws have p = " + std::to_string(meta.p));
    }
  }
  const auto g = static_cast<Index>(grid.size());
  const int c = meta.categories;
  const auto t = static_cast<Index>(draws.draws.size());
  CurveEstimate est;
  est.grid = grid;
  est.categories = c;
  est.mean = MatrixXd::Zero(g, c);
  est.lo = MatrixXd::Zero(g, c);
  est.hi = MatrixXd::Zero(g, c);
  if (opts.keep_traces) {
    est.traces.resize(static_cast<std::size_t>(g));
  }
  parallel_for(g, opts.threads, [&](std::ptrdiff_t r) {
    const VectorXd& x = grid.points[static_cast<std::size_t>(r)];
    MatrixXd vals(t, c);
    for (Index k = 0; k < t; ++k) {
      vals.row(k) = draw_functional(draws.draws[static_cast<std::size_t>(k)], meta, x, kind);
    }
    std::vector<double> col(static_cast<std::size_t>(t));
    for (int j = 0; j < c; ++j) {
      for (Index k = 0; k < t; ++k) {
        col[static_cast<std::size_t>(k)] = vals(k, j);
      }
      est.mean(r, j) = vals.col(j).mean();
      std::sort(col.begin(), col.end());
      est.lo(r, j) = sorted_quantile(col, opts.lower);
      est.hi(r, j) = sorted_quantile(col, opts.upper);
    }
    if (opts.keep_traces) {
      est.traces[static_cast<std::size_t>(r)] = std::move(vals);
    }
  });
  return est;
}

inline CurveEstimate marginal_curves(const PosteriorDraws& draws, const CurveGrid& grid,
                                     const CurveOptions& opts = {}) {
  return summarize_curves(draws, grid, CurveKind::Marginal, opts);
}

inline CurveEstimate conditional_curves(const PosteriorDraws& draws, const CurveGrid& grid,
                                        const CurveOptions& opts = {}) {
  return summarize_curves(draws, grid, CurveKind::Conditional, opts);
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Flat CSV: covariate columns, category, mean, lo, hi.
inline void write_curves_csv(std::ostream& os, const CurveEstimate& est) {
  for (const auto& name : est.grid.names) {
    os << name << ',';
  }
  os << "category,mean,lo,hi\n";
  for (Index r = 0; r < est.mean.rows(); ++r) {
    for (int j = 0; j < est.categories; ++j) {
      for (Index k = 0; k < est.grid.raw.cols(); ++k) {
        os << format_number(est.grid.raw(r, k)) << ',';
      }
      os << (j + 1) << ',' << format_number(est.mean(r, j)) << ',' << format_number(est.lo(r, j))
         << ',' << format_number(est.hi(r, j)) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Posterior predictive
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kPredictStream = 0x70726564ULL;

inline int sample_index(const VectorXd& probs, double u) {
  const double target = u * probs.sum();
  double acc = 0.0;
  for (Index k = 0; k < probs.size(); ++k) {
    acc += probs(k);
    if (target < acc) {
      return static_cast<int>(k);
    }
  }
  for (Index k = probs.size() - 1; k >= 0; --k) {
    if (probs(k) > 0.0) {
      return static_cast<int>(k);
    }
  }
  return 0;
}

/// One predictive category (1-based) from draw d at x: a component from the
/// draw's weights, then a response from that component's kernel.
inline int predictive_category(const DrawRecord& d, const DrawsMeta& meta, const VectorXd& x,
                               RngStream& rng) {
  const VectorXd w = draw_weights(d, meta, x);
  const int l = sample_index(w, rng.uniform());
  const VectorXd pi = theta_to_pi(draw_component_theta(d, meta, x, l)).pi;
  return sample_index(pi, rng.uniform()) + 1;
}

/// One predictive category per retained draw at x_new.
inline std::vector<int> posterior_predictive(const PosteriorDraws& draws, const VectorXd& x_new,
                                             std::uint64_t seed) {
  if (x_new.size() != draws.meta.p) {
    throw std::invalid_argument("posterior_predictive: x_new must have length p");
  }
  std::vector<int> out;
  out.reserve(draws.draws.size());
  auto rng = RngStream::derive(seed, {kPredictStream, 0});
  for (const auto& d : draws.draws) {
    out.push_back(predictive_category(d, draws.meta, x_new, rng));
  }
  return out;
}

/// Empirical pmf of categories in 1..C.
inline VectorXd empirical_pmf(const std::vector<int>& ys, int categories) {
  VectorXd pmf = VectorXd::Zero(categories);
  for (int y : ys) {
    pmf(y - 1) += 1.0;
  }
  return ys.empty() ? pmf : VectorXd(pmf / static_cast<double>(ys.size()));
}

/// Replicated responses: entry (i, t) is a predictive category for row i of
/// `x` under retained draw t.
inline Eigen::MatrixXi predictive_replicates(const PosteriorDraws& draws, const MatrixXd& x,
                                             std::uint64_t seed, int threads = 1) {
  if (x.cols() != draws.meta.p) {
    throw std::invalid_argument("predictive_replicates: design has wrong column count");
  }
  const auto t = static_cast<Index>(draws.draws.size());
  Eigen::MatrixXi out(x.rows(), t);
  parallel_for(x.rows(), threads, [&](std::ptrdiff_t i) {
    auto rng = RngStream::derive(seed, {kPredictStream, 1, static_cast<std::uint64_t>(i)});
    const VectorXd xi = x.row(i).transpose();
    for (Index k = 0; k < t; ++k) {
      out(i, k) = predictive_category(draws.draws[static_cast<std::size_t>(k)], draws.meta, xi, rng);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Ordered weights
// ---------------------------------------------------------------------------

inline constexpr std::array<double, 5> kBoxLevels{0.025, 0.25, 0.5, 0.75, 0.975};

/// Box-plot quantiles of the k largest weights at each grid point.
struct WeightProfile {
  CurveGrid grid;
  int k = 0;
  std::vector<MatrixXd> quantiles; // per grid point, k x 5 at kBoxLevels
  std::vector<MatrixXd> traces;    // per grid point, T x k ordered weights
};

inline WeightProfile weight_profile(const PosteriorDraws& draws, const CurveGrid& grid, int k,
                                    int threads = 1) {
  if (k < 1 || k > draws.meta.truncation) {
    throw std::invalid_argument("weight_profile: need 1 <= k <= L");
  }
  if (draws.draws.empty()) {
    throw std::invalid_argument("weight_profile: no retained draws");
  }
  const auto t = static_cast<Index>(draws.draws.size());
  WeightProfile out;
  out.grid = grid;
  out.k = k;
  out.quantiles.resize(grid.size());
  out.traces.resize(grid.size());
  parallel_for(static_cast<std::ptrdiff_t>(grid.size()), threads, [&](std::ptrdiff_t r) {
    const VectorXd& x = grid.points[static_cast<std::size_t>(r)];
    MatrixXd top(t, k);
    for (Index s = 0; s < t; ++s) {
      VectorXd w = draw_weights(draws.draws[static_cast<std::size_t>(s)], draws.meta, x);
      std::sort(w.begin(), w.end(), std::greater<>());
      top.row(s) = w.head(k).transpose();
    }
    MatrixXd q(k, static_cast<Index>(kBoxLevels.size()));
    std::vector<double> col(static_cast<std::size_t>(t));
    for (int h = 0; h < k; ++h) {
      for (Index s = 0; s < t; ++s) {
        col[static_cast<std::size_t>(s)] = top(s, h);
      }
      std::sort(col.begin(), col.end());
      for (std::size_t b = 0; b < kBoxLevels.size(); ++b) {
        q(h, static_cast<Index>(b)) = sorted_quantile(col, kBoxLevels[b]);
      }
    }
    out.quantiles[static_cast<std::size_t>(r)] = std::move(q);
    out.traces[static_cast<std::size_t>(r)] = std::move(top);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Per-draw label-invariant traces.
struct Diagnostics {
  std::vector<long> iteration;
  std::vector<int> n_distinct;
  /// Per draw, (C-1) x p matrix whose row j is sum_i beta_{j, L_i} / n
  /// (for common atoms p = 1 and the row is sum_i theta_{j, L_i} / n).
  std::vector<MatrixXd> label_invariant;
  std::vector<double> top_weight; // largest weight at the reference x
};

inline Diagnostics diagnostics(const PosteriorDraws& draws, const VectorXd& x_ref) {
  const auto& meta = draws.meta;
  const int cm1 = meta.categories - 1;
  const bool reg = uses_regression_atoms(meta.variant);
  Diagnostics out;
  for (const auto& d : draws.draws) {
    out.iteration.push_back(d.iteration);
    const auto occupied = std::count_if(d.counts.begin(), d.counts.end(), [](int m) { return m > 0; });
    out.n_distinct.push_back(static_cast<int>(occupied));
    long n = 0;
    for (int m : d.counts) {
      n += m;
    }
    MatrixXd bar = MatrixXd::Zero(cm1, reg ? meta.p : 1);
    for (int j = 0; j < cm1; ++j) {
      for (std::size_t l = 0; l < d.counts.size(); ++l) {
        if (d.counts[l] == 0) {
          continue;
        }
        if (reg) {
          bar.row(j) += d.counts[l] * d.beta[static_cast<std::size_t>(j)].col(static_cast<Index>(l)).transpose();
        } else {
          bar(j, 0) += d.counts[l] * d.theta_atoms(j, static_cast<Index>(l));
        }
      }
    }
    if (n > 0) {
      bar /= static_cast<double>(n);
    } else {
      bar.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    out.label_invariant.push_back(std::move(bar));
    out.top_weight.push_back(draw_weights(d, meta, x_ref).maxCoeff());
  }
  return out;
}

inline void write_diagnostics_csv(std::ostream& os, const Diagnostics& diag, const DrawsMeta& meta) {
  os << "iteration,n_distinct,top_weight";
  const int cm1 = meta.categories - 1;
  const Index cols = diag.label_invariant.empty() ? 0 : diag.label_invariant.front().cols();
  for (int j = 0; j < cm1; ++j) {
    for (Index k = 0; k < cols; ++k) {
      os << ",bar_" << (j + 1) << '_' << k;
    }
  }
  os << '\n';
  for (std::size_t t = 0; t < diag.iteration.size(); ++t) {
    os << diag.iteration[t] << ',' << diag.n_distinct[t] << ',' << format_number(diag.top_weight[t]);
    for (int j = 0; j < cm1; ++j) {
      for (Index k = 0; k < cols; ++k) {
        os << ',' << format_number(diag.label_invariant[t](j, k));
      }
    }
    os << '\n';
  }
}

} // namespace crlmix
