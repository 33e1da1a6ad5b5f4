#pragma once

// Job configuration: one INI document with a section per concern.
// Per-category prior keys take a ".j" suffix (mu0.2 = category 2).

#include "crlmix/errors.hpp"
#include "crlmix/ingest.hpp"
#include "crlmix/priorspec.hpp"
#include "crlmix/state.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace crlmix {

using ptree = boost::property_tree::ptree;

inline constexpr std::string_view kVersion = "0.1.0";

struct GridConfig {
  std::string covariate; // empty: first covariate
  double lo = std::numeric_limits<double>::quiet_NaN(); // NaN: observed minimum
  double hi = std::numeric_limits<double>::quiet_NaN(); // NaN: observed maximum
  int points = 50;
};

struct ElicitConfig {
  std::string mode = "baseline"; // baseline | monotone
  int categories = 3;
  int p = 2;
  double a1 = 10.0, a2 = 10.0, a3 = 6.0, a4 = 2.0;
  Monotonicity direction = Monotonicity::Decreasing;
  double kappa0 = 4.0;
  double nu0 = 4.0;
};

struct JobConfig {
  std::string command;

  // [job]
  std::string input;
  std::string output = "crlmix-out";
  std::uint64_t seed = 1;
  int threads = 1;

  // [ingest]
  IngestOptions ingest;

  // [model]
  Variant variant = Variant::General;
  int truncation = kConservativeTruncation; // 0: choose from the weight prior
  double truncation_mass = 1.0 - 1e-6;

  // [prior]
  ptree prior;

  // [run]
  RunConfig run;

  // [grid]
  GridConfig grid;

  // [curves]
  std::string draws;
  std::string curve_kind = "both"; // marginal | conditional | both
  double lower = 0.025;
  double upper = 0.975;
  int weight_top = 6;

  // [predict]
  std::string predict_points; // raw covariate rows, ';'-separated
  std::string predict_file;   // or a CSV with covariate columns

  // [simulate]
  std::string design = "example2";
  int sim_n = 0; // 0: design default
  ptree simulate;

  // [elicit]
  ElicitConfig elicit;

  ptree tree; // the document as read, echoed into manifests
};

// ---------------------------------------------------------------------------
// Value parsing
// ---------------------------------------------------------------------------

namespace detail {

/// Child lookup by exact key (keys may contain dots).
inline std::optional<std::string> lookup(const ptree& section, const std::string& key) {
  for (const auto& [k, v] : section) {
    if (k == key) {
      return trim(v.data());
    }
  }
  return std::nullopt;
}

inline const ptree& section_of(const ptree& tree, const std::string& name) {
  static const ptree empty;
  for (const auto& [k, v] : tree) {
    if (k == name) {
      return v;
    }
  }
  return empty;
}

inline double to_double(const std::string& where, const std::string& s) {
  double v = 0.0;
  if (s == "nan" || s == "auto" || s == "observed") {
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (!parse_double(s, v)) {
    throw ConfigError(where + ": '" + s + "' is not a number");
  }
  return v;
}

inline long to_long(const std::string& where, const std::string& s) {
  long v = 0;
  if (!parse_long(s, v)) {
    throw ConfigError(where + ": '" + s + "' is not an integer");
  }
  return v;
}

inline bool to_bool(const std::string& where, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    return false;
  }
  throw ConfigError(where + ": '" + s + "' is not a boolean");
}

inline std::vector<double> to_numbers(const std::string& where, const std::string& s) {
  std::vector<double> out;
  std::string normalized = s;
  for (char& ch : normalized) {
    if (ch == ',' || ch == ';' || ch == '(' || ch == ')' || ch == '[' || ch == ']') {
      ch = ' ';
    }
  }
  std::istringstream is(normalized);
  std::string tok;
  while (is >> tok) {
    out.push_back(to_double(where, tok));
  }
  return out;
}

} // namespace detail

/// Typed accessors over one INI section.
class Section {
public:
  Section(const ptree& tree, std::string name)
      : node_(detail::section_of(tree, name)), name_(std::move(name)) {}

  [[nodiscard]] bool has(const std::string& key) const { return detail::lookup(node_, key).has_value(); }
  [[nodiscard]] std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

  [[nodiscard]] std::string str(const std::string& key, std::string fallback) const {
    return detail::lookup(node_, key).value_or(std::move(fallback));
  }
  [[nodiscard]] double num(const std::string& key, double fallback) const {
    const auto v = detail::lookup(node_, key);
    return v ? detail::to_double(where(key), *v) : fallback;
  }
  [[nodiscard]] long integer(const std::string& key, long fallback) const {
    const auto v = detail::lookup(node_, key);
    return v ? detail::to_long(where(key), *v) : fallback;
  }
  [[nodiscard]] bool flag(const std::string& key, bool fallback) const {
    const auto v = detail::lookup(node_, key);
    return v ? detail::to_bool(where(key), *v) : fallback;
  }
  [[nodiscard]] std::optional<std::vector<double>> numbers(const std::string& key) const {
    const auto v = detail::lookup(node_, key);
    if (!v) {
      return std::nullopt;
    }
    return detail::to_numbers(where(key), *v);
  }
  [[nodiscard]] const ptree& node() const noexcept { return node_; }

private:
  const ptree& node_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// Document -> JobConfig
// ---------------------------------------------------------------------------

inline JobConfig parse_job_config(const ptree& tree) {
  JobConfig cfg;
  cfg.tree = tree;

  const Section job(tree, "job");
  cfg.input = job.str("input", cfg.input);
  cfg.output = job.str("output", cfg.output);
  const long seed = job.integer("seed", 1);
  if (seed < 0) {
    throw ConfigError("[job] seed must be non-negative");
  }
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.threads = static_cast<int>(job.integer("threads", 1));

  const Section ingest(tree, "ingest");
  cfg.ingest.response = ingest.str("response", cfg.ingest.response);
  cfg.ingest.standardize = ingest.flag("standardize", false);

  const Section model(tree, "model");
  try {
    cfg.variant = parse_variant(model.str("variant", "general"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[model] variant: ") + e.what());
  }
  const std::string trunc = model.str("truncation", std::to_string(kConservativeTruncation));
  cfg.truncation = trunc == "auto" ? 0 : static_cast<int>(detail::to_long(model.where("truncation"), trunc));
  cfg.truncation_mass = model.num("truncation_mass", cfg.truncation_mass);

  cfg.prior = detail::section_of(tree, "prior");

  const Section run(tree, "run");
  cfg.run.n_iter = static_cast<int>(run.integer("n_iter", cfg.run.n_iter));
  cfg.run.burn_in = static_cast<int>(run.integer("burn_in", cfg.run.burn_in));
  cfg.run.thin = static_cast<int>(run.integer("thin", cfg.run.thin));
  cfg.run.parallel_categories = run.flag("parallel_categories", true);

  const Section grid(tree, "grid");
  cfg.grid.covariate = grid.str("covariate", "");
  cfg.grid.lo = grid.num("lo", cfg.grid.lo);
  cfg.grid.hi = grid.num("hi", cfg.grid.hi);
  cfg.grid.points = static_cast<int>(grid.integer("points", cfg.grid.points));

  const Section curves(tree, "curves");
  cfg.draws = curves.str("draws", "");
  cfg.curve_kind = curves.str("kind", cfg.curve_kind);
  cfg.lower = curves.num("lower", cfg.lower);
  cfg.upper = curves.num("upper", cfg.upper);
  cfg.weight_top = static_cast<int>(curves.integer("weights_top", cfg.weight_top));

  const Section predict(tree, "predict");
  cfg.predict_points = predict.str("points", "");
  cfg.predict_file = predict.str("file", "");
  if (cfg.draws.empty()) {
    cfg.draws = predict.str("draws", "");
  }

  const Section simulate(tree, "simulate");
  cfg.design = simulate.str("design", cfg.design);
  cfg.sim_n = static_cast<int>(simulate.integer("n", 0));
  cfg.simulate = simulate.node();

  const Section elicit(tree, "elicit");
  cfg.elicit.mode = elicit.str("mode", cfg.elicit.mode);
  cfg.elicit.categories = static_cast<int>(elicit.integer("categories", cfg.elicit.categories));
  cfg.elicit.p = static_cast<int>(elicit.integer("p", cfg.elicit.p));
  cfg.elicit.a1 = elicit.num("a1", cfg.elicit.a1);
  cfg.elicit.a2 = elicit.num("a2", cfg.elicit.a2);
  cfg.elicit.a3 = elicit.num("a3", cfg.elicit.a3);
  cfg.elicit.a4 = elicit.num("a4", cfg.elicit.a4);
  const std::string dir = elicit.str("direction", "decreasing");
  if (dir == "decreasing") {
    cfg.elicit.direction = Monotonicity::Decreasing;
  } else if (dir == "increasing") {
    cfg.elicit.direction = Monotonicity::Increasing;
  } else {
    throw ConfigError("[elicit] direction: expected 'increasing' or 'decreasing', got '" + dir + "'");
  }
  cfg.elicit.kappa0 = elicit.num("kappa0", cfg.elicit.kappa0);
  cfg.elicit.nu0 = elicit.num("nu0", cfg.elicit.nu0);
  return cfg;
}

inline ptree read_config_file(const std::string& path) {
  ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  return tree;
}

inline ptree read_config_string(const std::string& text) {
  ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  return tree;
}

/// Structural checks that need no data.
inline void validate_job_config(const JobConfig& cfg) {
  if (cfg.threads < 1) {
    throw ConfigError("[job] threads must be >= 1");
  }
  if (cfg.truncation < 0) {
    throw ConfigError("[model] truncation must be >= 1 or 'auto'");
  }
  if (!(cfg.truncation_mass > 0.0 && cfg.truncation_mass < 1.0)) {
    throw ConfigError("[model] truncation_mass must lie in (0,1)");
  }
  try {
    cfg.run.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[run] ") + e.what());
  }
  if (cfg.grid.points < 1) {
    throw ConfigError("[grid] points must be >= 1");
  }
  if (!(cfg.lower >= 0.0 && cfg.lower < cfg.upper && cfg.upper <= 1.0)) {
    throw ConfigError("[curves] need 0 <= lower < upper <= 1");
  }
  if (cfg.curve_kind != "marginal" && cfg.curve_kind != "conditional" && cfg.curve_kind != "both") {
    throw ConfigError("[curves] kind must be marginal, conditional or both");
  }
}

// ---------------------------------------------------------------------------
// Prior overrides
// ---------------------------------------------------------------------------

namespace detail {

inline MatrixXd square_from(const std::string& where, const std::vector<double>& v, int p) {
  if (static_cast<int>(v.size()) == p) {
    return VectorXd::Map(v.data(), p).asDiagonal();
  }
  if (static_cast<int>(v.size()) == p * p) {
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        v.data(), p, p);
  }
  throw ConfigError(where + ": expected " + std::to_string(p) + " diagonal entries or " +
                    std::to_string(p * p) + " row-major entries");
}

inline VectorXd vector_from(const std::string& where, const std::vector<double>& v, int p) {
  if (static_cast<int>(v.size()) != p) {
    throw ConfigError(where + ": expected " + std::to_string(p) + " entries");
  }
  return VectorXd::Map(v.data(), p);
}

} // namespace detail

/// Baseline prior for (C, p, variant, L) with the [prior] overrides applied.
/// Keys: mu0, Lambda0, kappa0, nu0 (regression atoms) or mu0, nu0, a0, b0
/// (scalar atoms), each optionally suffixed ".j"; gamma0, Gamma0; a_alpha, b_alpha.
inline ModelSpec build_spec(const ptree& prior_section, Variant variant, int categories, int p,
                            int truncation) {
  ptree wrapper;
  wrapper.add_child("prior", prior_section);
  const Section prior(wrapper, "prior");
  ModelSpec spec = baseline_prior(categories, p, variant, truncation);
  auto key_for = [&](const std::string& base, int j) -> std::optional<std::string> {
    const std::string specific = base + "." + std::to_string(j + 1);
    if (prior.has(specific)) {
      return specific;
    }
    if (prior.has(base)) {
      return base;
    }
    return std::nullopt;
  };
  for (int j = 0; j + 1 < categories; ++j) {
    if (uses_regression_atoms(variant)) {
      auto& a = spec.regression_atoms[static_cast<std::size_t>(j)];
      if (auto k = key_for("mu0", j)) {
        a.mu0 = detail::vector_from(prior.where(*k), *prior.numbers(*k), p);
      }
      if (auto k = key_for("Lambda0", j)) {
        a.lambda0 = detail::square_from(prior.where(*k), *prior.numbers(*k), p);
      }
      if (auto k = key_for("kappa0", j)) {
        a.kappa0 = prior.num(*k, a.kappa0);
      }
      if (auto k = key_for("nu0", j)) {
        a.nu0 = prior.num(*k, a.nu0);
      }
    } else {
      auto& a = spec.scalar_atoms[static_cast<std::size_t>(j)];
      if (auto k = key_for("mu0", j)) {
        a.mu0 = prior.num(*k, a.mu0);
      }
      if (auto k = key_for("nu0", j)) {
        a.nu0 = prior.num(*k, a.nu0);
      }
      if (auto k = key_for("a0", j)) {
        a.a0 = prior.num(*k, a.a0);
      }
      if (auto k = key_for("b0", j)) {
        a.b0 = prior.num(*k, a.b0);
      }
    }
  }
  if (spec.lsbp) {
    if (auto v = prior.numbers("gamma0")) {
      spec.lsbp->gamma0 = detail::vector_from(prior.where("gamma0"), *v, p);
    }
    if (auto v = prior.numbers("Gamma0")) {
      spec.lsbp->cov0 = detail::square_from(prior.where("Gamma0"), *v, p);
    }
  }
  if (spec.dp) {
    spec.dp->a_alpha = prior.num("a_alpha", spec.dp->a_alpha);
    spec.dp->b_alpha = prior.num("b_alpha", spec.dp->b_alpha);
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[prior] ") + e.what());
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Documented defaults
// ---------------------------------------------------------------------------

inline std::string default_config_text() {
  return R"(; crlmix job configuration. Every key is optional; values shown are defaults.

[job]
; data file for fit and compare (CSV with a header row)
input =
; output directory (created if missing)
output = crlmix-out
seed = 1
; worker threads; results do not depend on this value
threads = 1

[ingest]
; name of the integer response column
response = y
; rescale continuous covariates to mean 0, sd 1 (binary columns are left as is)
standardize = false

[model]
; general | common-weights | common-atoms
variant = general
; truncation level L, or auto to pick the smallest L whose prior expected
; weight mass reaches truncation_mass at the observed covariate extremes
truncation = 50
truncation_mass = 0.999999

[prior]
; Baseline prior unless overridden. Per-category keys take a suffix: mu0.2
; regression atoms: mu0 (p numbers), Lambda0 (p diagonal or p*p row-major),
;   kappa0, nu0; baseline mu0 = 0, Lambda0 = 100 I, kappa0 = nu0 = p + 2
; scalar atoms (common-atoms): mu0, nu0, a0, b0; baseline 0, 2, 2, 5
; logit stick-breaking weights: gamma0, Gamma0; baseline 0, 100 I
; DP weights (common-weights): a_alpha = 2, b_alpha = 1

[run]
n_iter = 30000
burn_in = 10000
thin = 5
parallel_categories = true

[grid]
; covariate name for first-order curves; others are held at their observed mean
covariate =
; raw-unit range; observed minimum and maximum by default
lo = observed
hi = observed
points = 50

[curves]
; draws file written by fit
draws =
; marginal | conditional | both
kind = both
lower = 0.025
upper = 0.975
; number of ordered weights in the weight profile
weights_top = 6

[predict]
; raw covariate rows, one per ';', e.g. points = -5; 0; 5
points =
; or a CSV file with covariate columns
file =

[simulate]
; example1 | example2 | example3
design = example2
; sample size; 0 uses the design default (800, 100, 200)
n = 0
; design constants may be overridden, e.g. beta1 = 0.4, cutoffs = -1 1,
; a1 = -5 -1, b1.1 = 3 0.5 (component 1, category 1), c11 = 0.5

[elicit]
; baseline | monotone
mode = baseline
categories = 3
p = 2
a1 = 10
a2 = 10
a3 = 6
a4 = 2
; increasing | decreasing
direction = decreasing
kappa0 = 4
nu0 = 4
)";
}

} // namespace crlmix
