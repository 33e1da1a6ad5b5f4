#pragma once

// Subcommand implementations behind the crlmix executable. Each job writes
// into its own output directory and finishes with a manifest.json.

#include "crlmix/config.hpp"
#include "crlmix/draws_io.hpp"
#include "crlmix/evalmetrics.hpp"
#include "crlmix/inference.hpp"
#include "crlmix/ingest.hpp"
#include "crlmix/sampler.hpp"
#include "crlmix/simdata.hpp"

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace crlmix {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitData = 3, kExitNumeric = 4 };

inline constexpr std::array<std::string_view, 7> kCommands{
    "fit", "curves", "predict", "compare", "simulate", "elicit", "print-config"};

namespace detail {

enum : std::uint64_t { kCompareTag = 0xC0, kReplicateTag = 0xC1, kSimulateTag = 0x51 };

inline json ptree_to_json(const ptree& tree) {
  if (tree.empty()) {
    return tree.data();
  }
  json out = json::object();
  for (const auto& [k, v] : tree) {
    out[k] = ptree_to_json(v);
  }
  return out;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os || !(os << text)) {
    throw DataError("cannot write '" + path.string() + "'");
  }
}

template <typename Writer>
void write_with(const fs::path& path, Writer&& writer) {
  std::ostringstream os;
  writer(os);
  write_text(path, os.str());
}

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) {
    throw ConfigError(what + " is required for this command");
  }
  if (!fs::is_regular_file(path)) {
    throw ConfigError(what + " '" + path + "' does not exist");
  }
}

/// Design rows at the observed extremes and mean of each covariate.
inline std::vector<VectorXd> representative_rows(const CovariateInfo& info) {
  std::vector<VectorXd> rows;
  rows.push_back(design_point(info, info.observed_mean));
  for (Index k = 0; k < info.observed_mean.size(); ++k) {
    for (double v : {info.observed_min(k), info.observed_max(k)}) {
      VectorXd raw = info.observed_mean;
      raw(k) = v;
      rows.push_back(design_point(info, raw));
    }
  }
  return rows;
}

inline int resolve_truncation(const JobConfig& cfg, Variant variant, int categories, int p,
                              const CovariateInfo& info) {
  if (cfg.truncation > 0) {
    return cfg.truncation;
  }
  const ModelSpec probe = build_spec(cfg.prior, variant, categories, p, 2);
  auto rng = RngStream::derive(cfg.seed, {0x7472756eULL});
  if (probe.lsbp) {
    return choose_truncation(probe.lsbp->gamma0, probe.lsbp->cov0, representative_rows(info),
                             cfg.truncation_mass, rng);
  }
  // DP sticks: E(V) = E(1 / (1 + alpha)) by Monte Carlo over the alpha prior.
  double mean_break = 0.0;
  constexpr int kDraws = 20000;
  for (int k = 0; k < kDraws; ++k) {
    mean_break += 1.0 / (1.0 + sample_gamma(probe.dp->a_alpha, probe.dp->b_alpha, rng));
  }
  mean_break /= kDraws;
  double tail = 1.0;
  for (int l = 1; l <= 100000; ++l) {
    tail *= 1.0 - mean_break;
    if (tail <= 1.0 - cfg.truncation_mass) {
      return std::max(l, 2);
    }
  }
  throw ConfigError("[model] truncation_mass unreachable below L = 100000");
}

inline CurveGrid job_grid(const JobConfig& cfg, const CovariateInfo& info) {
  const Index q = info.observed_mean.size();
  if (q == 0) {
    CurveGrid g;
    g.points.push_back(VectorXd::Ones(1));
    g.raw.resize(1, 0);
    return g;
  }
  Index k = 0;
  if (!cfg.grid.covariate.empty()) {
    const auto it = std::find(info.names.begin(), info.names.end(), cfg.grid.covariate);
    if (it == info.names.end()) {
      throw ConfigError("[grid] covariate '" + cfg.grid.covariate + "' is not in the data");
    }
    k = it - info.names.begin();
  }
  const double lo = std::isnan(cfg.grid.lo) ? info.observed_min(k) : cfg.grid.lo;
  const double hi = std::isnan(cfg.grid.hi) ? info.observed_max(k) : cfg.grid.hi;
  if (!(hi >= lo)) {
    throw ConfigError("[grid] need hi >= lo");
  }
  return first_order_grid(info, k, lo, hi, cfg.grid.points);
}

inline RunConfig job_run(const JobConfig& cfg, std::uint64_t seed) {
  RunConfig run = cfg.run;
  run.seed = seed;
  run.threads = cfg.threads;
  return run;
}

struct Manifest {
  json body;
  std::vector<std::string> outputs;

  Manifest(const JobConfig& cfg) {
    body["tool"] = "crlmix";
    body["version"] = kVersion;
    body["command"] = cfg.command;
    body["seed"] = cfg.seed;
    body["threads"] = cfg.threads;
    body["config"] = ptree_to_json(cfg.tree);
  }

  void add(const std::string& name) { outputs.push_back(name); }

  void write(const fs::path& dir) {
    body["outputs"] = outputs;
    write_text(dir / "manifest.json", body.dump(2) + "\n");
  }
};

inline std::string variant_file(Variant v) { return "draws_" + std::string(variant_name(v)) + ".jsonl"; }

inline json timing_json(const PosteriorDraws& d) {
  double total = 0.0;
  for (double s : d.seconds_per_1000) {
    total += s;
  }
  return {{"seconds_per_1000", d.seconds_per_1000}, {"seconds_total", total}};
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline PosteriorDraws fit_variant(const JobConfig& cfg, const IngestResult& in, Variant variant,
                                  std::uint64_t seed) {
  const int big_l = resolve_truncation(cfg, variant, in.data.categories(), in.data.p(), in.covariates);
  const ModelSpec spec = build_spec(cfg.prior, variant, in.data.categories(), in.data.p(), big_l);
  PosteriorDraws draws = run_chain(in.data, spec, job_run(cfg, seed));
  draws.meta.covariates = in.covariates;
  return draws;
}

inline void cmd_fit(const JobConfig& cfg, std::ostream& out) {
  require_file(cfg.input, "[job] input");
  const IngestResult in = ingest_csv(cfg.input, cfg.ingest);
  const int big_l = resolve_truncation(cfg, cfg.variant, in.data.categories(), in.data.p(), in.covariates);
  const ModelSpec spec = build_spec(cfg.prior, cfg.variant, in.data.categories(), in.data.p(), big_l);
  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  Manifest manifest(cfg);

  PosteriorDraws draws = run_chain(in.data, spec, job_run(cfg, cfg.seed));
  draws.meta.covariates = in.covariates;

  write_draws_file((dir / "draws.jsonl").string(), draws);
  manifest.add("draws.jsonl");
  write_text(dir / "spec.json", spec_to_json(spec).dump(2) + "\n");
  manifest.add("spec.json");
  const Diagnostics diag = diagnostics(draws, design_point(in.covariates, in.covariates.observed_mean));
  write_with(dir / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics_csv(os, diag, draws.meta); });
  manifest.add("diagnostics.csv");
  manifest.body["levels"] = in.levels;
  manifest.body["timing"] = timing_json(draws);
  manifest.write(dir);
  out << "fit: " << draws.draws.size() << " draws (L = " << big_l << ") written to "
      << (dir / "draws.jsonl").string() << '\n';
}

inline void cmd_curves(const JobConfig& cfg, std::ostream& out) {
  require_file(cfg.draws, "[curves] draws");
  const PosteriorDraws draws = read_draws_file(cfg.draws);
  const CurveGrid grid = job_grid(cfg, draws.meta.covariates);
  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  Manifest manifest(cfg);
  CurveOptions opts{cfg.lower, cfg.upper, false, cfg.threads};
  if (cfg.curve_kind != "conditional") {
    const CurveEstimate m = marginal_curves(draws, grid, opts);
    write_with(dir / "marginal.csv", [&](std::ostream& os) { write_curves_csv(os, m); });
    manifest.add("marginal.csv");
  }
  if (cfg.curve_kind != "marginal") {
    const CurveEstimate c = conditional_curves(draws, grid, opts);
    write_with(dir / "conditional.csv", [&](std::ostream& os) { write_curves_csv(os, c); });
    manifest.add("conditional.csv");
  }
  const int k = std::min(cfg.weight_top, draws.meta.truncation);
  const WeightProfile wp = weight_profile(draws, grid, k, cfg.threads);
  write_with(dir / "weights.csv", [&](std::ostream& os) {
    for (const auto& name : grid.names) {
      os << name << ',';
    }
    os << "rank,q025,q25,q50,q75,q975\n";
    for (std::size_t r = 0; r < grid.size(); ++r) {
      for (int h = 0; h < k; ++h) {
        for (Index c = 0; c < grid.raw.cols(); ++c) {
          os << format_number(grid.raw(static_cast<Index>(r), c)) << ',';
        }
        os << (h + 1);
        for (Index b = 0; b < wp.quantiles[r].cols(); ++b) {
          os << ',' << format_number(wp.quantiles[r](h, b));
        }
        os << '\n';
      }
    }
  });
  manifest.add("weights.csv");
  manifest.write(dir);
  out << "curves: " << grid.size() << " grid points from " << draws.draws.size() << " draws\n";
}

inline MatrixXd predict_rows(const JobConfig& cfg, Index q) {
  std::vector<std::vector<double>> rows;
  if (!cfg.predict_points.empty()) {
    std::istringstream is(cfg.predict_points);
    std::string row;
    while (std::getline(is, row, ';')) {
      if (trim(row).empty()) {
        continue;
      }
      rows.push_back(to_numbers("[predict] points", row));
    }
  } else if (!cfg.predict_file.empty()) {
    require_file(cfg.predict_file, "[predict] file");
    std::ifstream is(cfg.predict_file);
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
      if (trim(line).empty()) {
        continue;
      }
      if (header) {
        header = false;
        continue;
      }
      rows.push_back(to_numbers("[predict] file", line));
    }
  } else {
    throw ConfigError("[predict] needs points or file");
  }
  MatrixXd raw(static_cast<Index>(rows.size()), q);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<Index>(rows[r].size()) != q) {
      throw DataError("[predict] row " + std::to_string(r + 1) + " has " +
                      std::to_string(rows[r].size()) + " values, expected " + std::to_string(q));
    }
    raw.row(static_cast<Index>(r)) = VectorXd::Map(rows[r].data(), q).transpose();
  }
  return raw;
}

inline void cmd_predict(const JobConfig& cfg, std::ostream& out) {
  require_file(cfg.draws, "[curves] draws");
  const PosteriorDraws draws = read_draws_file(cfg.draws);
  const auto& info = draws.meta.covariates;
  const MatrixXd raw = predict_rows(cfg, draws.meta.p - 1);
  const CurveGrid grid = grid_from_rows(info, raw);
  const CurveEstimate m = marginal_curves(draws, grid, {cfg.lower, cfg.upper, false, cfg.threads});
  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  Manifest manifest(cfg);
  write_with(dir / "predict.csv", [&](std::ostream& os) {
    for (const auto& name : grid.names) {
      os << name << ',';
    }
    os << "category,predictive,mean,lo,hi\n";
    for (std::size_t r = 0; r < grid.size(); ++r) {
      const auto ys = posterior_predictive(
          draws, grid.points[r], RngStream::mix_keys({cfg.seed, static_cast<std::uint64_t>(r)}));
      const VectorXd pmf = empirical_pmf(ys, draws.meta.categories);
      for (int j = 0; j < draws.meta.categories; ++j) {
        for (Index c = 0; c < raw.cols(); ++c) {
          os << format_number(raw(static_cast<Index>(r), c)) << ',';
        }
        const auto rr = static_cast<Index>(r);
        os << (j + 1) << ',' << format_number(pmf(j)) << ',' << format_number(m.mean(rr, j)) << ','
           << format_number(m.lo(rr, j)) << ',' << format_number(m.hi(rr, j)) << '\n';
      }
    }
  });
  manifest.add("predict.csv");
  manifest.write(dir);
  out << "predict: " << grid.size() << " covariate rows\n";
}

inline void cmd_compare(const JobConfig& cfg, std::ostream& out) {
  require_file(cfg.input, "[job] input");
  const IngestResult in = ingest_csv(cfg.input, cfg.ingest);
  constexpr std::array<Variant, 3> variants{Variant::CommonWeights, Variant::CommonAtoms,
                                            Variant::General};
  // Build every spec first so configuration errors surface before any chain runs.
  for (Variant v : variants) {
    const int big_l = resolve_truncation(cfg, v, in.data.categories(), in.data.p(), in.covariates);
    (void)build_spec(cfg.prior, v, in.data.categories(), in.data.p(), big_l);
  }
  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  Manifest manifest(cfg);

  std::array<PosteriorDraws, 3> fits;
  std::array<std::exception_ptr, 3> failures{};
  {
    std::vector<std::jthread> chains;
    for (std::size_t k = 0; k < variants.size(); ++k) {
      chains.emplace_back([&, k] {
        try {
          const auto seed = RngStream::mix_keys({cfg.seed, kCompareTag, k});
          fits[k] = fit_variant(cfg, in, variants[k], seed);
        } catch (...) {
          failures[k] = std::current_exception();
        }
      });
    }
  }
  for (const auto& f : failures) {
    if (f) {
      std::rethrow_exception(f);
    }
  }

  std::vector<ComparisonRow> rows;
  json timing = json::object();
  for (std::size_t k = 0; k < variants.size(); ++k) {
    const auto name = std::string(variant_name(variants[k]));
    write_draws_file((dir / variant_file(variants[k])).string(), fits[k]);
    manifest.add(variant_file(variants[k]));
    const auto seed = RngStream::mix_keys({cfg.seed, kReplicateTag, k});
    const Eigen::MatrixXi reps = predictive_replicates(fits[k], in.data.x(), seed, cfg.threads);
    rows.push_back({name, gelfand_ghosh(reps, in.data)});
    timing[name] = timing_json(fits[k]);
  }
  write_with(dir / "comparison.csv", [&](std::ostream& os) { write_comparison_csv(os, rows); });
  manifest.add("comparison.csv");
  manifest.body["timing"] = timing;
  manifest.write(dir);
  std::ostringstream table;
  write_comparison_csv(table, rows);
  out << table.str();
}

// Simulation designs with [simulate] overrides.

inline std::array<double, 2> pair_override(const Section& s, const std::string& key,
                                           std::array<double, 2> fallback) {
  if (auto v = s.numbers(key)) {
    if (v->size() != 2) {
      throw ConfigError(s.where(key) + ": expected 2 numbers");
    }
    return {(*v)[0], (*v)[1]};
  }
  return fallback;
}

inline SimTruth simulate_design(const JobConfig& cfg) {
  ptree wrapper;
  wrapper.add_child("simulate", cfg.simulate);
  const Section s(wrapper, "simulate");
  auto rng = RngStream::derive(cfg.seed, {kSimulateTag});
  if (cfg.design == "example1") {
    Example1Params prm;
    for (int j = 0; j < 2; ++j) {
      prm.a[j] = pair_override(s, "a" + std::to_string(j + 1), prm.a[j]);
    }
    for (int k = 0; k < 3; ++k) {
      for (int j = 0; j < 2; ++j) {
        prm.b[k][j] = pair_override(s, "b" + std::to_string(k + 1) + "." + std::to_string(j + 1), prm.b[k][j]);
      }
    }
    const auto range = pair_override(s, "x_range", {prm.x_lo, prm.x_hi});
    prm.x_lo = range[0];
    prm.x_hi = range[1];
    return gen_example1(cfg.sim_n > 0 ? cfg.sim_n : 800, prm, rng);
  }
  if (cfg.design == "example2") {
    Example2Params prm;
    prm.beta0 = s.num("beta0", prm.beta0);
    prm.beta1 = s.num("beta1", prm.beta1);
    if (auto v = s.numbers("cutoffs")) {
      prm.cutoffs = *v;
    }
    const auto range = pair_override(s, "x_range", {prm.x_lo, prm.x_hi});
    prm.x_lo = range[0];
    prm.x_hi = range[1];
    try {
      prm.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("[simulate] ") + e.what());
    }
    return gen_example2(cfg.sim_n > 0 ? cfg.sim_n : 100, prm, rng);
  }
  if (cfg.design == "example3") {
    Example3Params prm;
    prm.c11 = s.num("c11", prm.c11);
    prm.c12 = s.num("c12", prm.c12);
    prm.a11 = s.num("a11", prm.a11);
    prm.a12 = s.num("a12", prm.a12);
    prm.c21 = s.num("c21", prm.c21);
    prm.c22 = s.num("c22", prm.c22);
    prm.a21 = s.num("a21", prm.a21);
    prm.a22 = s.num("a22", prm.a22);
    return gen_example3(cfg.sim_n > 0 ? cfg.sim_n : 200, prm, rng);
  }
  throw ConfigError("[simulate] design must be example1, example2 or example3, got '" + cfg.design + "'");
}

inline void cmd_simulate(const JobConfig& cfg, std::ostream& out) {
  const SimTruth sim = simulate_design(cfg);
  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  Manifest manifest(cfg);
  write_with(dir / "data.csv", [&](std::ostream& os) { write_dataset_csv(os, sim); });
  manifest.add("data.csv");
  const CurveGrid grid = job_grid(cfg, sim.covariates);
  const CurveEstimate truth = truth_curves(sim.truth, grid);
  write_with(dir / "truth.csv", [&](std::ostream& os) { write_curves_csv(os, truth); });
  manifest.add("truth.csv");
  manifest.body["design"] = sim.id;
  manifest.body["params"] = sim.params;
  manifest.write(dir);
  out << "simulate: " << sim.id << ", n = " << sim.data.n() << '\n';
}

inline void cmd_elicit(const JobConfig& cfg, std::ostream& out) {
  const auto& e = cfg.elicit;
  const int big_l = cfg.truncation > 0 ? cfg.truncation : kConservativeTruncation;
  if (e.mode == "baseline") {
    ModelSpec spec = [&] {
      try {
        return build_spec(cfg.prior, cfg.variant, e.categories, e.p, big_l);
      } catch (const std::invalid_argument& err) {
        throw ConfigError(std::string("[elicit] ") + err.what());
      }
    }();
    out << spec_to_json(spec).dump(2) << '\n';
    return;
  }
  if (e.mode != "monotone") {
    throw ConfigError("[elicit] mode must be baseline or monotone");
  }
  MonotonePrior mp;
  try {
    mp = monotone_prior_solve(e.a1, e.a2, e.a3, e.a4, e.direction, e.kappa0, e.nu0, 2);
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("[elicit] ") + err.what());
  }
  if (!uses_regression_atoms(cfg.variant)) {
    throw ConfigError("[elicit] monotone mode needs regression atoms (general or common-weights)");
  }
  ModelSpec spec = baseline_prior(e.categories, 2, cfg.variant, big_l);
  for (auto& a : spec.regression_atoms) {
    a.mu0 = mp.mu0;
    a.lambda0 = mp.lambda0;
    a.kappa0 = e.kappa0;
    a.nu0 = e.nu0;
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("[elicit] ") + err.what());
  }
  json doc;
  doc["mu0"] = to_json_vec(mp.mu0);
  doc["Lambda0"] = to_json_mat(mp.lambda0);
  doc["spec"] = spec_to_json(spec);
  out << doc.dump(2) << '\n';
}

} // namespace detail

/// Runs one job and maps failures to exit codes: 2 configuration,
/// 3 data, 4 numerical, 1 anything else.
inline int run_job(const JobConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    validate_job_config(cfg);
    if (cfg.command == "fit") {
      detail::cmd_fit(cfg, out);
    } else if (cfg.command == "curves") {
      detail::cmd_curves(cfg, out);
    } else if (cfg.command == "predict") {
      detail::cmd_predict(cfg, out);
    } else if (cfg.command == "compare") {
      detail::cmd_compare(cfg, out);
    } else if (cfg.command == "simulate") {
      detail::cmd_simulate(cfg, out);
    } else if (cfg.command == "elicit") {
      detail::cmd_elicit(cfg, out);
    } else if (cfg.command == "print-config") {
      out << default_config_text();
    } else {
      throw ConfigError("unknown command '" + cfg.command + "'");
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

} // namespace crlmix
