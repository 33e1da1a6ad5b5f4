#pragma once

// JSON forms of ModelSpec and the line-delimited draws file: one header
// record, then one retained draw per line.

#include "crlmix/errors.hpp"
#include "crlmix/priorspec.hpp"
#include "crlmix/state.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace crlmix {

using json = nlohmann::json;

inline constexpr std::string_view kDrawsFormat = "crlmix-draws";
inline constexpr int kDrawsVersion = 1;

// ---------------------------------------------------------------------------
// Eigen <-> JSON
// ---------------------------------------------------------------------------

inline json to_json_vec(const VectorXd& v) {
  json out = json::array();
  for (Index k = 0; k < v.size(); ++k) {
    out.push_back(v(k));
  }
  return out;
}

/// Row-major nested arrays.
inline json to_json_mat(const MatrixXd& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    out.push_back(to_json_vec(m.row(r).transpose()));
  }
  return out;
}

inline VectorXd vec_from_json(const json& j) {
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    v(static_cast<Index>(k)) = j[k].get<double>();
  }
  return v;
}

inline MatrixXd mat_from_json(const json& j) {
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows == 0 ? Index{0} : static_cast<Index>(j[0].size());
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (static_cast<Index>(row.size()) != cols) {
      throw std::invalid_argument("ragged matrix in JSON input");
    }
    for (Index c = 0; c < cols; ++c) {
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// ModelSpec
// ---------------------------------------------------------------------------

inline json spec_to_json(const ModelSpec& spec) {
  json j;
  j["variant"] = std::string(variant_name(spec.variant));
  j["categories"] = spec.categories;
  j["p"] = spec.p;
  j["truncation"] = spec.truncation;
  json atoms = json::array();
  for (const auto& a : spec.regression_atoms) {
    atoms.push_back({{"mu0", to_json_vec(a.mu0)},
                     {"Lambda0", to_json_mat(a.lambda0)},
                     {"kappa0", a.kappa0},
                     {"nu0", a.nu0}});
  }
  for (const auto& a : spec.scalar_atoms) {
    atoms.push_back({{"mu0", a.mu0}, {"nu0", a.nu0}, {"a0", a.a0}, {"b0", a.b0}});
  }
  j["atoms"] = atoms;
  if (spec.lsbp) {
    j["weights"] = {{"gamma0", to_json_vec(spec.lsbp->gamma0)},
                    {"Gamma0", to_json_mat(spec.lsbp->cov0)}};
  } else if (spec.dp) {
    j["weights"] = {{"a_alpha", spec.dp->a_alpha}, {"b_alpha", spec.dp->b_alpha}};
  }
  return j;
}

inline ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  spec.variant = parse_variant(j.at("variant").get<std::string>());
  spec.categories = j.at("categories").get<int>();
  spec.p = j.at("p").get<int>();
  spec.truncation = j.at("truncation").get<int>();
  for (const auto& a : j.at("atoms")) {
    if (uses_regression_atoms(spec.variant)) {
      spec.regression_atoms.push_back({vec_from_json(a.at("mu0")), mat_from_json(a.at("Lambda0")),
                                       a.at("kappa0").get<double>(), a.at("nu0").get<double>()});
    } else {
      spec.scalar_atoms.push_back({a.at("mu0").get<double>(), a.at("nu0").get<double>(),
                                   a.at("a0").get<double>(), a.at("b0").get<double>()});
    }
  }
  const auto& w = j.at("weights");
  if (uses_lsbp(spec.variant)) {
    spec.lsbp = LsbpWeightPrior{vec_from_json(w.at("gamma0")), mat_from_json(w.at("Gamma0"))};
  } else {
    spec.dp = DpWeightPrior{w.at("a_alpha").get<double>(), w.at("b_alpha").get<double>()};
  }
  spec.validate();
  return spec;
}

/// 64-bit FNV-1a of the compact JSON form.
inline std::uint64_t spec_hash(const ModelSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : spec_to_json(spec).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Draws file
// ---------------------------------------------------------------------------

inline json covariates_to_json(const CovariateInfo& c) {
  return {{"names", c.names},
          {"center", to_json_vec(c.center)},
          {"scale", to_json_vec(c.scale)},
          {"observed_mean", to_json_vec(c.observed_mean)},
          {"observed_min", to_json_vec(c.observed_min)},
          {"observed_max", to_json_vec(c.observed_max)}};
}

inline CovariateInfo covariates_from_json(const json& j) {
  CovariateInfo c;
  c.names = j.at("names").get<std::vector<std::string>>();
  c.center = vec_from_json(j.at("center"));
  c.scale = vec_from_json(j.at("scale"));
  c.observed_mean = vec_from_json(j.at("observed_mean"));
  c.observed_min = vec_from_json(j.at("observed_min"));
  c.observed_max = vec_from_json(j.at("observed_max"));
  return c;
}

inline json header_to_json(const DrawsMeta& m) {
  return {{"format", kDrawsFormat},
          {"version", kDrawsVersion},
          {"variant", variant_name(m.variant)},
          {"categories", m.categories},
          {"p", m.p},
          {"truncation", m.truncation},
          {"seed", m.seed},
          {"n_iter", m.n_iter},
          {"burn_in", m.burn_in},
          {"thin", m.thin},
          {"n_obs", m.n_obs},
          {"spec_hash", hex64(m.spec_hash)},
          {"covariates", covariates_to_json(m.covariates)}};
}

inline DrawsMeta header_from_json(const json& j) {
  if (j.value("format", std::string{}) != kDrawsFormat) {
    throw DataError("draws file: missing or unknown header record");
  }
  DrawsMeta m;
  m.variant = parse_variant(j.at("variant").get<std::string>());
  m.categories = j.at("categories").get<int>();
  m.p = j.at("p").get<int>();
  m.truncation = j.at("truncation").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.n_iter = j.at("n_iter").get<int>();
  m.burn_in = j.at("burn_in").get<int>();
  m.thin = j.at("thin").get<int>();
  m.n_obs = j.at("n_obs").get<long>();
  m.spec_hash = std::stoull(j.at("spec_hash").get<std::string>(), nullptr, 16);
  m.covariates = covariates_from_json(j.at("covariates"));
  return m;
}

/// beta is stored per category as an L x p array (one row per component).
inline json draw_to_json(const DrawRecord& d, const DrawsMeta& m) {
  json j;
  j["iteration"] = d.iteration;
  if (uses_regression_atoms(m.variant)) {
    json beta = json::array();
    for (const auto& b : d.beta) {
      beta.push_back(to_json_mat(b.transpose()));
    }
    j["beta"] = beta;
    json mu = json::array();
    json sigma = json::array();
    for (std::size_t k = 0; k < d.mu.size(); ++k) {
      mu.push_back(to_json_vec(d.mu[k]));
      sigma.push_back(to_json_mat(d.sigma[k]));
    }
    j["mu"] = mu;
    j["Sigma"] = sigma;
  } else {
    j["theta"] = to_json_mat(d.theta_atoms);
    j["mu"] = to_json_vec(d.mu_scalar);
    j["sigma2"] = to_json_vec(d.sigma2);
  }
  if (uses_lsbp(m.variant)) {
    j["gamma"] = to_json_mat(d.gamma.transpose());
  } else {
    j["V"] = to_json_vec(d.stick);
    j["alpha"] = d.alpha;
  }
  j["counts"] = d.counts;
  return j;
}

inline DrawRecord draw_from_json(const json& j, const DrawsMeta& m) {
  DrawRecord d;
  d.iteration = j.at("iteration").get<long>();
  if (uses_regression_atoms(m.variant)) {
    for (const auto& b : j.at("beta")) {
      MatrixXd rows = mat_from_json(b);
      d.beta.emplace_back(rows.transpose());
    }
    for (const auto& v : j.at("mu")) {
      d.mu.push_back(vec_from_json(v));
    }
    for (const auto& s : j.at("Sigma")) {
      d.sigma.push_back(mat_from_json(s));
    }
  } else {
    d.theta_atoms = mat_from_json(j.at("theta"));
    d.mu_scalar = vec_from_json(j.at("mu"));
    d.sigma2 = vec_from_json(j.at("sigma2"));
  }
  if (uses_lsbp(m.variant)) {
    const MatrixXd g = mat_from_json(j.at("gamma"));
    d.gamma = g.rows() == 0 ? MatrixXd(m.p, 0) : MatrixXd(g.transpose());
  } else {
    d.stick = vec_from_json(j.at("V"));
    d.alpha = j.at("alpha").get<double>();
  }
  d.counts = j.at("counts").get<std::vector<int>>();
  return d;
}

inline void write_draws(std::ostream& os, const PosteriorDraws& draws) {
  os << header_to_json(draws.meta).dump() << '\n';
  for (const auto& d : draws.draws) {
    os << draw_to_json(d, draws.meta).dump() << '\n';
  }
}

inline void write_draws_file(const std::string& path, const PosteriorDraws& draws) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw DataError("cannot open '" + path + "' for writing");
  }
  write_draws(os, draws);
  if (!os) {
    throw DataError("write to '" + path + "' failed");
  }
}

inline PosteriorDraws read_draws(std::istream& is, const std::string& origin = "<stream>") {
  PosteriorDraws out;
  std::string line;
  long line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    json j;
    try {
      j = json::parse(line);
      if (!have_header) {
        out.meta = header_from_json(j);
        have_header = true;
      } else {
        out.draws.push_back(draw_from_json(j, out.meta));
      }
    } catch (const json::exception& e) {
      throw DataError(origin + ":" + std::to_string(line_no) + ": malformed record (" + e.what() +
                      ")");
    }
  }
  if (!have_header) {
    throw DataError(origin + ": empty draws file");
  }
  return out;
}

inline PosteriorDraws read_draws_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw DataError("cannot open draws file '" + path + "'");
  }
  return read_draws(is, path);
}

} // namespace crlmix
