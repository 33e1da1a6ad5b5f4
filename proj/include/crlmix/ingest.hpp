#pragma once

// CSV ingestion: a header row, one integer response column (default "y"),
// numeric covariate columns. An intercept is prepended to the design.

#include "crlmix/core.hpp"
#include "crlmix/errors.hpp"
#include "crlmix/state.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace crlmix {

struct IngestOptions {
  std::string response = "y";
  bool standardize = false; // continuous covariates to mean 0, sd 1
};

struct IngestResult {
  OrdinalDataset data;
  CovariateInfo covariates;
  std::vector<long> levels; // levels[j - 1] = original response value of category j
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    cells.push_back(trim(cell));
  }
  if (!line.empty() && line.back() == ',') {
    cells.emplace_back();
  }
  return cells;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) {
    return false;
  }
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

inline bool parse_long(const std::string& s, long& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') {
    ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return !s.empty() && ec == std::errc{} && ptr == last;
}

} // namespace detail

inline IngestResult ingest_csv(std::istream& is, const IngestOptions& opts = {},
                               const std::string& origin = "<input>") {
  std::string line;
  std::vector<std::string> header;
  while (header.empty() && std::getline(is, line)) {
    if (!detail::trim(line).empty()) {
      header = detail::split_csv_line(line);
    }
  }
  if (header.empty()) {
    throw DataError(origin + ": empty file (no header row)");
  }
  const auto ycol_it = std::find(header.begin(), header.end(), opts.response);
  if (ycol_it == header.end()) {
    throw DataError(origin + ": missing response column '" + opts.response + "'");
  }
  const auto ycol = static_cast<std::size_t>(ycol_it - header.begin());
  std::vector<std::size_t> xcols;
  std::vector<std::string> names;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k != ycol) {
      if (header[k].empty()) {
        throw DataError(origin + ": header column " + std::to_string(k + 1) + " has no name");
      }
      xcols.push_back(k);
      names.push_back(header[k]);
    }
  }

  std::vector<long> raw_y;
  std::vector<std::vector<double>> rows;
  long row_no = 1;
  while (std::getline(is, line)) {
    ++row_no;
    if (detail::trim(line).empty()) {
      continue;
    }
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(origin + ": row " + std::to_string(row_no) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    long yv = 0;
    if (!detail::parse_long(cells[ycol], yv)) {
      throw DataError(origin + ": row " + std::to_string(row_no) + ", column '" + opts.response +
                      "': '" + cells[ycol] + "' is not an integer category");
    }
    raw_y.push_back(yv);
    std::vector<double> xs;
    xs.reserve(xcols.size());
    for (std::size_t k = 0; k < xcols.size(); ++k) {
      double v = 0.0;
      if (!detail::parse_double(cells[xcols[k]], v)) {
        throw DataError(origin + ": row " + std::to_string(row_no) + ", column '" + names[k] +
                        "': '" + cells[xcols[k]] + "' is not numeric");
      }
      xs.push_back(v);
    }
    rows.push_back(std::move(xs));
  }
  if (raw_y.empty()) {
    throw DataError(origin + ": no data rows");
  }

  std::vector<long> levels = raw_y;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (levels.size() < 2) {
    throw DataError(origin + ": column '" + opts.response +
                    "' has a single category; at least 2 are required");
  }
  std::map<long, int> relabel;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    relabel[levels[j]] = static_cast<int>(j) + 1;
  }

  const auto n = static_cast<Index>(raw_y.size());
  const auto q = static_cast<Index>(xcols.size());
  MatrixXd raw(n, q);
  std::vector<int> y(raw_y.size());
  for (Index i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = relabel[raw_y[static_cast<std::size_t>(i)]];
    for (Index k = 0; k < q; ++k) {
      raw(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
  }

  CovariateInfo info;
  info.names = names;
  info.observed_mean = raw.colwise().mean().transpose();
  info.observed_min = raw.colwise().minCoeff().transpose();
  info.observed_max = raw.colwise().maxCoeff().transpose();
  info.center = VectorXd::Zero(q);
  info.scale = VectorXd::Ones(q);
  if (opts.standardize && n > 1) {
    for (Index k = 0; k < q; ++k) {
      std::vector<double> col(raw.col(k).begin(), raw.col(k).end());
      std::sort(col.begin(), col.end());
      const auto distinct = std::unique(col.begin(), col.end()) - col.begin();
      if (distinct <= 2) {
        continue; // binary indicators stay as they are
      }
      const double mean = info.observed_mean(k);
      const double sd = std::sqrt((raw.col(k).array() - mean).square().sum() / (n - 1.0));
      if (sd > 0.0) {
        info.center(k) = mean;
        info.scale(k) = sd;
      }
    }
  }

  MatrixXd x(n, q + 1);
  x.col(0).setOnes();
  for (Index k = 0; k < q; ++k) {
    x.col(k + 1) = (raw.col(k).array() - info.center(k)) / info.scale(k);
  }
  return IngestResult{OrdinalDataset(std::move(y), std::move(x), static_cast<int>(levels.size())),
                      std::move(info), std::move(levels)};
}

inline IngestResult ingest_csv(const std::string& path, const IngestOptions& opts = {}) {
  std::ifstream is(path);
  if (!is) {
    throw DataError("cannot open data file '" + path + "'");
  }
  return ingest_csv(is, opts, path);
}

} // namespace crlmix
