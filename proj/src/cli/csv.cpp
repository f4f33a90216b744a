#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "assoc/cli.hpp"

namespace assoc::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

struct Rows {
  std::vector<std::vector<std::string>> cells;
  std::vector<int> line_no;
};

Rows read_rows(std::istream& in) {
  Rows rows;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    rows.cells.push_back(split(line, ','));
    rows.line_no.push_back(n);
  }
  if (rows.cells.empty()) throw DataError("csv: empty file");
  return rows;
}

[[noreturn]] void bad(int line, const std::string& what) {
  std::ostringstream os;
  os << "csv line " << line << ": " << what;
  throw DataError(os.str());
}

double number(const std::string& cell, int line) {
  if (cell.empty()) bad(line, "empty cell");
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || !std::isfinite(v)) {
    bad(line, "non-numeric cell '" + cell + "'");
  }
  return v;
}

Vector feature(const std::string& cell, int line) {
  const auto parts = split(cell, ';');
  if (parts.empty()) bad(line, "empty feature vector");
  Vector v(static_cast<Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v[static_cast<Index>(i)] = number(parts[i], line);
  return v;
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  return in;
}

}  // namespace

ConditionalDataset read_conditional_csv(std::istream& in) {
  const Rows rows = read_rows(in);
  const auto& header = rows.cells[0];
  if (header.empty() || header[0] != "k") bad(rows.line_no[0], "first column must be 'k'");
  std::vector<std::size_t> vcols, zcols;
  std::optional<std::size_t> wcol;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (h == "weight") {
      wcol = c;
    } else if (!h.empty() && h[0] == 'v') {
      vcols.push_back(c);
    } else if (!h.empty() && h[0] == 'z') {
      zcols.push_back(c);
    } else {
      bad(rows.line_no[0], "unrecognized column '" + h + "'");
    }
  }
  if (vcols.empty() || zcols.empty()) bad(rows.line_no[0], "need at least one v and one z column");
  if (rows.cells.size() < 2) bad(rows.line_no[0], "no data rows");

  std::map<long, Vector> level_v;
  std::map<long, std::vector<std::pair<Vector, double>>> obs;
  for (std::size_t r = 1; r < rows.cells.size(); ++r) {
    const auto& row = rows.cells[r];
    const int ln = rows.line_no[r];
    if (row.size() != header.size()) bad(ln, "wrong number of cells");
    const double kd = number(row[0], ln);
    if (kd < 0 || kd != std::floor(kd)) bad(ln, "stratum index must be a nonnegative integer");
    const long k = static_cast<long>(kd);
    Vector v(static_cast<Index>(vcols.size()));
    for (std::size_t i = 0; i < vcols.size(); ++i) v[static_cast<Index>(i)] = number(row[vcols[i]], ln);
    Vector z(static_cast<Index>(zcols.size()));
    for (std::size_t i = 0; i < zcols.size(); ++i) z[static_cast<Index>(i)] = number(row[zcols[i]], ln);
    const double w = wcol ? number(row[*wcol], ln) : 1.0;
    if (w < 0.0) bad(ln, "negative weight");
    auto it = level_v.find(k);
    if (it == level_v.end()) {
      if (k == 0 && !v.isZero(0.0)) bad(ln, "stratum 0 must have an all-zero v");
      level_v.emplace(k, v);
    } else if (it->second != v) {
      bad(ln, "v is not constant within stratum " + std::to_string(k));
    }
    obs[k].emplace_back(std::move(z), w);
  }
  const long levels = static_cast<long>(level_v.size());
  if (!level_v.count(0)) throw DataError("csv: missing stratum 0");
  if (level_v.rbegin()->first != levels - 1) {
    throw DataError("csv: stratum indices must run 0..K without gaps");
  }
  if (levels < 2) throw DataError("csv: need at least two strata");
  Matrix v_levels(static_cast<Index>(vcols.size()), levels);
  std::vector<Stratum> strata;
  for (long k = 0; k < levels; ++k) {
    v_levels.col(k) = level_v[k];
    const auto& o = obs[k];
    Stratum s;
    s.z.resize(static_cast<Index>(zcols.size()), static_cast<Index>(o.size()));
    s.weight.resize(static_cast<Index>(o.size()));
    for (std::size_t i = 0; i < o.size(); ++i) {
      s.z.col(static_cast<Index>(i)) = o[i].first;
      s.weight[static_cast<Index>(i)] = o[i].second;
    }
    if (!(s.weight.sum() > 0.0)) throw DataError("csv: stratum " + std::to_string(k) + " has zero total weight");
    strata.push_back(std::move(s));
  }
  try {
    return ConditionalDataset(std::move(v_levels), std::move(strata));
  } catch (const ArgumentError& e) {
    throw DataError(std::string("csv: ") + e.what());
  }
}

ConditionalDataset read_conditional_csv(const std::string& path) {
  auto in = open(path);
  return read_conditional_csv(in);
}

ContingencyTable read_table_csv(std::istream& in) {
  const Rows rows = read_rows(in);
  const auto& header = rows.cells[0];
  const Index cols = static_cast<Index>(header.size()) - 1;
  const Index nrows = static_cast<Index>(rows.cells.size()) - 1;
  if (cols < 2 || nrows < 2) throw DataError("csv: a table needs at least 2 rows and 2 columns");
  ContingencyTable t;
  for (Index k = 0; k < cols; ++k) {
    const Vector v = feature(header[static_cast<std::size_t>(k + 1)], rows.line_no[0]);
    if (k == 0) t.v_support.resize(v.size(), cols);
    if (v.size() != t.v_support.rows()) bad(rows.line_no[0], "column feature vectors differ in length");
    t.v_support.col(k) = v;
  }
  t.counts.resize(nrows, cols);
  for (Index j = 0; j < nrows; ++j) {
    const auto& row = rows.cells[static_cast<std::size_t>(j + 1)];
    const int ln = rows.line_no[static_cast<std::size_t>(j + 1)];
    if (static_cast<Index>(row.size()) != cols + 1) bad(ln, "wrong number of cells");
    const Vector z = feature(row[0], ln);
    if (j == 0) t.z_support.resize(z.size(), nrows);
    if (z.size() != t.z_support.rows()) bad(ln, "row feature vectors differ in length");
    t.z_support.col(j) = z;
    for (Index k = 0; k < cols; ++k) t.counts(j, k) = number(row[static_cast<std::size_t>(k + 1)], ln);
  }
  t.validate();
  return t;
}

ContingencyTable read_table_csv(const std::string& path) {
  auto in = open(path);
  return read_table_csv(in);
}

FiniteJoint read_joint_csv(const std::string& path) {
  ContingencyTable t = read_table_csv(path);
  try {
    return FiniteJoint(std::move(t.counts), std::move(t.z_support), std::move(t.v_support));
  } catch (const ArgumentError& e) {
    throw DataError(std::string("joint csv: ") + e.what());
  }
}

namespace {
std::string encode(const Vector& v) {
  std::ostringstream os;
  os.precision(17);
  for (Index i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
  return os.str();
}
}  // namespace

void write_table_csv(std::ostream& out, const Matrix& values, const Matrix& z_support,
                     const Matrix& v_support) {
  out.precision(17);
  out << "z\\v";
  for (Index k = 0; k < v_support.cols(); ++k) out << ',' << encode(v_support.col(k));
  out << '\n';
  for (Index j = 0; j < values.rows(); ++j) {
    out << encode(z_support.col(j));
    for (Index k = 0; k < values.cols(); ++k) out << ',' << values(j, k);
    out << '\n';
  }
}

bool looks_conditional(const std::string& path) {
  auto in = open(path);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    return trim(line.substr(0, line.find(','))) == "k";
  }
  throw DataError("csv: empty file");
}

}  // namespace assoc::cli
