#include "cgmm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "cgmm/error.hpp"

namespace cgmm {

EnvironmentLabels::EnvironmentLabels(std::vector<std::string> labels) : labels_(std::move(labels)) {
  levels_ = labels_;
  std::sort(levels_.begin(), levels_.end());
  levels_.erase(std::unique(levels_.begin(), levels_.end()), levels_.end());
  if (levels_.size() < 2) {
    throw InvalidInput("environment labels need at least two distinct values, got " +
                       std::to_string(levels_.size()));
  }
  counts_.assign(levels_.size(), 0);
  codes_.reserve(labels_.size());
  for (const auto& label : labels_) {
    const auto it = std::lower_bound(levels_.begin(), levels_.end(), label);
    const auto code = static_cast<std::size_t>(it - levels_.begin());
    codes_.push_back(code);
    ++counts_[code];
  }
}

namespace {

void RequireFinite(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (!m.allFinite()) throw InvalidInput(std::string(what) + " contains NaN or infinite values");
}

}  // namespace

Dataset::Dataset(Matrix exposures, Vector response, Matrix instruments, ColumnNames names,
                 std::optional<EnvironmentLabels> labels, std::optional<Matrix> raw_instruments)
    : x_(std::move(exposures)),
      y_(std::move(response)),
      e_(std::move(instruments)),
      raw_e_(raw_instruments ? std::move(*raw_instruments) : e_),
      names_(std::move(names)),
      labels_(std::move(labels)) {
  const Index n = x_.rows();
  if (n < 2) throw InvalidInput("dataset needs at least 2 rows, got " + std::to_string(n));
  if (x_.cols() < 1) throw InvalidInput("dataset needs at least one exposure column");
  if (e_.cols() < 1) throw InvalidInput("dataset needs at least one instrument column");
  if (y_.size() != n || e_.rows() != n) {
    throw InvalidInput("row count mismatch: X has " + std::to_string(n) + ", Y has " +
                       std::to_string(y_.size()) + ", E has " + std::to_string(e_.rows()));
  }
  if (raw_e_.rows() != n || raw_e_.cols() != e_.cols()) {
    throw InvalidInput("raw instrument shape does not match E");
  }
  if (labels_ && static_cast<Index>(labels_->size()) != n) {
    throw InvalidInput("environment label count does not match row count");
  }
  RequireFinite(x_, "X");
  RequireFinite(y_, "Y");
  RequireFinite(e_, "E");

  if (names_.exposures.empty()) {
    for (Index j = 0; j < x_.cols(); ++j) names_.exposures.push_back("x" + std::to_string(j + 1));
  }
  if (names_.instruments.empty()) {
    for (Index j = 0; j < e_.cols(); ++j) names_.instruments.push_back("e" + std::to_string(j + 1));
  }
  if (static_cast<Index>(names_.exposures.size()) != x_.cols() ||
      static_cast<Index>(names_.instruments.size()) != e_.cols()) {
    throw InvalidInput("column name count does not match matrix shape");
  }
}

Dataset Dataset::select_instruments(const std::vector<Index>& columns) const {
  if (columns.empty()) throw InvalidInput("instrument selection is empty");
  Matrix e(n(), static_cast<Index>(columns.size()));
  Matrix raw(n(), static_cast<Index>(columns.size()));
  ColumnNames names = names_;
  names.instruments.clear();
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const Index c = columns[k];
    if (c < 0 || c >= q()) throw InvalidInput("instrument column " + std::to_string(c) + " out of range");
    e.col(static_cast<Index>(k)) = e_.col(c);
    raw.col(static_cast<Index>(k)) = raw_e_.col(c);
    names.instruments.push_back(names_.instruments[static_cast<std::size_t>(c)]);
  }
  return Dataset(x_, y_, std::move(e), std::move(names), std::nullopt, std::move(raw));
}

Dataset Dataset::center_xy() const {
  Vector y = y_.array() - y_.mean();
  return Dataset(center_columns(x_), std::move(y), e_, names_, labels_, raw_e_);
}

Matrix encode_environments(const EnvironmentLabels& labels) {
  const auto n = static_cast<Index>(labels.size());
  const auto r = static_cast<Index>(labels.num_levels());
  const double dn = static_cast<double>(n);
  Matrix out(n, r - 1);
  for (Index j = 0; j < r - 1; ++j) {
    const double share = static_cast<double>(labels.count(static_cast<std::size_t>(j))) / dn;
    const double in_env = 1.0 - share;
    const double out_env = -share;
    for (Index i = 0; i < n; ++i) {
      out(i, j) = labels.codes()[static_cast<std::size_t>(i)] == static_cast<std::size_t>(j) ? in_env : out_env;
    }
  }
  return out;
}

Matrix rowwise_kronecker(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw InvalidInput("rowwise_kronecker: row counts differ (" + std::to_string(a.rows()) + " vs " +
                       std::to_string(b.rows()) + ")");
  }
  const Index q = b.cols();
  Matrix out(a.rows(), a.cols() * q);
  for (Index j = 0; j < a.cols(); ++j) {
    out.middleCols(j * q, q) = b.array().colwise() * a.col(j).array();
  }
  return out;
}

Matrix center_columns(const Matrix& m) {
  if (m.rows() < 1) throw InvalidInput("center_columns: empty matrix");
  return m.rowwise() - m.colwise().mean();
}

Dataset make_environment_dataset(Matrix exposures, Vector response, EnvironmentLabels labels,
                                 ColumnNames names) {
  Matrix e = encode_environments(labels);
  if (names.instruments.empty()) {
    for (std::size_t j = 0; j + 1 < labels.num_levels(); ++j) {
      names.instruments.push_back("env=" + labels.levels()[j]);
    }
  }
  return Dataset(std::move(exposures), std::move(response), std::move(e), std::move(names),
                 std::move(labels));
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> SplitRecord(const std::string& line, std::size_t row) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? cur : Trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", row, fields.size() + 1);
  fields.push_back(was_quoted ? cur : Trim(cur));
  return fields;
}

double ParseNumber(const std::string& cell, const std::string& column, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ParseError("non-numeric value '" + cell + "' in column '" + column + "'", row, col);
  }
  if (!std::isfinite(value)) {
    throw ParseError("non-finite value '" + cell + "' in column '" + column + "'", row, col);
  }
  return value;
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvRoles& roles) {
  if (roles.exposures.empty()) throw InvalidInput("at least one exposure column is required");
  if (roles.environment.has_value() == !roles.instruments.empty()) {
    throw InvalidInput("give either instrument columns or one environment column");
  }

  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> record_rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (Trim(line).empty()) continue;
    records.push_back(SplitRecord(line, row));
    record_rows.push_back(row);
  }
  if (records.empty()) throw ParseError("empty file", 0, 0);

  const auto& header = records.front();
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.size(); ++c) index.emplace(header[c], c);
  auto locate = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw ParseError("missing column '" + name + "'", record_rows.front(), 0);
    return it->second;
  };

  const std::size_t y_col = locate(roles.response);
  std::vector<std::size_t> x_cols;
  for (const auto& name : roles.exposures) x_cols.push_back(locate(name));
  std::vector<std::size_t> e_cols;
  for (const auto& name : roles.instruments) e_cols.push_back(locate(name));
  const std::optional<std::size_t> env_col =
      roles.environment ? std::optional<std::size_t>(locate(*roles.environment)) : std::nullopt;

  const auto n = static_cast<Index>(records.size() - 1);
  if (n == 0) throw ParseError("no data rows after header", record_rows.front(), 0);
  Matrix x(n, static_cast<Index>(x_cols.size()));
  Vector y(n);
  Matrix raw(n, static_cast<Index>(e_cols.size()));
  std::vector<std::string> env;

  for (Index i = 0; i < n; ++i) {
    const auto& rec = records[static_cast<std::size_t>(i) + 1];
    const std::size_t r = record_rows[static_cast<std::size_t>(i) + 1];
    if (rec.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(rec.size()),
                       r, 0);
    }
    y(i) = ParseNumber(rec[y_col], header[y_col], r, y_col + 1);
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      x(i, static_cast<Index>(k)) = ParseNumber(rec[x_cols[k]], header[x_cols[k]], r, x_cols[k] + 1);
    }
    for (std::size_t k = 0; k < e_cols.size(); ++k) {
      raw(i, static_cast<Index>(k)) = ParseNumber(rec[e_cols[k]], header[e_cols[k]], r, e_cols[k] + 1);
    }
    if (env_col) {
      if (rec[*env_col].empty()) throw ParseError("empty environment label", r, *env_col + 1);
      env.push_back(rec[*env_col]);
    }
  }

  ColumnNames names{roles.response, roles.exposures, roles.instruments};
  if (env_col) {
    names.instruments.clear();
    return make_environment_dataset(std::move(x), std::move(y), EnvironmentLabels(std::move(env)),
                                    std::move(names));
  }
  Matrix centered = center_columns(raw);
  return Dataset(std::move(x), std::move(y), std::move(centered), std::move(names), std::nullopt,
                 std::move(raw));
}

Dataset load_csv(const std::string& path, const CsvRoles& roles) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw InvalidInput("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse_csv(buffer.str(), roles);
}

namespace {

std::string Shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string Quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string to_csv(const Dataset& data) {
  const auto& names = data.names();
  const bool env = data.labels().has_value();
  std::string out = Quote(names.response);
  for (const auto& name : names.exposures) out += "," + Quote(name);
  if (env) {
    out += ",env";
  } else {
    for (const auto& name : names.instruments) out += "," + Quote(name);
  }
  out += "\n";
  for (Index i = 0; i < data.n(); ++i) {
    out += Shortest(data.Y()(i));
    for (Index j = 0; j < data.p(); ++j) out += "," + Shortest(data.X()(i, j));
    if (env) {
      out += "," + Quote(data.labels()->labels()[static_cast<std::size_t>(i)]);
    } else {
      for (Index j = 0; j < data.q(); ++j) out += "," + Shortest(data.raw_instruments()(i, j));
    }
    out += "\n";
  }
  return out;
}

}  // namespace cgmm
