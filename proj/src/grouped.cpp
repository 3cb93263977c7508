#include "phidep/grouped.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "phidep/errors.hpp"

namespace phidep {

GroupStructure::GroupStructure(std::vector<int> s) : sizes(std::move(s)) {
  if (sizes.empty()) throw ValidationError("group structure needs at least one group");
  for (int d : sizes)
    if (d < 1) throw ValidationError("group sizes must be >= 1");
}

GroupStructure GroupStructure::parse(const std::string& csv) {
  std::vector<int> sizes;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      int v = std::stoi(tok, &pos);
      while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
      if (pos != tok.size()) throw std::invalid_argument(tok);
      sizes.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError("unparseable group sizes '" + csv + "'");
    }
  }
  return GroupStructure(std::move(sizes));
}

int GroupStructure::dimension() const {
  int q = 0;
  for (int d : sizes) q += d;
  return q;
}

int GroupStructure::offset(int group) const {
  int off = 0;
  for (int i = 0; i < group; ++i) off += sizes[static_cast<std::size_t>(i)];
  return off;
}

std::string GroupStructure::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(sizes[i]);
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    std::size_t b = cell.find_first_not_of(" \t\r");
    std::size_t e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

bool is_missing_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "na";
}

bool looks_like_iso_date(const std::string& s) {
  if (s.size() < 10) return false;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (!std::isdigit(static_cast<unsigned char>(s[static_cast<std::size_t>(i)]))) return false;
  return s[4] == '-' && s[7] == '-';
}

bool parse_double(const std::string& s, double* out) {
  try {
    std::size_t pos = 0;
    *out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

GroupedSample load_csv(const std::string& path, const GroupStructure& groups, MissingPolicy missing) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
  auto header = split_csv_line(line);
  if (header.empty()) throw ValidationError("'" + path + "' has an empty header");

  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw ValidationError("'" + path + "' has no data rows");

  // A leading date column is identified by its values, not the header.
  bool has_dates = looks_like_iso_date(rows.front().front());
  std::size_t first_col = has_dates ? 1 : 0;
  const int q = groups.dimension();
  if (header.size() - first_col != static_cast<std::size_t>(q))
    throw ValidationError("groups " + groups.to_string() + " need " + std::to_string(q) +
                          " data columns, CSV has " + std::to_string(header.size() - first_col));

  GroupedSample out;
  out.groups = groups;
  out.column_labels.assign(header.begin() + static_cast<std::ptrdiff_t>(first_col), header.end());
  std::vector<std::vector<double>> kept;
  for (std::size_t rix = 0; rix < rows.size(); ++rix) {
    const auto& cells = rows[rix];
    std::vector<double> vals(static_cast<std::size_t>(q));
    bool any_missing = false;
    for (int j = 0; j < q; ++j) {
      const std::string& s = cells[first_col + static_cast<std::size_t>(j)];
      if (is_missing_token(s)) {
        any_missing = true;
        continue;
      }
      if (!parse_double(s, &vals[static_cast<std::size_t>(j)]))
        throw ValidationError(path + ": non-numeric cell '" + s + "' in data row " + std::to_string(rix + 1));
      if (std::isnan(vals[static_cast<std::size_t>(j)])) any_missing = true;
    }
    if (any_missing) {
      if (missing == MissingPolicy::Error)
        throw ValidationError(path + ": missing value in data row " + std::to_string(rix + 1));
      ++out.dropped_rows;
      continue;
    }
    kept.push_back(std::move(vals));
    if (has_dates) out.row_labels.push_back(cells.front());
  }
  if (kept.size() < 2) throw ValidationError("'" + path + "' has fewer than 2 usable rows");

  out.data.resize(static_cast<Eigen::Index>(kept.size()), q);
  for (std::size_t i = 0; i < kept.size(); ++i)
    for (int j = 0; j < q; ++j)
      out.data(static_cast<Eigen::Index>(i), j) = kept[i][static_cast<std::size_t>(j)];
  return out;
}

Eigen::MatrixXd log_returns(const Eigen::MatrixXd& prices) {
  if (prices.rows() < 2) throw ValidationError("log returns need at least 2 price rows");
  if (!(prices.array() > 0.0).all()) throw ValidationError("log returns require positive prices");
  Eigen::MatrixXd out(prices.rows() - 1, prices.cols());
  for (Eigen::Index t = 0; t + 1 < prices.rows(); ++t)
    out.row(t) = (prices.row(t + 1).array() / prices.row(t).array()).log();
  return out;
}

GroupedSample log_returns(const GroupedSample& prices) {
  GroupedSample out = prices;
  out.data = log_returns(prices.data);
  if (!prices.row_labels.empty())
    out.row_labels.assign(prices.row_labels.begin() + 1, prices.row_labels.end());
  return out;
}

Eigen::MatrixXd normal_scores(const Eigen::MatrixXd& data, TiePolicy ties) {
  const Eigen::Index n = data.rows();
  if (n < 2) throw ValidationError("normal scores need at least 2 rows");
  Eigen::MatrixXd z(n, data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    auto r = ranks(data.col(j), ties);
    for (Eigen::Index i = 0; i < n; ++i)
      z(i, j) = normal_quantile(r[static_cast<std::size_t>(i)] / (static_cast<double>(n) + 1.0));
  }
  return z;
}

void BlockCorrelationMatrix::validate() const {
  const Eigen::Index q = r.rows();
  if (r.cols() != q || q == 0) throw ValidationError("correlation matrix must be square");
  if (groups.dimension() != static_cast<int>(q))
    throw ValidationError("group sizes sum to " + std::to_string(groups.dimension()) +
                          " but matrix is " + std::to_string(q) + "-dimensional");
  for (Eigen::Index i = 0; i < q; ++i) {
    if (std::fabs(r(i, i) - 1.0) > 1e-12) throw ValidationError("correlation diagonal must be 1");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::fabs(r(i, j) - r(j, i)) > 1e-12) throw ValidationError("correlation matrix must be symmetric");
      if (std::fabs(r(i, j)) > 1.0 + 1e-12) throw ValidationError("correlation entries must lie in [-1,1]");
    }
  }
}

Eigen::MatrixXd BlockCorrelationMatrix::block(int i) const {
  int off = groups.offset(i), d = groups.sizes[static_cast<std::size_t>(i)];
  return r.block(off, off, d, d);
}

Eigen::MatrixXd BlockCorrelationMatrix::block_diagonal() const {
  Eigen::MatrixXd r0 = Eigen::MatrixXd::Zero(r.rows(), r.cols());
  for (int i = 0; i < groups.group_count(); ++i) {
    int off = groups.offset(i), d = groups.sizes[static_cast<std::size_t>(i)];
    r0.block(off, off, d, d) = r.block(off, off, d, d);
  }
  return r0;
}

std::string BlockCorrelationMatrix::to_json() const {
  nlohmann::json j;
  j["sizes"] = groups.sizes;
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < r.cols(); ++k) row.push_back(r(i, k));
    rows.push_back(std::move(row));
  }
  j["matrix"] = std::move(rows);
  return j.dump(2);
}

BlockCorrelationMatrix BlockCorrelationMatrix::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad correlation JSON: ") + e.what());
  }
  if (!j.contains("sizes") || !j.contains("matrix"))
    throw ValidationError("correlation JSON needs 'sizes' and 'matrix'");
  BlockCorrelationMatrix out;
  try {
    out.groups = GroupStructure(j["sizes"].get<std::vector<int>>());
    auto rows = j["matrix"];
    auto q = static_cast<Eigen::Index>(rows.size());
    out.r.resize(q, q);
    for (Eigen::Index i = 0; i < q; ++i) {
      if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != q)
        throw ValidationError("correlation matrix rows must all have length " + std::to_string(q));
      for (Eigen::Index k = 0; k < q; ++k)
        out.r(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad correlation JSON: ") + e.what());
  }
  out.validate();
  return out;
}

BlockCorrelationMatrix BlockCorrelationMatrix::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

BlockCorrelationMatrix normal_scores_correlation(const GroupedSample& sample, TiePolicy ties) {
  if (sample.groups.dimension() != static_cast<int>(sample.q()))
    throw ValidationError("group sizes do not match sample dimension");
  Eigen::MatrixXd z = normal_scores(sample.data, ties);
  const double n = static_cast<double>(z.rows());
  Eigen::RowVectorXd mean = z.colwise().mean();
  z.rowwise() -= mean;
  Eigen::MatrixXd cov = z.transpose() * z / n;
  Eigen::VectorXd sd = cov.diagonal().array().sqrt();
  BlockCorrelationMatrix out;
  out.groups = sample.groups;
  out.r = cov.array() / (sd * sd.transpose()).array();
  out.r.diagonal().setOnes();
  return out;
}

std::vector<WindowSpan> rolling_windows(int n, int window, int step) {
  if (window < 2 || window > n) throw ValidationError("window must lie in [2, n]");
  if (step < 1) throw ValidationError("step must be >= 1");
  // Last start whose full window still fits; that window stretches to n.
  int last_start = 1;
  for (int s = 1; s + window - 1 <= n; s += step) last_start = s;
  std::vector<WindowSpan> spans;
  for (int s = 1; s < last_start; s += step) spans.push_back({s, s + window - 1, false});
  spans.push_back({last_start, n, last_start + window - 1 != n});
  return spans;
}

}  // namespace phidep
