#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phidep/stats.hpp"

namespace phidep {

// Partition of q coordinates into k contiguous groups of sizes d_1..d_k.
struct GroupStructure {
  std::vector<int> sizes;

  GroupStructure() = default;
  explicit GroupStructure(std::vector<int> s);
  static GroupStructure parse(const std::string& csv);  // "2,2" -> {2,2}

  int group_count() const { return static_cast<int>(sizes.size()); }
  int dimension() const;
  int offset(int group) const;  // first coordinate of the group
  std::string to_string() const;
  bool operator==(const GroupStructure&) const = default;
};

enum class MissingPolicy { DropRow, Error };

struct GroupedSample {
  Eigen::MatrixXd data;  // n x q, no NaN
  GroupStructure groups;
  std::vector<std::string> column_labels;  // size q
  std::vector<std::string> row_labels;     // dates if the CSV had them, else empty
  std::size_t dropped_rows = 0;            // rows removed by the missing policy

  Eigen::Index n() const { return data.rows(); }
  Eigen::Index q() const { return data.cols(); }
};

// CSV with a header row; an optional leading ISO-8601 date column becomes
// row_labels. Empty cells and NA/NaN are missing values handled per policy.
GroupedSample load_csv(const std::string& path, const GroupStructure& groups,
                       MissingPolicy missing = MissingPolicy::DropRow);

// Row-wise log returns log(p[t+1]/p[t]); prices must be positive. Rows with
// missing values are dropped (or rejected) before differencing.
Eigen::MatrixXd log_returns(const Eigen::MatrixXd& prices);
GroupedSample log_returns(const GroupedSample& prices);

// Column-wise van der Waerden scores qnorm(rank/(n+1)). Each column sums to
// zero up to rounding; strictly increasing transforms leave scores unchanged.
Eigen::MatrixXd normal_scores(const Eigen::MatrixXd& data, TiePolicy ties = TiePolicy::Error);

// Correlation matrix with unit-diagonal blocks along the group partition.
struct BlockCorrelationMatrix {
  Eigen::MatrixXd r;
  GroupStructure groups;

  void validate() const;  // symmetric, unit diagonal, sizes match, throws ValidationError
  Eigen::MatrixXd block(int i) const;               // R_ii
  Eigen::MatrixXd block_diagonal() const;           // R_0
  std::string to_json() const;
  static BlockCorrelationMatrix from_json(const std::string& text);
  static BlockCorrelationMatrix load(const std::string& path);
};

// Normal scores rank correlation: Pearson correlation of the score vectors,
// which equals the rank-based form with the data-independent normalizer
// (1/n) sum qnorm(l/(n+1))^2 whenever there are no ties.
BlockCorrelationMatrix normal_scores_correlation(const GroupedSample& sample,
                                                 TiePolicy ties = TiePolicy::Error);

// 1-based inclusive row spans. Windows start at 1, 1+step, ...; the last span
// always ends at n by absorbing the tail remainder, and is flagged irregular
// when its length differs from the nominal window.
struct WindowSpan {
  int first = 0;
  int last = 0;
  bool irregular = false;
  int length() const { return last - first + 1; }
};
std::vector<WindowSpan> rolling_windows(int n, int window, int step);

}  // namespace phidep
