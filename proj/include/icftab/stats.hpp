#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "icftab/special.hpp"

namespace icftab::stats {

/// Integer codes for a column, with the value each code stands for.
struct Categorized {
  std::vector<int> codes;
  std::vector<double> table;  // table[code] = original value, ascending

  int count() const { return static_cast<int>(table.size()); }
};

/// Maps each distinct value to its rank among the sorted distinct values.
Categorized categorize(std::span<const double> column);
inline Categorized categorize(const Eigen::VectorXd& column) {
  return categorize(std::span<const double>(column.data(), static_cast<std::size_t>(column.size())));
}

/// Equal-frequency binning into at most `bins` codes; values equal to a cut
/// point fall in the lower bin.
std::vector<int> quantile_bin(std::span<const double> column, int bins);
inline std::vector<int> quantile_bin(const Eigen::VectorXd& column, int bins) {
  return quantile_bin(std::span<const double>(column.data(), static_cast<std::size_t>(column.size())), bins);
}

inline constexpr int kDefaultMiBins = 16;

/// Dense r x c table of observed joint counts.
struct ContingencyTable {
  Eigen::MatrixXd counts;
  std::vector<int> row_labels;
  std::vector<int> col_labels;

  static ContingencyTable from_codes(std::span<const int> x, std::span<const int> y);
  double total() const { return counts.sum(); }
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double dof = 0.0;
};

/// Iteration budget used for p-values; large tables push the gamma series
/// past the default 500 terms.
inline constexpr special::Tolerance kTestTolerance{1e-14, 100000};

/// Pearson chi-square test of independence, no continuity correction.
/// A variable with a single observed category yields statistic 0, p 1.
TestResult chi2_independence(const ContingencyTable& table);
TestResult chi2_independence(std::span<const int> x, std::span<const int> y);

/// One-way ANOVA F test across groups. Zero within-group variance gives
/// p = 0 when the group means differ and p = 1 when they do not.
TestResult anova_oneway(const std::vector<Eigen::VectorXd>& groups);

/// Plug-in mutual information in nats.
double mutual_info_discrete(std::span<const int> a, std::span<const int> b);

/// Plug-in Shannon entropy in nats.
double entropy_discrete(std::span<const int> a);

/// Mean of mutual_info_discrete(target, c) over every context vector.
double avg_mutual_info(std::span<const int> target, const std::vector<std::vector<int>>& context);

}  // namespace icftab::stats
