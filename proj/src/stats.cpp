#include "icftab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace icftab::stats {

Categorized categorize(std::span<const double> column) {
  Categorized out;
  out.table.assign(column.begin(), column.end());
  std::sort(out.table.begin(), out.table.end());
  out.table.erase(std::unique(out.table.begin(), out.table.end()), out.table.end());
  out.codes.reserve(column.size());
  for (double v : column) {
    const auto it = std::lower_bound(out.table.begin(), out.table.end(), v);
    out.codes.push_back(static_cast<int>(it - out.table.begin()));
  }
  return out;
}

std::vector<int> quantile_bin(std::span<const double> column, int bins) {
  if (bins < 2) throw std::invalid_argument("quantile_bin requires at least 2 bins");
  const std::size_t n = column.size();
  std::vector<int> codes(n, 0);
  if (n == 0) return codes;
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> edges;
  for (int j = 1; j < bins; ++j) {
    // value at the j/bins quantile position (1-based ceil(j n / bins))
    const std::size_t pos = (static_cast<std::size_t>(j) * n + static_cast<std::size_t>(bins) - 1) /
                            static_cast<std::size_t>(bins);
    edges.push_back(sorted[std::max<std::size_t>(pos, 1) - 1]);
  }
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::lower_bound(edges.begin(), edges.end(), column[i]);
    codes[i] = static_cast<int>(it - edges.begin());
  }
  return codes;
}

namespace {

// Dense relabelling of arbitrary integer codes to 0..m-1 in ascending order.
std::vector<int> dense_labels(std::span<const int> codes, std::vector<int>& labels) {
  labels.assign(codes.begin(), codes.end());
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  std::vector<int> out(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i)
    out[i] = static_cast<int>(std::lower_bound(labels.begin(), labels.end(), codes[i]) - labels.begin());
  return out;
}

}  // namespace

ContingencyTable ContingencyTable::from_codes(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) throw std::invalid_argument("contingency table: length mismatch");
  ContingencyTable t;
  const auto xr = dense_labels(x, t.row_labels);
  const auto yc = dense_labels(y, t.col_labels);
  t.counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t.row_labels.size()),
                                   static_cast<Eigen::Index>(t.col_labels.size()));
  for (std::size_t i = 0; i < xr.size(); ++i) t.counts(xr[i], yc[i]) += 1.0;
  return t;
}

TestResult chi2_independence(const ContingencyTable& table) {
  const Eigen::VectorXd row_sum = table.counts.rowwise().sum();
  const Eigen::RowVectorXd col_sum = table.counts.colwise().sum();
  const double total = row_sum.sum();
  const auto observed_rows = (row_sum.array() > 0).count();
  const auto observed_cols = (col_sum.array() > 0).count();
  if (!(total > 0) || observed_rows < 2 || observed_cols < 2) return {};

  double stat = 0.0;
  for (Eigen::Index i = 0; i < table.counts.rows(); ++i) {
    if (row_sum(i) == 0) continue;
    for (Eigen::Index j = 0; j < table.counts.cols(); ++j) {
      const double expected = row_sum(i) * col_sum(j) / total;
      if (!(expected > 0)) continue;
      const double diff = table.counts(i, j) - expected;
      stat += diff * diff / expected;
    }
  }
  TestResult r;
  r.statistic = stat;
  r.dof = static_cast<double>((observed_rows - 1) * (observed_cols - 1));
  r.p_value = special::chi2_sf(stat, r.dof, kTestTolerance);
  return r;
}

TestResult chi2_independence(std::span<const int> x, std::span<const int> y) {
  return chi2_independence(ContingencyTable::from_codes(x, y));
}

TestResult anova_oneway(const std::vector<Eigen::VectorXd>& groups) {
  const auto k = static_cast<Eigen::Index>(groups.size());
  if (k < 2) throw std::invalid_argument("anova_oneway requires at least 2 groups");
  Eigen::Index n = 0;
  double grand_sum = 0.0;
  for (const auto& g : groups) {
    if (g.size() == 0) throw std::invalid_argument("anova_oneway: empty group");
    n += g.size();
    grand_sum += g.sum();
  }
  if (n <= k) throw std::invalid_argument("anova_oneway requires more observations than groups");
  const double grand_mean = grand_sum / static_cast<double>(n);

  double ss_between = 0.0;
  double ss_within = 0.0;
  for (const auto& g : groups) {
    const double m = g.mean();
    ss_between += static_cast<double>(g.size()) * (m - grand_mean) * (m - grand_mean);
    ss_within += (g.array() - m).square().sum();
  }

  TestResult r;
  r.dof = static_cast<double>(k - 1);
  const double df_within = static_cast<double>(n - k);
  if (ss_within == 0.0) {
    // Scale-aware test for "all group means equal".
    double scale = 0.0;
    for (const auto& g : groups) scale = std::max(scale, g.cwiseAbs().maxCoeff());
    const double tiny = 64.0 * std::numeric_limits<double>::epsilon() * std::max(scale, 1e-300);
    if (ss_between <= tiny * tiny * static_cast<double>(n)) return {0.0, 1.0, r.dof};
    r.statistic = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    return r;
  }
  r.statistic = (ss_between / r.dof) / (ss_within / df_within);
  r.p_value = special::f_sf(r.statistic, r.dof, df_within, kTestTolerance);
  return r;
}

namespace {

// Counts of each (a, b) pair plus marginals; keys are sorted so sums are
// accumulated in a fixed order.
struct JointCounts {
  std::vector<std::int64_t> keys;
  std::vector<double> joint;
  std::vector<double> ma;
  std::vector<double> mb;
  std::vector<int> ia;
  std::vector<int> ib;
};

JointCounts joint_counts(std::span<const int> a, std::span<const int> b) {
  std::vector<int> la, lb;
  const auto da = dense_labels(a, la);
  const auto db = dense_labels(b, lb);
  const std::int64_t cb = static_cast<std::int64_t>(lb.size());
  JointCounts jc;
  jc.ma.assign(la.size(), 0.0);
  jc.mb.assign(lb.size(), 0.0);
  std::vector<std::int64_t> keys(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    keys[i] = static_cast<std::int64_t>(da[i]) * cb + db[i];
    jc.ma[static_cast<std::size_t>(da[i])] += 1.0;
    jc.mb[static_cast<std::size_t>(db[i])] += 1.0;
  }
  std::sort(keys.begin(), keys.end());
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    jc.keys.push_back(keys[i]);
    jc.joint.push_back(static_cast<double>(j - i));
    jc.ia.push_back(static_cast<int>(keys[i] / cb));
    jc.ib.push_back(static_cast<int>(keys[i] % cb));
    i = j;
  }
  return jc;
}

}  // namespace

double mutual_info_discrete(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("mutual_info_discrete: length mismatch");
  if (a.empty()) return 0.0;
  const auto jc = joint_counts(a, b);
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (std::size_t c = 0; c < jc.joint.size(); ++c) {
    const double nab = jc.joint[c];
    const double na = jc.ma[static_cast<std::size_t>(jc.ia[c])];
    const double nb = jc.mb[static_cast<std::size_t>(jc.ib[c])];
    mi += (nab / n) * std::log(nab * n / (na * nb));
  }
  return std::max(mi, 0.0);
}

double entropy_discrete(std::span<const int> a) {
  if (a.empty()) return 0.0;
  std::vector<int> sorted(a.begin(), a.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(a.size());
  double h = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double p = static_cast<double>(j - i) / n;
    h -= p * std::log(p);
    i = j;
  }
  return h;
}

double avg_mutual_info(std::span<const int> target, const std::vector<std::vector<int>>& context) {
  if (context.empty()) throw std::invalid_argument("avg_mutual_info: empty context");
  double sum = 0.0;
  for (const auto& c : context) sum += mutual_info_discrete(target, c);
  return sum / static_cast<double>(context.size());
}

}  // namespace icftab::stats
