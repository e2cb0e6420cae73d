#include "icftab/icf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "icftab/errors.hpp"
#include "icftab/stats.hpp"

namespace icftab {

using Eigen::Index;

std::string to_string(IcfTest test) {
  switch (test) {
    case IcfTest::chi2: return "chi2";
    case IcfTest::anova: return "anova";
    case IcfTest::mutual_info: return "mutual_info";
  }
  return "?";
}

IcfTest icf_test_from_string(const std::string& s) {
  if (s == "chi2") return IcfTest::chi2;
  if (s == "anova") return IcfTest::anova;
  if (s == "mutual_info" || s == "mi") return IcfTest::mutual_info;
  throw ConfigError("unknown ICF test '" + s + "'");
}

void IcfConfig::validate() const {
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  if (!in(chi_thresh, 1e-50, 1e-3)) throw ConfigError("chi_thresh must lie in [1e-50, 1e-3]");
  if (!in(anova_thresh, 1e-30, 1e-3)) throw ConfigError("anova_thresh must lie in [1e-30, 1e-3]");
  if (!in(mi_thresh, 0.75, 1.50)) throw ConfigError("mi_thresh must lie in [0.75, 1.50]");
  if (min_cardinality != 0 && min_cardinality != 10 && min_cardinality != 100)
    throw ConfigError("min_cardinality must be one of {0, 10, 100}");
  static constexpr std::size_t allowed[] = {300, 500, 1000, 1500, 5000};
  if (std::find(std::begin(allowed), std::end(allowed), max_cardinality) == std::end(allowed))
    throw ConfigError("max_cardinality must be one of {300, 500, 1000, 1500, 5000}");
  if (mi_bins < 2) throw ConfigError("mi_bins must be >= 2");
}

nlohmann::json IcfConfig::to_json() const {
  return {{"test", to_string(test)},
          {"chi_thresh", chi_thresh},
          {"anova_thresh", anova_thresh},
          {"mi_thresh", mi_thresh},
          {"min_cardinality", min_cardinality},
          {"max_cardinality", max_cardinality},
          {"auto_low_card", auto_low_card},
          {"mi_bins", mi_bins}};
}

IcfConfig IcfConfig::from_json(const nlohmann::json& j) {
  IcfConfig c;
  c.test = icf_test_from_string(j.at("test").get<std::string>());
  c.chi_thresh = j.value("chi_thresh", c.chi_thresh);
  c.anova_thresh = j.value("anova_thresh", c.anova_thresh);
  c.mi_thresh = j.value("mi_thresh", c.mi_thresh);
  c.min_cardinality = j.value("min_cardinality", c.min_cardinality);
  c.max_cardinality = j.value("max_cardinality", c.max_cardinality);
  c.auto_low_card = j.value("auto_low_card", c.auto_low_card);
  c.mi_bins = j.value("mi_bins", c.mi_bins);
  return c;
}

Gate cardinality_gate(std::size_t cardinality, const IcfConfig& cfg) {
  if (cardinality > cfg.max_cardinality) return Gate::skip;
  if (cfg.auto_low_card && cardinality <= cfg.min_cardinality) return Gate::auto_cat;
  return Gate::test;
}

namespace {

const char* gate_name(Gate g) {
  switch (g) {
    case Gate::skip: return "skipped_high_card";
    case Gate::auto_cat: return "auto_categorical";
    case Gate::test: return "tested";
  }
  return "?";
}

Gate gate_from_name(const std::string& s) {
  if (s == "skipped_high_card") return Gate::skip;
  if (s == "auto_categorical") return Gate::auto_cat;
  if (s == "tested") return Gate::test;
  throw DataError("unknown gate outcome '" + s + "'");
}

nlohmann::json num_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double num_from(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    return s == "-inf" ? -std::numeric_limits<double>::infinity()
                       : std::numeric_limits<double>::infinity();
  }
  return j.get<double>();
}

// Training rows of one column plus its gate outcome; shared by all detectors.
struct TrainView {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

TrainView train_view(const Dataset& ds) {
  const auto rows = ds.rows(Split::train);
  return {gather_rows(ds.X, rows), gather_rows(ds.y, rows)};
}

std::size_t distinct_count(const Eigen::VectorXd& col) {
  std::vector<double> v(col.data(), col.data() + col.size());
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

IcfReport start_report(const Dataset& ds, const IcfConfig& cfg, const TrainView& tv) {
  IcfReport rep;
  rep.test = cfg.test;
  rep.config = cfg;
  for (Index j = 0; j < tv.X.cols(); ++j) {
    ColumnIcf c;
    c.index = static_cast<std::size_t>(j);
    c.name = ds.columns.at(static_cast<std::size_t>(j)).name;
    c.declared_categorical =
        ds.columns[static_cast<std::size_t>(j)].declared_kind == ColumnKind::categorical;
    c.cardinality = distinct_count(tv.X.col(j));
    c.gate = cardinality_gate(c.cardinality, cfg);
    c.flagged = c.gate == Gate::auto_cat;
    if (cfg.test == IcfTest::mutual_info)
      c.p_value = std::numeric_limits<double>::quiet_NaN();
    else
      c.mi_ratio = std::numeric_limits<double>::quiet_NaN();
    rep.columns.push_back(c);
  }
  return rep;
}

void finish_report(IcfReport& rep) {
  rep.categorical_set.clear();
  for (const auto& c : rep.columns)
    if (c.flagged || c.declared_categorical) rep.categorical_set.push_back(c.index);
}

void require_task(const Dataset& ds, Task task, const char* who) {
  if (ds.task != task)
    throw ConfigError(std::string(who) + " requires a " + to_string(task) + " dataset");
}

}  // namespace

IcfReport detect_classification(const Dataset& ds, const IcfConfig& cfg) {
  require_task(ds, Task::classification, "chi-square detection");
  const auto tv = train_view(ds);
  IcfConfig c = cfg;
  c.test = IcfTest::chi2;
  IcfReport rep = start_report(ds, c, tv);
  std::vector<int> y_codes(static_cast<std::size_t>(tv.y.size()));
  for (Index i = 0; i < tv.y.size(); ++i) y_codes[static_cast<std::size_t>(i)] = static_cast<int>(tv.y(i));

  for (auto& col : rep.columns) {
    if (col.gate != Gate::test) continue;
    const Eigen::VectorXd x = tv.X.col(static_cast<Index>(col.index));
    const auto cat = stats::categorize(x);
    const auto r = stats::chi2_independence(cat.codes, y_codes);
    col.statistic = r.statistic;
    col.p_value = r.p_value;
    col.flagged = r.p_value < c.chi_thresh;
  }
  finish_report(rep);
  return rep;
}

IcfReport detect_regression_anova(const Dataset& ds, const IcfConfig& cfg) {
  require_task(ds, Task::regression, "ANOVA detection");
  const auto tv = train_view(ds);
  IcfConfig c = cfg;
  c.test = IcfTest::anova;
  IcfReport rep = start_report(ds, c, tv);

  for (auto& col : rep.columns) {
    if (col.gate != Gate::test) continue;
    const Eigen::VectorXd x = tv.X.col(static_cast<Index>(col.index));
    const auto cat = stats::categorize(x);
    const auto k = static_cast<std::size_t>(cat.count());
    if (k < 2 || static_cast<Index>(k) >= tv.y.size()) continue;  // not testable
    std::vector<std::vector<double>> buckets(k);
    for (std::size_t i = 0; i < cat.codes.size(); ++i)
      buckets[static_cast<std::size_t>(cat.codes[i])].push_back(tv.y(static_cast<Index>(i)));
    std::vector<Eigen::VectorXd> groups;
    groups.reserve(k);
    for (auto& b : buckets)
      groups.emplace_back(Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Index>(b.size())));
    const auto r = stats::anova_oneway(groups);
    col.statistic = r.statistic;
    col.p_value = r.p_value;
    col.flagged = r.p_value < c.anova_thresh;
  }
  finish_report(rep);
  return rep;
}

IcfReport detect_regression_mi(const Dataset& ds, const IcfConfig& cfg) {
  require_task(ds, Task::regression, "mutual-information detection");
  const auto tv = train_view(ds);
  IcfConfig c = cfg;
  c.test = IcfTest::mutual_info;
  IcfReport rep = start_report(ds, c, tv);

  const Index d = tv.X.cols();
  std::vector<std::vector<int>> binned(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) binned[static_cast<std::size_t>(j)] = stats::quantile_bin(Eigen::VectorXd(tv.X.col(j)), c.mi_bins);
  const auto y_binned = stats::quantile_bin(tv.y, c.mi_bins);

  constexpr double kTiny = 1e-12;
  for (auto& col : rep.columns) {
    if (col.gate != Gate::test) continue;
    std::vector<std::vector<int>> context;
    for (Index j = 0; j < d; ++j)
      if (static_cast<std::size_t>(j) != col.index) context.push_back(binned[static_cast<std::size_t>(j)]);
    context.push_back(y_binned);

    const auto cat = stats::categorize(Eigen::VectorXd(tv.X.col(static_cast<Index>(col.index))));
    const double numerator = stats::avg_mutual_info(cat.codes, context);
    const double denominator = stats::avg_mutual_info(binned[col.index], context);
    col.statistic = numerator;
    if (denominator < kTiny) {
      col.mi_ratio = numerator > kTiny ? std::numeric_limits<double>::infinity() : 0.0;
      col.flagged = numerator > kTiny;
    } else {
      col.mi_ratio = numerator / denominator;
      col.flagged = col.mi_ratio > c.mi_thresh;
    }
  }
  finish_report(rep);
  return rep;
}

IcfReport run_icf(const Dataset& ds, const IcfConfig& cfg) {
  cfg.validate();
  if (ds.task == Task::classification) {
    if (cfg.test != IcfTest::chi2)
      throw ConfigError("classification datasets use the chi2 test, got " + to_string(cfg.test));
    return detect_classification(ds, cfg);
  }
  switch (cfg.test) {
    case IcfTest::anova: return detect_regression_anova(ds, cfg);
    case IcfTest::mutual_info: return detect_regression_mi(ds, cfg);
    case IcfTest::chi2: break;
  }
  throw ConfigError("regression datasets use the anova or mutual_info test, got chi2");
}

nlohmann::json IcfReport::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns) {
    cols.push_back({{"index", c.index},
                    {"name", c.name},
                    {"cardinality", c.cardinality},
                    {"gate", gate_name(c.gate)},
                    {"statistic", num_or_null(c.statistic)},
                    {"p_value", num_or_null(c.p_value)},
                    {"mi_ratio", num_or_null(c.mi_ratio)},
                    {"flagged", c.flagged},
                    {"declared_categorical", c.declared_categorical}});
  }
  return {{"test", to_string(test)},
          {"config", config.to_json()},
          {"columns", cols},
          {"categorical_set", categorical_set}};
}

IcfReport IcfReport::from_json(const nlohmann::json& j) {
  IcfReport r;
  try {
    r.test = icf_test_from_string(j.at("test").get<std::string>());
    if (j.contains("config")) r.config = IcfConfig::from_json(j["config"]);
    for (const auto& cj : j.at("columns")) {
      ColumnIcf c;
      c.index = cj.at("index").get<std::size_t>();
      c.name = cj.value("name", std::string{});
      c.cardinality = cj.value("cardinality", std::size_t{0});
      c.gate = gate_from_name(cj.at("gate").get<std::string>());
      c.statistic = num_from(cj.at("statistic"));
      c.p_value = num_from(cj.at("p_value"));
      c.mi_ratio = num_from(cj.at("mi_ratio"));
      c.flagged = cj.at("flagged").get<bool>();
      c.declared_categorical = cj.value("declared_categorical", false);
      r.columns.push_back(c);
    }
    r.categorical_set = j.at("categorical_set").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed ICF report: ") + e.what());
  }
  return r;
}

}  // namespace icftab
