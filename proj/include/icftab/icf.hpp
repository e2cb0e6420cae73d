#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "icftab/tabular.hpp"

namespace icftab {

enum class IcfTest { chi2, anova, mutual_info };

std::string to_string(IcfTest test);
IcfTest icf_test_from_string(const std::string& s);

/// Detection thresholds and cardinality gates. Ranges follow the
/// hyperparameter space the search samples from.
struct IcfConfig {
  IcfTest test = IcfTest::chi2;
  double chi_thresh = 1e-3;
  double anova_thresh = 1e-3;
  double mi_thresh = 1.25;
  std::size_t min_cardinality = 0;
  std::size_t max_cardinality = 5000;
  bool auto_low_card = false;
  int mi_bins = 16;

  /// Throws ConfigError when a field is outside its admissible range.
  void validate() const;

  nlohmann::json to_json() const;
  static IcfConfig from_json(const nlohmann::json& j);
};

enum class Gate { skip, auto_cat, test };

/// skip above max_cardinality; auto_cat at or below min_cardinality when
/// auto_low_card is set; test otherwise. Skip always wins.
Gate cardinality_gate(std::size_t cardinality, const IcfConfig& cfg);

struct ColumnIcf {
  std::size_t index = 0;
  std::string name;
  std::size_t cardinality = 0;
  Gate gate = Gate::test;
  double statistic = 0.0;
  double p_value = 1.0;   // NaN for the mutual-information test
  double mi_ratio = 0.0;  // NaN for chi2 / anova
  bool flagged = false;
  bool declared_categorical = false;
};

struct IcfReport {
  IcfTest test = IcfTest::chi2;
  IcfConfig config;
  std::vector<ColumnIcf> columns;
  /// Flagged columns merged with the declared categorical annotations, ascending.
  std::vector<std::size_t> categorical_set;

  nlohmann::json to_json() const;
  static IcfReport from_json(const nlohmann::json& j);
};

IcfReport detect_classification(const Dataset& ds, const IcfConfig& cfg);
IcfReport detect_regression_anova(const Dataset& ds, const IcfConfig& cfg);
IcfReport detect_regression_mi(const Dataset& ds, const IcfConfig& cfg);

/// Dispatches on cfg.test; throws ConfigError when the test does not fit the task.
IcfReport run_icf(const Dataset& ds, const IcfConfig& cfg);

}  // namespace icftab
