#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "icftab/search.hpp"

namespace icftab::report {

/// Random-baseline score: 0.5 accuracy for classification, r2 = 0 for regression.
double lower_bound(Task task);

/// (raw - low) / (high - low) clamped to [0, 1]; requires high > low.
double normalize(double raw, double low, double high);

struct DatasetStats {
  double low = 0.0;
  double high = 0.0;          // best test score over every model's records
  double best_selected = 0.0; // best normalized score of any model's selected run
  bool excluded = false;
  std::size_t records = 0;
};

struct Normalized {
  std::map<std::string, DatasetStats> datasets;
  /// Parallel to the input records; 0 for records without a test score or
  /// whose dataset is excluded.
  std::vector<double> score;
};

/// True when the dataset should be dropped: no model's selected run reaches
/// a normalized score above `threshold`.
bool exclude_degenerate(double best_normalized, double threshold = 0.1);

Normalized normalize_records(const std::vector<RunRecord>& records, Task task, double exclude_threshold = 0.1);

/// Best-so-far curve for one search order: entry b-1 is the normalized test
/// score of the best-validation record among the first b of `order`.
/// `val` and `score` are indexed by record; ties keep the earlier record.
std::vector<double> budget_trace(const std::vector<double>& val, const std::vector<double>& score,
                                 const std::vector<std::size_t>& order, bool maximize);

struct BudgetCurve {
  std::string model;
  std::vector<double> mean;  // entry b-1 is budget b
};

/// Per model: for each retained dataset average `sims` random search orders,
/// then average over datasets. Shorter per-dataset curves are extended with
/// their final value up to the longest record count.
std::vector<BudgetCurve> budget_curves(const std::vector<RunRecord>& records, const Normalized& norm, Task task,
                                       int sims, std::uint64_t seed);

struct ProfileSeries {
  std::string model;
  std::vector<double> tau;
  std::vector<double> fraction;
  bool short_group = false;  // some dataset had fewer than k_top records
};

/// Top-k records by validation per (model, dataset) pooled over retained
/// datasets; fraction of pooled scores strictly above each tau.
std::vector<ProfileSeries> performance_profile(const std::vector<RunRecord>& records, const Normalized& norm, Task task,
                                               int k_top, int tau_points = 101);

/// Row per dataset: normalized scores of each model's top-k runs ordered by
/// validation criterion; NaN where a model has fewer runs.
struct Heatmap {
  std::vector<std::string> models;
  std::vector<std::string> datasets;
  int k_top = 8;
  std::vector<std::vector<double>> rows;  // datasets x (models * k_top)
};

Heatmap heatmap(const std::vector<RunRecord>& records, const Normalized& norm, Task task, int k_top);

struct ReportOptions {
  Task task = Task::classification;
  int sims = 15;
  int top_k = 8;
  std::uint64_t seed = 0;
  int tau_points = 101;
  bool svg = false;
};

/// Writes budget.csv, profile.csv, heatmap.csv, heatmap_<dataset>.csv,
/// summary.json and optionally heatmap.svg into `out_dir`.
nlohmann::json write_report(const std::vector<RunRecord>& records, const ReportOptions& opt,
                            const std::filesystem::path& out_dir);

}  // namespace icftab::report
