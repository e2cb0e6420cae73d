#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace icftab {

enum class Task { classification, regression };
enum class ColumnKind { numerical, categorical };
enum class Split : std::uint8_t { train, valid, test };

std::string to_string(Task task);
Task task_from_string(const std::string& s);

struct ColumnMeta {
  std::string name;
  ColumnKind declared_kind = ColumnKind::numerical;
  std::size_t cardinality = 0;  // distinct values among training rows
  std::size_t index = 0;
};

/// Column-typed table. Immutable once loaded and split; trials only read it.
struct Dataset {
  std::string id;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Task task = Task::classification;
  std::vector<ColumnMeta> columns;
  std::vector<Split> split;

  Eigen::Index n_rows() const { return X.rows(); }
  Eigen::Index n_cols() const { return X.cols(); }

  std::vector<Eigen::Index> rows(Split which) const;
  std::vector<std::size_t> declared_categorical() const;
};

/// JSON sidecar describing a CSV file.
struct Schema {
  std::string target;
  Task task = Task::classification;
  std::vector<std::string> categorical;
  // Optional exact feature list; when empty every non-target column is a feature.
  std::vector<std::string> features;

  static Schema from_json_text(const std::string& text);
  static Schema load(const std::filesystem::path& path);
  std::string to_json_text() const;
};

Dataset read_csv(std::istream& in, const Schema& schema, const std::string& id = "dataset");
Dataset load_csv(const std::filesystem::path& path, const Schema& schema);
void write_csv(std::ostream& out, const Dataset& ds, const std::string& target_name = "y");
void save_csv_with_schema(const Dataset& ds, const std::filesystem::path& csv_path,
                          const std::filesystem::path& schema_path);

/// Recomputes ColumnMeta::cardinality from the training rows.
void refit_column_meta(Dataset& ds);

/// Seeded (train, valid, test) partition; stratified by class for classification.
Dataset split_dataset(Dataset ds, const std::array<double, 3>& fractions, std::uint64_t seed);

/// Rows gathered into a new matrix.
Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows);
Eigen::VectorXd gather_rows(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows);

/// Per-column z-scoring fitted on training rows.
class Standardizer {
 public:
  static constexpr double kMinStd = 1e-12;

  static Standardizer fit(const Eigen::MatrixXd& train);
  Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const;
  double transform_value(Eigen::Index col, double v) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return std_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd std_;
};

/// Rank-based inverse-normal transform of regression targets.
///
/// Training value with average rank r maps to Phi^{-1}((r - 0.5) / N).
/// Unseen values interpolate linearly between neighbouring training values
/// on the probability scale, clamped to [0.5/N, 1 - 0.5/N].
class TargetTransform {
 public:
  enum class Kind { identity, gaussian };

  TargetTransform() = default;
  static TargetTransform identity() { return {}; }
  /// Throws DataError when all targets are equal.
  static TargetTransform fit_gaussian(const Eigen::VectorXd& y_train);

  Kind kind() const { return kind_; }
  double forward(double y) const;
  double inverse(double z) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& y) const;
  Eigen::VectorXd inverse(const Eigen::VectorXd& z) const;

 private:
  Kind kind_ = Kind::identity;
  std::vector<double> values_;  // sorted distinct training values
  std::vector<double> probs_;   // (average rank - 0.5) / N for each value
};

double metric_accuracy(const Eigen::VectorXd& pred, const Eigen::VectorXd& y);
double metric_r2(const Eigen::VectorXd& pred, const Eigen::VectorXd& y);
double metric_mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& y);

/// Column 0 holds codes 0..k-1; the target is a seeded permutation of the
/// code taken mod 2, flipped with probability flip_prob. Remaining columns
/// are independent standard normal noise. All rows start in the train split.
Dataset gen_planted_icf(Eigen::Index n, int k, int d_noise, double flip_prob, std::uint64_t seed);

enum class PlantedMode { permuted, linear };

/// Column 0 holds codes 0..k-1 and y = spacing * g(code) + N(0, 1), where g
/// is a seeded permutation of the codes (permuted) or the identity (linear).
/// Remaining columns are standard normal noise. All rows start in train.
Dataset gen_planted_regression(Eigen::Index n, int k, int d_noise, double spacing, PlantedMode mode,
                               std::uint64_t seed);

/// x ~ U[0,1], y = sin(2 pi frequency x) + N(0, noise_std^2).
Dataset gen_nonsmooth_regression(Eigen::Index n, double frequency, double noise_std,
                                 std::uint64_t seed);

}  // namespace icftab
