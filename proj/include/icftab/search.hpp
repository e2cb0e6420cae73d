#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "icftab/cfd.hpp"
#include "icftab/icf.hpp"
#include "icftab/lff.hpp"
#include "icftab/nn/train.hpp"
#include "icftab/tabular.hpp"

namespace icftab {

enum class ModelFamily { mlp, resnet };
enum class Preprocessing { none, cfd, lff, combined };
/// What a search samples: a base model or its F|C variant.
enum class SearchModel { mlp, resnet, mlp_fc, resnet_fc };
/// How F|C samples choose their arm: fair coin, or forced.
enum class ArmPolicy { coin, cfd, lff };
enum class RunStatus { completed, diverged, failed };

std::string to_string(ModelFamily f);
std::string to_string(Preprocessing p);
std::string to_string(SearchModel m);
std::string to_string(ArmPolicy a);
std::string to_string(RunStatus s);
ModelFamily model_family_from_string(const std::string& s);
Preprocessing preprocessing_from_string(const std::string& s);
SearchModel search_model_from_string(const std::string& s);
ArmPolicy arm_policy_from_string(const std::string& s);
RunStatus run_status_from_string(const std::string& s);

struct SearchSpace {
  SearchModel model = SearchModel::mlp;
  ArmPolicy arm = ArmPolicy::coin;
  /// F|C samples use the combined categorical + LFF preprocessing.
  bool combined_mode = false;
  double lff_sigma = 1.0;
};

struct HyperSample {
  ModelFamily family = ModelFamily::mlp;
  Preprocessing preprocessing = Preprocessing::none;
  nn::MlpConfig mlp;
  nn::ResNetConfig resnet;
  nn::OptimizerConfig optimizer;
  std::optional<IcfConfig> icf;  // cfd and combined only
  LffVariant lff_variant = LffVariant::conv1x1;
  int lff_dim = 32;
  double lff_sigma = 1.0;
  bool gaussian_target = false;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static HyperSample from_json(const nlohmann::json& j);
};

/// Draws every field from its table range. The draw order is fixed, so the
/// stream consumed does not depend on the arm or task.
HyperSample sample_hyperparams(const SearchSpace& space, Task task, std::mt19937_64& rng);

/// Uniform on [lo, hi] in log space, rounded to the nearest integer.
long log_uniform_int(long lo, long hi, std::mt19937_64& rng);

struct RunRecord {
  static constexpr int kSchemaVersion = 1;

  std::size_t index = 0;
  std::string dataset;
  std::string model;  // search model label, e.g. "mlp-fc"; external systems use their own
  Task task = Task::classification;
  std::optional<HyperSample> sample;  // absent for external records
  RunStatus status = RunStatus::completed;
  double val_criterion = 0.0;   // selection half of the validation split
  double stop_criterion = 0.0;  // early-stopping half, at the best epoch
  std::optional<double> test_score;
  double wall_time = 0.0;
  int epochs_run = 0;
  int best_epoch = 0;
  nn::StopReason stop_reason = nn::StopReason::max_epochs;
  Preprocessing arm = Preprocessing::none;
  std::vector<std::size_t> categorical_set;
  std::string error;

  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

struct TrialOptions {
  nn::EarlyStopping early_stopping;
  Eigen::Index batch_size = 256;
};

/// Model-ready inputs for one trial. Tensors are channels x (N * length).
struct PreparedInputs {
  nn::Tensor<float> train, stop, select, test;
  Eigen::Index channels = 1;
  Eigen::Index length = 1;
  std::vector<std::size_t> categorical_set;
  std::vector<BinMap> maps;
  std::optional<IcfReport> icf_report;
};

/// Row indices of the validation split divided into the early-stopping half
/// (first ceil(n/2) rows in row order) and the selection half.
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_validation(const Dataset& ds);

PreparedInputs prepare_inputs(const Dataset& ds, const HyperSample& sample);

/// Network for the sample given prepared inputs, including any LFF front end.
std::unique_ptr<nn::Sequential<float>> build_network(const HyperSample& sample, const PreparedInputs& in);

/// Fit, train and evaluate one configuration on a split dataset. Never throws
/// for trial-level problems; they become failed records. When `model` is
/// given it receives the trained network (best-epoch state).
RunRecord run_trial(const Dataset& ds, const HyperSample& sample, const TrialOptions& opt = {},
                    std::unique_ptr<nn::Sequential<float>>* model = nullptr);

/// splitmix64 finalizer; used to derive per-trial seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Runs `runs` trials; trial i samples from rng(splitmix64(seed + i)). Records
/// are delivered to `sink` in index order as they become available.
std::vector<RunRecord> run_search(const Dataset& ds, const SearchSpace& space, std::size_t runs, std::uint64_t seed,
                                  const TrialOptions& opt = {}, unsigned workers = 1,
                                  const std::function<void(const RunRecord&)>& sink = {});

/// Index of the completed record with the best validation criterion; ties go
/// to the earliest index. Throws DataError when nothing completed.
std::size_t select_best(const std::vector<RunRecord>& records, Task task);

void append_record(std::ostream& out, const RunRecord& r);
std::vector<RunRecord> read_records(std::istream& in);
std::vector<RunRecord> load_records(const std::filesystem::path& path);

}  // namespace icftab
