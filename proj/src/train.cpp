#include "icftab/nn/train.hpp"

#include <algorithm>
#include <cmath>

namespace icftab::nn {

namespace {

using nlohmann::json;

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad or missing field '") + key + "': " + e.what());
  }
}


}  // namespace

void MlpConfig::validate() const {
  if (depth < 1) throw ConfigError("MLP depth must be >= 1");
  if (width < 1) throw ConfigError("MLP width must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("MLP dropout must lie in [0, 1)");
}

json MlpConfig::to_json() const {
  return {{"depth", depth},
          {"width", width},
          {"activation", nn::to_string(activation)},
          {"batch_norm", batch_norm},
          {"dropout", dropout}};
}

MlpConfig MlpConfig::from_json(const json& j) {
  MlpConfig c;
  c.depth = field<int>(j, "depth");
  c.width = field<int>(j, "width");
  c.activation = activation_from_string(field<std::string>(j, "activation"));
  c.batch_norm = field<bool>(j, "batch_norm");
  c.dropout = field<double>(j, "dropout");
  c.validate();
  return c;
}

void ResNetConfig::validate() const {
  if (num_block < 1) throw ConfigError("ResNet num_block must be >= 1");
  if (num_linear < 0) throw ConfigError("ResNet num_linear must be >= 0");
  if (use_dropout && !(dropout_prob >= 0.0 && dropout_prob < 1.0))
    throw ConfigError("ResNet dropout_prob must lie in [0, 1)");
  if (downsample_gap < 0 || increasefilter_gap < 0) throw ConfigError("ResNet gaps must be >= 0");
  if (!(kernel_fraction >= 0.0 && kernel_fraction <= 1.0)) throw ConfigError("kernel_fraction must lie in [0, 1]");
  if (base_filters < 1) throw ConfigError("ResNet base_filters must be >= 1");
}

json ResNetConfig::to_json() const {
  return {{"num_block", num_block},
          {"num_linear", num_linear},
          {"use_norm", use_norm},
          {"norm_type", norm_type == NormType::batch ? "batch" : "layer"},
          {"use_dropout", use_dropout},
          {"dropout_prob", dropout_prob},
          {"downsample_gap", downsample_gap},
          {"increasefilter_gap", increasefilter_gap},
          {"pooling", nn::to_string(pooling)},
          {"kernel_fraction", kernel_fraction},
          {"activation", nn::to_string(activation)},
          {"base_filters", base_filters}};
}

ResNetConfig ResNetConfig::from_json(const json& j) {
  ResNetConfig c;
  c.num_block = field<int>(j, "num_block");
  c.num_linear = field<int>(j, "num_linear");
  c.use_norm = field<bool>(j, "use_norm");
  const auto nt = field<std::string>(j, "norm_type");
  if (nt == "batch")
    c.norm_type = NormType::batch;
  else if (nt == "layer")
    c.norm_type = NormType::layer;
  else
    throw ConfigError("unknown norm_type '" + nt + "'");
  c.use_dropout = field<bool>(j, "use_dropout");
  c.dropout_prob = field<double>(j, "dropout_prob");
  c.downsample_gap = field<int>(j, "downsample_gap");
  c.increasefilter_gap = field<int>(j, "increasefilter_gap");
  c.pooling = pool_from_string(field<std::string>(j, "pooling"));
  c.kernel_fraction = field<double>(j, "kernel_fraction");
  c.activation = activation_from_string(field<std::string>(j, "activation"));
  if (j.contains("base_filters")) c.base_filters = field<int>(j, "base_filters");
  c.validate();
  return c;
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (learning_rate * weight_decay >= 1.0) throw ConfigError("learning rate * weight decay must be < 1");
  if (t0 < 1) throw ConfigError("T0 must be >= 1");
  if (t_mult < 1) throw ConfigError("T_mult must be >= 1");
}

json OptimizerConfig::to_json() const {
  return {{"name", "AdamW"},
          {"learning_rate", learning_rate},
          {"eps", eps},
          {"weight_decay", weight_decay},
          {"T0", t0},
          {"T_mult", t_mult}};
}

OptimizerConfig OptimizerConfig::from_json(const json& j) {
  OptimizerConfig c;
  c.learning_rate = field<double>(j, "learning_rate");
  c.eps = field<double>(j, "eps");
  c.weight_decay = field<double>(j, "weight_decay");
  c.t0 = field<int>(j, "T0");
  c.t_mult = field<int>(j, "T_mult");
  c.validate();
  return c;
}

Index kernel_size(double kernel_fraction, Index features) {
  if (!(kernel_fraction >= 0.0 && kernel_fraction <= 1.0)) throw ConfigError("kernel_fraction must lie in [0, 1]");
  // std::round already rounds halves away from zero.
  const auto k = static_cast<Index>(std::round(kernel_fraction * static_cast<double>(features)));
  return std::max<Index>(1, k);
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::patience: return "patience";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::divergence: return "divergence";
  }
  return "unknown";
}

StopReason stop_reason_from_string(const std::string& s) {
  if (s == "patience") return StopReason::patience;
  if (s == "max_epochs") return StopReason::max_epochs;
  if (s == "divergence") return StopReason::divergence;
  throw DataError("unknown stop reason '" + s + "'");
}

namespace {

Eigen::VectorXd labels(const Eigen::VectorXd& logits) {
  return (logits.array() > 0.0).cast<double>().matrix();
}

}  // namespace

double criterion(Task task, const Eigen::VectorXd& output, const Eigen::VectorXd& y_original,
                 const TargetTransform& target) {
  if (task == Task::classification) return metric_accuracy(labels(output), y_original);
  return metric_mae(target.inverse(output), y_original);
}

double test_metric(Task task, const Eigen::VectorXd& output, const Eigen::VectorXd& y_original,
                   const TargetTransform& target) {
  if (task == Task::classification) return metric_accuracy(labels(output), y_original);
  return metric_r2(target.inverse(output), y_original);
}

}  // namespace icftab::nn
