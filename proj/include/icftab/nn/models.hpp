#pragma once

#include <cmath>
#include <random>
#include <string>

#include <json.hpp>

#include "icftab/nn/layers.hpp"

namespace icftab::nn {

struct MlpConfig {
  int depth = 2;
  int width = 128;
  ActivationKind activation = ActivationKind::relu;
  bool batch_norm = false;
  double dropout = 0.0;

  void validate() const;
  nlohmann::json to_json() const;
  static MlpConfig from_json(const nlohmann::json& j);
};

struct ResNetConfig {
  enum class NormType { batch, layer };

  int num_block = 1;
  int num_linear = 1;
  bool use_norm = false;
  NormType norm_type = NormType::batch;
  bool use_dropout = false;
  double dropout_prob = 0.1;
  int downsample_gap = 0;
  int increasefilter_gap = 0;
  PoolKind pooling = PoolKind::max;
  double kernel_fraction = 0.5;
  ActivationKind activation = ActivationKind::relu;
  int base_filters = 32;

  void validate() const;
  nlohmann::json to_json() const;
  static ResNetConfig from_json(const nlohmann::json& j);
};

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  int t0 = 10;
  int t_mult = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static OptimizerConfig from_json(const nlohmann::json& j);
};

/// max(1, round(phi * F)), rounding halves away from zero.
Index kernel_size(double kernel_fraction, Index features);

/// Appends Flatten, `depth` hidden blocks Linear -> [BatchNorm] -> Act ->
/// [Dropout], and a scalar Linear head. Input samples are channels x length.
template <typename Scalar>
void append_mlp(Sequential<Scalar>& net, const MlpConfig& cfg, Index channels, Index length, std::mt19937_64& rng) {
  cfg.validate();
  net.template emplace<Flatten<Scalar>>();
  Index in = channels * length;
  for (int i = 0; i < cfg.depth; ++i) {
    net.template emplace<Linear<Scalar>>(in, cfg.width, rng);
    if (cfg.batch_norm) net.template emplace<BatchNorm<Scalar>>(cfg.width);
    net.template emplace<Activation<Scalar>>(cfg.activation);
    if (cfg.dropout > 0.0) net.template emplace<Dropout<Scalar>>(cfg.dropout);
    in = cfg.width;
  }
  net.template emplace<Linear<Scalar>>(in, 1, rng);
}

/// Appends the residual blocks, pooling, mean over the feature axis,
/// `num_linear` hidden dense layers and a scalar head.
template <typename Scalar>
void append_resnet(Sequential<Scalar>& net, const ResNetConfig& cfg, Index channels, Index length,
                   std::mt19937_64& rng) {
  cfg.validate();
  const Index k = kernel_size(cfg.kernel_fraction, length);
  using Block = ResidualBlock<Scalar>;
  const auto norm = !cfg.use_norm ? Block::Norm::none
                    : cfg.norm_type == ResNetConfig::NormType::batch ? Block::Norm::batch
                                                                     : Block::Norm::layer;
  const double drop = cfg.use_dropout ? cfg.dropout_prob : 0.0;
  Index in = channels;
  Index len = length;
  for (int b = 0; b < cfg.num_block; ++b) {
    const int doublings = cfg.increasefilter_gap > 0 ? b / cfg.increasefilter_gap : 0;
    const Index out = static_cast<Index>(cfg.base_filters) << doublings;
    net.template emplace<Block>(in, out, k, norm, cfg.activation, drop, rng);
    in = out;
    if (cfg.downsample_gap > 0 && (b + 1) % cfg.downsample_gap == 0) {
      len = Pool1d<Scalar>::output_length(len);
      if (len < 1) throw ConfigError("pooling would shrink the feature axis below 1");
      net.template emplace<Pool1d<Scalar>>(cfg.pooling);
    }
  }
  net.template emplace<MeanOverLength<Scalar>>();
  for (int i = 0; i < cfg.num_linear; ++i) {
    net.template emplace<Linear<Scalar>>(in, in, rng);
    net.template emplace<Activation<Scalar>>(cfg.activation);
  }
  net.template emplace<Linear<Scalar>>(in, 1, rng);
}

}  // namespace icftab::nn
