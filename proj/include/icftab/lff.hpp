#pragma once

// Learned Fourier Feature embeddings.
//
// An affine map produces Z (N x D x M) from standardized inputs; the
// embedding is cos(pi Z) concatenated with sin(pi Z) along the channel axis.
// Conv1x1LFF shares one (M x 1) weight and M-bias across every feature;
// LinearLFF applies a full (D*M) x D projection, so features mix.
//
// Layouts are row-major: input N x D, Z as N x (D*M), output N x (D*2M) with
// element (n, d, c) at column d*2M + c, channels [cos(0..M-1), sin(0..M-1)].

#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Core>

#include "icftab/errors.hpp"

namespace icftab {

enum class LffVariant { conv1x1, linear };

inline std::string to_string(LffVariant v) { return v == LffVariant::conv1x1 ? "Conv1x1LFF" : "LinearLFF"; }
inline LffVariant lff_variant_from_string(const std::string& s) {
  if (s == "Conv1x1LFF" || s == "conv1x1") return LffVariant::conv1x1;
  if (s == "LinearLFF" || s == "linear") return LffVariant::linear;
  throw ConfigError("unknown LFF variant '" + s + "'");
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct LffParams {
  LffVariant variant = LffVariant::conv1x1;
  Eigen::Index d = 0;
  Eigen::Index m = 0;
  // conv1x1: M x 1; linear: (D*M) x D
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weight;
  // conv1x1: M; linear: D*M
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;
  double init_sigma = 1.0;
};

inline bool lff_dim_allowed(Eigen::Index m) { return m == 32 || m == 64 || m == 128 || m == 256; }

/// Weights i.i.d. N(0, sigma^2), bias zero. sigma = 0 gives zero weights.
template <typename Scalar>
LffParams<Scalar> init_lff(LffVariant variant, Eigen::Index d, Eigen::Index m, double sigma,
                           std::uint64_t seed, bool check_dim = true) {
  if (d < 1) throw ConfigError("LFF requires at least one input feature");
  if (check_dim && !lff_dim_allowed(m)) throw ConfigError("LFF dim must be one of {32, 64, 128, 256}");
  if (m < 1) throw ConfigError("LFF dim must be positive");
  if (!(sigma >= 0.0)) throw ConfigError("LFF init sigma must be >= 0");
  LffParams<Scalar> p;
  p.variant = variant;
  p.d = d;
  p.m = m;
  p.init_sigma = sigma;
  const Eigen::Index rows = variant == LffVariant::conv1x1 ? m : d * m;
  const Eigen::Index cols = variant == LffVariant::conv1x1 ? 1 : d;
  p.weight.resize(rows, cols);
  p.bias = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(rows);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) p.weight(i, j) = static_cast<Scalar>(sigma * normal(rng));
  return p;
}

template <typename Scalar>
struct LffCache {
  RowMatrix<Scalar> x;  // N x D
  RowMatrix<Scalar> z;  // N x (D*M)
};

template <typename Scalar>
struct LffGrads {
  RowMatrix<Scalar> input;                                // N x D
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weight;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;
};

/// N x (D*2M) embedding; fills `cache` when provided.
template <typename Scalar>
RowMatrix<Scalar> lff_forward(const RowMatrix<Scalar>& x, const LffParams<Scalar>& p,
                              LffCache<Scalar>* cache = nullptr) {
  using Eigen::Index;
  if (x.cols() != p.d) throw ContractError("lff_forward: input has wrong feature count");
  const Index n = x.rows();
  const Index d = p.d;
  const Index m = p.m;
  RowMatrix<Scalar> z(n, d * m);
  if (p.variant == LffVariant::conv1x1) {
    // (N*D) x M view: z_row = x_nd * w^T + b^T
    Eigen::Map<RowMatrix<Scalar>> zv(z.data(), n * d, m);
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> xv(x.data(), n * d);
    zv.noalias() = xv * p.weight.col(0).transpose();
    zv.rowwise() += p.bias.transpose();
  } else {
    z.noalias() = x * p.weight.transpose();
    z.rowwise() += p.bias.transpose();
  }
  RowMatrix<Scalar> out(n, d * 2 * m);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      const auto zs = z.row(i).segment(j * m, m).array() * pi;
      out.row(i).segment(j * 2 * m, m) = zs.cos();
      out.row(i).segment(j * 2 * m + m, m) = zs.sin();
    }
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->z = std::move(z);
  }
  return out;
}

/// Exact gradients of lff_forward given the upstream gradient on its output.
template <typename Scalar>
LffGrads<Scalar> lff_backward(const RowMatrix<Scalar>& grad_out, const LffCache<Scalar>& cache,
                              const LffParams<Scalar>& p) {
  using Eigen::Index;
  const Index n = cache.x.rows();
  const Index d = p.d;
  const Index m = p.m;
  if (grad_out.rows() != n || grad_out.cols() != d * 2 * m || cache.z.rows() != n ||
      cache.z.cols() != d * m)
    throw ContractError("lff_backward: gradient shape does not match the cached forward pass");

  const Scalar pi = std::numbers::pi_v<Scalar>;
  RowMatrix<Scalar> dz(n, d * m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      const auto zs = cache.z.row(i).segment(j * m, m).array() * pi;
      const auto gc = grad_out.row(i).segment(j * 2 * m, m).array();
      const auto gs = grad_out.row(i).segment(j * 2 * m + m, m).array();
      dz.row(i).segment(j * m, m) = (gs * zs.cos() - gc * zs.sin()) * pi;
    }
  }

  LffGrads<Scalar> g;
  if (p.variant == LffVariant::conv1x1) {
    Eigen::Map<const RowMatrix<Scalar>> dzv(dz.data(), n * d, m);
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> xv(cache.x.data(), n * d);
    g.weight.resize(m, 1);
    g.weight.col(0).noalias() = dzv.transpose() * xv;
    g.bias = dzv.colwise().sum().transpose();
    g.input.resize(n, d);
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> gx(g.input.data(), n * d);
    gx.noalias() = dzv * p.weight.col(0);
  } else {
    g.weight.noalias() = dz.transpose() * cache.x;
    g.bias = dz.colwise().sum().transpose();
    g.input.noalias() = dz * p.weight;
  }
  return g;
}

}  // namespace icftab
