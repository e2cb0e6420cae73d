#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "icftab/lff.hpp"
#include "icftab/nn/tensor.hpp"

namespace icftab::nn {

namespace detail {

template <typename Scalar>
void uniform_fill(Scalar* p, Index n, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Index i = 0; i < n; ++i) p[i] = static_cast<Scalar>(u(rng));
}

}  // namespace detail

/// y = W x + b applied at every position; dense layers see length 1.
template <typename Scalar>
class Linear final : public Module<Scalar> {
 public:
  Linear(Index in, Index out, std::mt19937_64& rng)
      : weight(out, in), bias(out), weight_grad(Matrix<Scalar>::Zero(out, in)), bias_grad(Vector<Scalar>::Zero(out)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    detail::uniform_fill(weight.data(), weight.size(), bound, rng);
    detail::uniform_fill(bias.data(), bias.size(), bound, rng);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context&) override {
    if (x.channels() != weight.cols()) throw ContractError("Linear: input width mismatch");
    input_ = x;
    Tensor<Scalar> y;
    y.length = x.length;
    y.data.noalias() = weight * x.data;
    y.data.colwise() += bias;
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    weight_grad.noalias() = g.data * input_.data.transpose();
    bias_grad = g.data.rowwise().sum();
    Tensor<Scalar> dx;
    dx.length = g.length;
    dx.data.noalias() = weight.transpose() * g.data;
    return dx;
  }

  void collect_params(std::vector<ParamRef<Scalar>>& out) override {
    out.push_back({weight.data(), weight_grad.data(), weight.size(), "linear.weight"});
    out.push_back({bias.data(), bias_grad.data(), bias.size(), "linear.bias"});
  }
  std::string name() const override { return "Linear"; }

  Matrix<Scalar> weight;
  Vector<Scalar> bias;
  Matrix<Scalar> weight_grad;
  Vector<Scalar> bias_grad;

 private:
  Tensor<Scalar> input_;
};

/// 1D convolution along the length axis with "same" zero padding, stride 1.
/// Weight is out x (K * in); column k*in + c multiplies channel c at offset k.
template <typename Scalar>
class Conv1d final : public Module<Scalar> {
 public:
  Conv1d(Index in, Index out, Index kernel, std::mt19937_64& rng)
      : in_(in), kernel_(kernel), weight(out, in * kernel), bias(out),
        weight_grad(Matrix<Scalar>::Zero(out, in * kernel)), bias_grad(Vector<Scalar>::Zero(out)) {
    if (kernel < 1) throw ConfigError("Conv1d: kernel size must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel));
    detail::uniform_fill(weight.data(), weight.size(), bound, rng);
    detail::uniform_fill(bias.data(), bias.size(), bound, rng);
  }

  Index kernel() const { return kernel_; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context&) override {
    if (x.channels() != in_) throw ContractError("Conv1d: input channel mismatch");
    length_ = x.length;
    batch_ = x.batch();
    im2col(x);
    Tensor<Scalar> y;
    y.length = x.length;
    y.data.noalias() = weight * cols_;
    y.data.colwise() += bias;
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    weight_grad.noalias() = g.data * cols_.transpose();
    bias_grad = g.data.rowwise().sum();
    const Matrix<Scalar> dcols = weight.transpose() * g.data;
    Tensor<Scalar> dx;
    dx.length = length_;
    dx.data = Matrix<Scalar>::Zero(in_, batch_ * length_);
    const Index pad = (kernel_ - 1) / 2;
    for (Index k = 0; k < kernel_; ++k) {
      const Index s = k - pad;
      const Index lo = std::max<Index>(0, -s);
      const Index hi = std::min<Index>(length_, length_ - s);
      if (hi <= lo) continue;
      for (Index n = 0; n < batch_; ++n)
        dx.data.block(0, n * length_ + lo + s, in_, hi - lo) += dcols.block(k * in_, n * length_ + lo, in_, hi - lo);
    }
    return dx;
  }

  void collect_params(std::vector<ParamRef<Scalar>>& out) override {
    out.push_back({weight.data(), weight_grad.data(), weight.size(), "conv.weight"});
    out.push_back({bias.data(), bias_grad.data(), bias.size(), "conv.bias"});
  }
  std::string name() const override { return "Conv1d"; }

 private:
  void im2col(const Tensor<Scalar>& x) {
    cols_ = Matrix<Scalar>::Zero(in_ * kernel_, batch_ * length_);
    const Index pad = (kernel_ - 1) / 2;
    for (Index k = 0; k < kernel_; ++k) {
      const Index s = k - pad;
      const Index lo = std::max<Index>(0, -s);
      const Index hi = std::min<Index>(length_, length_ - s);
      if (hi <= lo) continue;
      for (Index n = 0; n < batch_; ++n)
        cols_.block(k * in_, n * length_ + lo, in_, hi - lo) = x.data.block(0, n * length_ + lo + s, in_, hi - lo);
    }
  }

  Index in_;
  Index kernel_;
  Index length_ = 0;
  Index batch_ = 0;
  Matrix<Scalar> cols_;

 public:
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
  Matrix<Scalar> weight_grad;
  Vector<Scalar> bias_grad;
};

/// Per-channel normalisation over every (sample, position) of the batch;
/// eval mode uses running statistics.
template <typename Scalar>
class BatchNorm final : public Module<Scalar> {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  explicit BatchNorm(Index channels)
      : gamma(Vector<Scalar>::Ones(channels)), beta(Vector<Scalar>::Zero(channels)),
        gamma_grad(Vector<Scalar>::Zero(channels)), beta_grad(Vector<Scalar>::Zero(channels)),
        running_mean(Vector<Scalar>::Zero(channels)), running_var(Vector<Scalar>::Ones(channels)) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context& ctx) override {
    training_ = ctx.training;
    const Index m = x.data.cols();
    Vector<Scalar> mean, var;
    if (training_) {
      mean = x.data.rowwise().mean();
      var = (x.data.colwise() - mean).array().square().rowwise().mean().matrix();
      if (m > 1) {
        const Scalar unbias = static_cast<Scalar>(m) / static_cast<Scalar>(m - 1);
        running_mean = (Scalar(1) - Scalar(kMomentum)) * running_mean + Scalar(kMomentum) * mean;
        running_var = (Scalar(1) - Scalar(kMomentum)) * running_var + Scalar(kMomentum) * unbias * var;
      }
    } else {
      mean = running_mean;
      var = running_var;
    }
    inv_std_ = (var.array() + Scalar(kEps)).rsqrt().matrix();
    xhat_ = (x.data.colwise() - mean).array().colwise() * inv_std_.array();
    Tensor<Scalar> y;
    y.length = x.length;
    y.data = (xhat_.array().colwise() * gamma.array()).colwise() + beta.array();
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    beta_grad = g.data.rowwise().sum();
    gamma_grad = (g.data.array() * xhat_.array()).rowwise().sum().matrix();
    Tensor<Scalar> dx;
    dx.length = g.length;
    const Matrix<Scalar> dxhat = g.data.array().colwise() * gamma.array();
    if (!training_) {
      dx.data = dxhat.array().colwise() * inv_std_.array();
      return dx;
    }
    const Scalar m = static_cast<Scalar>(g.data.cols());
    const Vector<Scalar> sum_dxhat = dxhat.rowwise().sum();
    const Vector<Scalar> sum_dxhat_xhat = (dxhat.array() * xhat_.array()).rowwise().sum().matrix();
    dx.data = ((dxhat.array() * m).colwise() - sum_dxhat.array() -
               xhat_.array().colwise() * sum_dxhat_xhat.array())
                  .colwise() *
              (inv_std_.array() / m);
    return dx;
  }

  void collect_params(std::vector<ParamRef<Scalar>>& out) override {
    out.push_back({gamma.data(), gamma_grad.data(), gamma.size(), "bn.gamma"});
    out.push_back({beta.data(), beta_grad.data(), beta.size(), "bn.beta"});
  }
  void collect_buffers(std::vector<BufferRef<Scalar>>& out) override {
    out.push_back({running_mean.data(), running_mean.size(), "bn.running_mean"});
    out.push_back({running_var.data(), running_var.size(), "bn.running_var"});
  }
  std::string name() const override { return "BatchNorm"; }

  Vector<Scalar> gamma, beta, gamma_grad, beta_grad;
  Vector<Scalar> running_mean, running_var;

 private:
  bool training_ = false;
  Vector<Scalar> inv_std_;
  Matrix<Scalar> xhat_;
};

/// Per-sample normalisation over all (channel, position) entries with a
/// per-channel affine.
template <typename Scalar>
class LayerNorm final : public Module<Scalar> {
 public:
  static constexpr double kEps = 1e-5;

  explicit LayerNorm(Index channels)
      : gamma(Vector<Scalar>::Ones(channels)), beta(Vector<Scalar>::Zero(channels)),
        gamma_grad(Vector<Scalar>::Zero(channels)), beta_grad(Vector<Scalar>::Zero(channels)) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context&) override {
    const Index len = x.length;
    const Index batch = x.batch();
    xhat_.resize(x.data.rows(), x.data.cols());
    inv_std_.resize(batch);
    for (Index n = 0; n < batch; ++n) {
      const auto blk = x.data.middleCols(n * len, len);
      const Scalar mean = blk.mean();
      const Scalar var = (blk.array() - mean).square().mean();
      inv_std_(n) = Scalar(1) / std::sqrt(var + Scalar(kEps));
      xhat_.middleCols(n * len, len) = (blk.array() - mean) * inv_std_(n);
    }
    Tensor<Scalar> y;
    y.length = len;
    y.data = (xhat_.array().colwise() * gamma.array()).colwise() + beta.array();
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    beta_grad = g.data.rowwise().sum();
    gamma_grad = (g.data.array() * xhat_.array()).rowwise().sum().matrix();
    const Matrix<Scalar> dxhat = g.data.array().colwise() * gamma.array();
    Tensor<Scalar> dx;
    dx.length = g.length;
    dx.data.resize(g.data.rows(), g.data.cols());
    const Index len = g.length;
    const Scalar m = static_cast<Scalar>(g.data.rows() * len);
    for (Index n = 0; n < static_cast<Index>(inv_std_.size()); ++n) {
      const auto d = dxhat.middleCols(n * len, len).array();
      const auto xh = xhat_.middleCols(n * len, len).array();
      const Scalar s1 = d.sum();
      const Scalar s2 = (d * xh).sum();
      dx.data.middleCols(n * len, len) = (d * m - s1 - xh * s2) * (inv_std_(n) / m);
    }
    return dx;
  }

  void collect_params(std::vector<ParamRef<Scalar>>& out) override {
    out.push_back({gamma.data(), gamma_grad.data(), gamma.size(), "ln.gamma"});
    out.push_back({beta.data(), beta_grad.data(), beta.size(), "ln.beta"});
  }
  std::string name() const override { return "LayerNorm"; }

  Vector<Scalar> gamma, beta, gamma_grad, beta_grad;

 private:
  Vector<Scalar> inv_std_;
  Matrix<Scalar> xhat_;
};

enum class ActivationKind { relu, leaky_relu };

inline std::string to_string(ActivationKind a) { return a == ActivationKind::relu ? "ReLU" : "LeakyReLU"; }
inline ActivationKind activation_from_string(const std::string& s) {
  if (s == "ReLU" || s == "relu") return ActivationKind::relu;
  if (s == "LeakyReLU" || s == "leaky_relu") return ActivationKind::leaky_relu;
  throw ConfigError("unknown activation '" + s + "'");
}

template <typename Scalar>
class Activation final : public Module<Scalar> {
 public:
  static constexpr double kLeakySlope = 0.01;

  explicit Activation(ActivationKind kind) : kind_(kind) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context&) override {
    input_ = x.data;
    Tensor<Scalar> y;
    y.length = x.length;
    if (kind_ == ActivationKind::relu)
      y.data = x.data.cwiseMax(Scalar(0));
    else
      y.data = (x.data.array() > Scalar(0)).select(x.data, x.data * Scalar(kLeakySlope));
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    const Scalar neg = kind_ == ActivationKind::relu ? Scalar(0) : Scalar(kLeakySlope);
    Tensor<Scalar> dx;
    dx.length = g.length;
    dx.data = (input_.array() > Scalar(0)).select(g.data, g.data * neg);
    return dx;
  }
  std::string name() const override { return to_string(kind_); }

 private:
  ActivationKind kind_;
  Matrix<Scalar> input_;
};

/// Inverted dropout; identity outside training.
template <typename Scalar>
class Dropout final : public Module<Scalar> {
 public:
  explicit Dropout(double p) : p_(p) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must lie in [0, 1)");
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context& ctx) override {
    active_ = ctx.training && p_ > 0.0;
    if (!active_) return x;
    const Scalar keep_scale = Scalar(1.0 / (1.0 - p_));
    mask_.resize(x.data.rows(), x.data.cols());
    // Four 16-bit uniforms per engine draw; keep when u < (1 - p) * 2^16.
    const auto threshold = static_cast<std::uint32_t>(std::lround((1.0 - p_) * 65536.0));
    Scalar* m = mask_.data();
    const Index n = mask_.size();
    for (Index i = 0; i < n; i += 4) {
      std::uint64_t bits = ctx.rng();
      for (Index k = i; k < std::min(n, i + 4); ++k, bits >>= 16)
        m[k] = (static_cast<std::uint32_t>(bits & 0xffffu) < threshold) ? keep_scale : Scalar(0);
    }
    Tensor<Scalar> y;
    y.length = x.length;
    y.data = x.data.cwiseProduct(mask_);
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    if (!active_) return g;
    Tensor<Scalar> dx;
    dx.length = g.length;
    dx.data = g.data.cwiseProduct(mask_);
    return dx;
  }
  std::string name() const override { return "Dropout"; }

 private:
  double p_;
  bool active_ = false;
  Matrix<Scalar> mask_;
};

enum class PoolKind { max, avg };

inline std::string to_string(PoolKind p) { return p == PoolKind::max ? "MaxPooling" : "AvgPooling"; }
inline PoolKind pool_from_string(const std::string& s) {
  if (s == "MaxPooling" || s == "max") return PoolKind::max;
  if (s == "AvgPooling" || s == "avg") return PoolKind::avg;
  throw ConfigError("unknown pooling '" + s + "'");
}

/// Window 2, stride 2 along the length axis; a trailing odd position is dropped.
template <typename Scalar>
class Pool1d final : public Module<Scalar> {
 public:
  explicit Pool1d(PoolKind kind) : kind_(kind) {}

  static Index output_length(Index length) { return length / 2; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context&) override {
    in_length_ = x.length;
    const Index out_len = output_length(x.length);
    if (out_len < 1) throw ConfigError("pooling would shrink the feature axis below 1");
    const Index batch = x.batch();
    const Index c = x.channels();
    Tensor<Scalar> y;
    y.length = out_len;
    y.data.resize(c, batch * out_len);
    if (kind_ == PoolKind::max) argmax_.resize(c, batch * out_len);
    for (Index n = 0; n < batch; ++n) {
      for (Index j = 0; j < out_len; ++j) {
        const Index a = n * in_length_ + 2 * j;
        const Index o = n * out_len + j;
        if (kind_ == PoolKind::avg) {
          y.data.col(o) = (x.data.col(a) + x.data.col(a + 1)) * Scalar(0.5);
        } else {
          for (Index ch = 0; ch < c; ++ch) {
            const bool second = x.data(ch, a + 1) > x.data(ch, a);
            argmax_(ch, o) = second ? 1 : 0;
            y.data(ch, o) = second ? x.data(ch, a + 1) : x.data(ch, a);
          }
        }
      }
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    const Index out_len = g.length;
    const Index batch = g.batch();
    const Index c = g.channels();
    Tensor<Scalar> dx;
    dx.length = in_length_;
    dx.data = Matrix<Scalar>::Zero(c, batch * in_length_);
    for (Index n = 0; n < batch; ++n) {
      for (Index j = 0; j < out_len; ++j) {
        const Index a = n * in_length_ + 2 * j;
        const Index o = n * out_len + j;
        if (kind_ == PoolKind::avg) {
          dx.data.col(a) = g.data.col(o) * Scalar(0.5);
          dx.data.col(a + 1) = g.data.col(o) * Scalar(0.5);
        } else {
          for (Index ch = 0; ch < c; ++ch) dx.data(ch, a + argmax_(ch, o)) = g.data(ch, o);
        }
      }
    }
    return dx;
  }
  std::string name() const override { return to_string(kind_); }

 private:
  PoolKind kind_;
  Index in_length_ = 0;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> argmax_;
};

/// Averages each channel over the length axis; output length 1.
template <typename Scalar>
class MeanOverLength final : public Module<Scalar> {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context&) override {
    in_length_ = x.length;
    const Index batch = x.batch();
    Tensor<Scalar> y;
    y.length = 1;
    y.data.resize(x.channels(), batch);
    for (Index n = 0; n < batch; ++n) y.data.col(n) = x.data.middleCols(n * in_length_, in_length_).rowwise().mean();
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    Tensor<Scalar> dx;
    dx.length = in_length_;
    dx.data.resize(g.channels(), g.batch() * in_length_);
    const Scalar w = Scalar(1) / static_cast<Scalar>(in_length_);
    for (Index n = 0; n < g.batch(); ++n)
      dx.data.middleCols(n * in_length_, in_length_) = (g.data.col(n) * w).replicate(1, in_length_);
    return dx;
  }
  std::string name() const override { return "MeanOverLength"; }

 private:
  Index in_length_ = 1;
};

/// (C, N*L) -> (C*L, N): each sample becomes one feature-major column.
template <typename Scalar>
class Flatten final : public Module<Scalar> {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context&) override {
    channels_ = x.channels();
    length_ = x.length;
    Tensor<Scalar> y;
    y.length = 1;
    y.data = x.flat();
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    Tensor<Scalar> dx;
    dx.length = length_;
    dx.data = Eigen::Map<const Matrix<Scalar>>(g.data.data(), channels_, g.data.cols() * length_);
    return dx;
  }
  std::string name() const override { return "Flatten"; }

 private:
  Index channels_ = 0;
  Index length_ = 1;
};

/// Learned Fourier Feature embedding of a single-channel input of length D
/// into 2M channels of the same length.
template <typename Scalar>
class LffLayer final : public Module<Scalar> {
 public:
  explicit LffLayer(LffParams<Scalar> p)
      : params(std::move(p)), weight_grad(Matrix<Scalar>::Zero(params.weight.rows(), params.weight.cols())),
        bias_grad(Vector<Scalar>::Zero(params.bias.size())) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context&) override {
    if (x.channels() != 1 || x.length != params.d) throw ContractError("LffLayer: expects 1 x D input");
    const Index n = x.batch();
    const RowMatrix<Scalar> xr = Eigen::Map<const RowMatrix<Scalar>>(x.data.data(), n, params.d);
    const RowMatrix<Scalar> out = lff_forward(xr, params, &cache_);
    Tensor<Scalar> y;
    y.length = params.d;
    y.data = Eigen::Map<const Matrix<Scalar>>(out.data(), 2 * params.m, n * params.d);
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    const Index n = g.batch();
    const RowMatrix<Scalar> gr = Eigen::Map<const RowMatrix<Scalar>>(g.data.data(), n, params.d * 2 * params.m);
    auto grads = lff_backward(gr, cache_, params);
    weight_grad = grads.weight;
    bias_grad = grads.bias;
    Tensor<Scalar> dx;
    dx.length = params.d;
    dx.data = Eigen::Map<const Matrix<Scalar>>(grads.input.data(), 1, n * params.d);
    return dx;
  }

  void collect_params(std::vector<ParamRef<Scalar>>& out) override {
    out.push_back({params.weight.data(), weight_grad.data(), params.weight.size(), "lff.weight"});
    out.push_back({params.bias.data(), bias_grad.data(), params.bias.size(), "lff.bias"});
  }
  std::string name() const override { return to_string(params.variant); }

  LffParams<Scalar> params;
  Matrix<Scalar> weight_grad;
  Vector<Scalar> bias_grad;

 private:
  LffCache<Scalar> cache_;
};

/// Combined preprocessing: one-hot categorical columns pass through, the
/// numerical columns (channel 0 of the encoded input) go through LFF, and the
/// result is [categorical columns..., numerical columns...] with both blocks
/// zero-padded to a common channel depth.
template <typename Scalar>
class CombinedEmbedding final : public Module<Scalar> {
 public:
  CombinedEmbedding(Index in_channels, std::vector<Index> categorical, std::vector<Index> numerical,
                    std::optional<LffParams<Scalar>> lff)
      : in_channels_(in_channels), cat_(std::move(categorical)), num_(std::move(numerical)) {
    if (!num_.empty()) {
      if (!lff || lff->d != static_cast<Index>(num_.size()))
        throw ContractError("CombinedEmbedding: LFF parameters must cover the numerical columns");
      lff_.emplace(std::move(*lff));
    }
    out_channels_ = std::max<Index>(cat_.empty() ? 1 : in_channels_, lff_ ? 2 * lff_->params.m : 1);
  }

  Index out_channels() const { return out_channels_; }
  Index out_length() const { return static_cast<Index>(cat_.size() + num_.size()); }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context& ctx) override {
    in_length_ = x.length;
    const Index batch = x.batch();
    const Index dc = static_cast<Index>(cat_.size());
    const Index dn = static_cast<Index>(num_.size());
    const Index lout = dc + dn;
    Tensor<Scalar> y;
    y.length = lout;
    y.data = Matrix<Scalar>::Zero(out_channels_, batch * lout);
    for (Index n = 0; n < batch; ++n)
      for (Index i = 0; i < dc; ++i)
        y.data.block(0, n * lout + i, in_channels_, 1) = x.data.col(n * in_length_ + cat_[static_cast<std::size_t>(i)]);
    if (lff_) {
      Tensor<Scalar> xn;
      xn.length = dn;
      xn.data.resize(1, batch * dn);
      for (Index n = 0; n < batch; ++n)
        for (Index j = 0; j < dn; ++j) xn.data(0, n * dn + j) = x.data(0, n * in_length_ + num_[static_cast<std::size_t>(j)]);
      const Tensor<Scalar> e = lff_->forward(xn, ctx);
      for (Index n = 0; n < batch; ++n)
        y.data.block(0, n * lout + dc, e.channels(), dn) = e.data.middleCols(n * dn, dn);
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    const Index batch = g.batch();
    const Index dc = static_cast<Index>(cat_.size());
    const Index dn = static_cast<Index>(num_.size());
    const Index lout = dc + dn;
    Tensor<Scalar> dx;
    dx.length = in_length_;
    dx.data = Matrix<Scalar>::Zero(in_channels_, batch * in_length_);
    for (Index n = 0; n < batch; ++n)
      for (Index i = 0; i < dc; ++i)
        dx.data.col(n * in_length_ + cat_[static_cast<std::size_t>(i)]) = g.data.block(0, n * lout + i, in_channels_, 1);
    if (lff_) {
      const Index ec = 2 * lff_->params.m;
      Tensor<Scalar> ge;
      ge.length = dn;
      ge.data.resize(ec, batch * dn);
      for (Index n = 0; n < batch; ++n) ge.data.middleCols(n * dn, dn) = g.data.block(0, n * lout + dc, ec, dn);
      const Tensor<Scalar> gx = lff_->backward(ge);
      for (Index n = 0; n < batch; ++n)
        for (Index j = 0; j < dn; ++j) dx.data(0, n * in_length_ + num_[static_cast<std::size_t>(j)]) = gx.data(0, n * dn + j);
    }
    return dx;
  }

  void collect_params(std::vector<ParamRef<Scalar>>& out) override {
    if (lff_) lff_->collect_params(out);
  }
  std::string name() const override { return "CombinedEmbedding"; }

 private:
  Index in_channels_;
  std::vector<Index> cat_;
  std::vector<Index> num_;
  std::optional<LffLayer<Scalar>> lff_;
  Index out_channels_ = 1;
  Index in_length_ = 0;
};

/// conv -> [norm] -> act -> [dropout] -> conv -> [norm], plus the shortcut
/// (1x1 projection when channel counts differ), then act.
template <typename Scalar>
class ResidualBlock final : public Module<Scalar> {
 public:
  enum class Norm { none, batch, layer };

  ResidualBlock(Index in, Index out, Index kernel, Norm norm, ActivationKind act, double dropout,
                std::mt19937_64& rng)
      : conv1_(in, out, kernel, rng), act1_(act), conv2_(out, out, kernel, rng), act_out_(act) {
    norm1_ = make_norm(norm, out);
    norm2_ = make_norm(norm, out);
    if (dropout > 0.0) drop_ = std::make_unique<Dropout<Scalar>>(dropout);
    if (in != out) shortcut_ = std::make_unique<Conv1d<Scalar>>(in, out, 1, rng);
  }

  Conv1d<Scalar>& second_conv() { return conv2_; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context& ctx) override {
    Tensor<Scalar> h = conv1_.forward(x, ctx);
    if (norm1_) h = norm1_->forward(h, ctx);
    h = act1_.forward(h, ctx);
    if (drop_) h = drop_->forward(h, ctx);
    h = conv2_.forward(h, ctx);
    if (norm2_) h = norm2_->forward(h, ctx);
    if (shortcut_)
      h.data += shortcut_->forward(x, ctx).data;
    else
      h.data += x.data;
    return act_out_.forward(h, ctx);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    const Tensor<Scalar> gs = act_out_.backward(g);
    Tensor<Scalar> gh = gs;
    if (norm2_) gh = norm2_->backward(gh);
    gh = conv2_.backward(gh);
    if (drop_) gh = drop_->backward(gh);
    gh = act1_.backward(gh);
    if (norm1_) gh = norm1_->backward(gh);
    Tensor<Scalar> dx = conv1_.backward(gh);
    if (shortcut_)
      dx.data += shortcut_->backward(gs).data;
    else
      dx.data += gs.data;
    return dx;
  }

  void collect_params(std::vector<ParamRef<Scalar>>& out) override {
    conv1_.collect_params(out);
    if (norm1_) norm1_->collect_params(out);
    conv2_.collect_params(out);
    if (norm2_) norm2_->collect_params(out);
    if (shortcut_) shortcut_->collect_params(out);
  }
  void collect_buffers(std::vector<BufferRef<Scalar>>& out) override {
    if (norm1_) norm1_->collect_buffers(out);
    if (norm2_) norm2_->collect_buffers(out);
  }
  std::string name() const override { return "ResidualBlock"; }

 private:
  static std::unique_ptr<Module<Scalar>> make_norm(Norm n, Index channels) {
    switch (n) {
      case Norm::batch: return std::make_unique<BatchNorm<Scalar>>(channels);
      case Norm::layer: return std::make_unique<LayerNorm<Scalar>>(channels);
      case Norm::none: break;
    }
    return nullptr;
  }

  Conv1d<Scalar> conv1_;
  std::unique_ptr<Module<Scalar>> norm1_;
  Activation<Scalar> act1_;
  std::unique_ptr<Dropout<Scalar>> drop_;
  Conv1d<Scalar> conv2_;
  std::unique_ptr<Module<Scalar>> norm2_;
  std::unique_ptr<Conv1d<Scalar>> shortcut_;
  Activation<Scalar> act_out_;
};

}  // namespace icftab::nn
