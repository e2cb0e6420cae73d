#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "icftab/errors.hpp"

namespace icftab::nn {

using Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Batch of samples, each a (channels x length) sequence. Stored as a
/// channels x (batch * length) column-major matrix; column n*length + l holds
/// position l of sample n. Dense layers use length 1.
template <typename Scalar>
struct Tensor {
  Matrix<Scalar> data;
  Index length = 1;

  Index channels() const { return data.rows(); }
  Index batch() const { return length == 0 ? 0 : data.cols() / length; }

  /// Same memory seen as (channels * length) x batch, i.e. each sample flattened
  /// feature-major.
  Eigen::Map<const Matrix<Scalar>> flat() const {
    return {data.data(), data.rows() * length, batch()};
  }
};

/// Copies the listed samples into a new tensor.
template <typename Scalar>
Tensor<Scalar> gather_samples(const Tensor<Scalar>& t, std::span<const Index> samples) {
  Tensor<Scalar> out;
  out.length = t.length;
  out.data.resize(t.channels(), static_cast<Index>(samples.size()) * t.length);
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.data.middleCols(static_cast<Index>(i) * t.length, t.length) =
        t.data.middleCols(samples[i] * t.length, t.length);
  return out;
}

/// A trainable array: value and gradient buffers of equal size.
template <typename Scalar>
struct ParamRef {
  Scalar* value = nullptr;
  Scalar* grad = nullptr;
  Index size = 0;
  std::string name;
};

/// Non-trainable state that belongs in a snapshot (running statistics).
template <typename Scalar>
struct BufferRef {
  Scalar* value = nullptr;
  Index size = 0;
  std::string name;
};

/// Per-pass state: training mode and the dropout RNG.
struct Context {
  bool training = false;
  std::mt19937_64 rng{0};
};

template <typename Scalar>
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor<Scalar> forward(const Tensor<Scalar>& x, Context& ctx) = 0;
  /// Gradient with respect to the last forward input; writes parameter grads.
  virtual Tensor<Scalar> backward(const Tensor<Scalar>& grad) = 0;
  virtual void collect_params(std::vector<ParamRef<Scalar>>&) {}
  virtual void collect_buffers(std::vector<BufferRef<Scalar>>&) {}
  virtual std::string name() const = 0;
};

template <typename Scalar>
class Sequential final : public Module<Scalar> {
 public:
  Sequential() = default;

  template <typename M, typename... Args>
  M& emplace(Args&&... args) {
    auto ptr = std::make_unique<M>(std::forward<Args>(args)...);
    M& ref = *ptr;
    layers_.push_back(std::move(ptr));
    return ref;
  }
  void push(std::unique_ptr<Module<Scalar>> m) { layers_.push_back(std::move(m)); }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context& ctx) override {
    Tensor<Scalar> h = x;
    for (auto& l : layers_) h = l->forward(h, ctx);
    return h;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& grad) override {
    Tensor<Scalar> g = grad;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }
  void collect_params(std::vector<ParamRef<Scalar>>& out) override {
    for (auto& l : layers_) l->collect_params(out);
  }
  void collect_buffers(std::vector<BufferRef<Scalar>>& out) override {
    for (auto& l : layers_) l->collect_buffers(out);
  }
  std::string name() const override { return "Sequential"; }

  std::size_t size() const { return layers_.size(); }
  Module<Scalar>& at(std::size_t i) { return *layers_.at(i); }

  std::vector<ParamRef<Scalar>> params() {
    std::vector<ParamRef<Scalar>> p;
    collect_params(p);
    return p;
  }
  std::vector<BufferRef<Scalar>> buffers() {
    std::vector<BufferRef<Scalar>> b;
    collect_buffers(b);
    return b;
  }

 private:
  std::vector<std::unique_ptr<Module<Scalar>>> layers_;
};

}  // namespace icftab::nn
