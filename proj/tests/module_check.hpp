#pragma once

#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "icftab/nn/tensor.hpp"

namespace gradcheck {

using icftab::nn::Index;
using Tensor = icftab::nn::Tensor<double>;

inline Tensor random_tensor(Index channels, Index batch, Index length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Tensor t;
  t.length = length;
  t.data.resize(channels, batch * length);
  for (Index i = 0; i < t.data.size(); ++i) t.data.data()[i] = nd(rng);
  return t;
}

struct ModuleReport {
  double input = 0.0;
  double params = 0.0;
  double worst() const { return std::max(input, params); }
};

/// Central-difference check of loss = sum(G * module(x)) for the input and
/// every parameter. The dropout RNG is reseeded each pass so masks repeat.
inline ModuleReport check_module(icftab::nn::Module<double>& m, Tensor x, bool training = true,
                                 std::uint64_t seed = 77) {
  using namespace icftab::nn;
  auto run = [&]() {
    Context ctx;
    ctx.training = training;
    ctx.rng.seed(5);
    return m.forward(x, ctx);
  };
  const Tensor out = run();
  const Tensor g = random_tensor(out.channels(), out.batch(), out.length, seed);
  auto loss = [&]() { return (run().data.array() * g.data.array()).sum(); };

  run();
  const Matrix<double> dx = m.backward(g).data;
  std::vector<ParamRef<double>> params;
  m.collect_params(params);
  std::vector<Vector<double>> grads;
  for (const auto& p : params) grads.emplace_back(Eigen::Map<const Vector<double>>(p.grad, p.size));

  ModuleReport r;
  r.input = max_rel_error(x.data, dx, loss);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::Map<Vector<double>> value(params[i].value, params[i].size);
    r.params = std::max(r.params, max_rel_error(value, grads[i], loss));
  }
  return r;
}

}  // namespace gradcheck
