#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "icftab/nn/loss.hpp"
#include "icftab/nn/models.hpp"
#include "icftab/nn/optim.hpp"
#include "icftab/nn/snapshot.hpp"
#include "icftab/tabular.hpp"

namespace icftab::nn {

enum class StopReason { patience, max_epochs, divergence };

std::string to_string(StopReason r);
StopReason stop_reason_from_string(const std::string& s);

struct EarlyStopping {
  int patience = 40;
  int max_epochs = 400;
};

struct TrainState {
  double best_criterion = std::numeric_limits<double>::quiet_NaN();
  int best_epoch = 0;  // 1-based; 0 when no epoch produced a finite criterion
  int epochs_run = 0;
  StopReason reason = StopReason::max_epochs;
  std::vector<double> history;  // criterion per epoch
};

struct EpochOutcome {
  double loss = 0.0;
  double criterion = 0.0;
};

/// Epoch loop with patience. `epoch(e)` trains epoch e (1-based) and returns
/// its loss and validation criterion; `snap()` is called on every strict
/// improvement and `restore()` once at the end when a snapshot exists. A
/// non-finite loss or a NaN criterion stops with divergence and reports
/// `worst` as the criterion.
template <typename EpochFn, typename SnapFn, typename RestoreFn>
TrainState run_early_stopping(const EarlyStopping& es, bool maximize, double worst, EpochFn&& epoch, SnapFn&& snap,
                              RestoreFn&& restore) {
  TrainState st;
  bool have_best = false;
  for (int e = 1; e <= es.max_epochs; ++e) {
    const EpochOutcome out = epoch(e);
    st.epochs_run = e;
    st.history.push_back(out.criterion);
    if (!std::isfinite(out.loss) || std::isnan(out.criterion)) {
      if (have_best) restore();
      st.reason = StopReason::divergence;
      st.best_criterion = worst;
      return st;
    }
    const bool better = !have_best || (maximize ? out.criterion > st.best_criterion : out.criterion < st.best_criterion);
    if (better) {
      have_best = true;
      st.best_criterion = out.criterion;
      st.best_epoch = e;
      snap();
    } else if (e - st.best_epoch >= es.patience) {
      st.reason = StopReason::patience;
      restore();
      return st;
    }
  }
  st.reason = StopReason::max_epochs;
  if (have_best) restore();
  return st;
}

/// Validation criterion: accuracy of (output > 0) for classification, MAE on
/// the original target scale for regression.
double criterion(Task task, const Eigen::VectorXd& output, const Eigen::VectorXd& y_original,
                 const TargetTransform& target);
inline bool criterion_maximize(Task task) { return task == Task::classification; }
inline double criterion_worst(Task task) {
  return task == Task::classification ? 0.0 : std::numeric_limits<double>::infinity();
}

/// Test metric: accuracy for classification, r2 on the original scale for regression.
double test_metric(Task task, const Eigen::VectorXd& output, const Eigen::VectorXd& y_original,
                   const TargetTransform& target);

/// Evaluation-mode forward pass in chunks; returns the scalar head output per sample.
template <typename Scalar>
Eigen::VectorXd predict(Sequential<Scalar>& net, const Tensor<Scalar>& x, Index chunk = 1024) {
  Context ctx;
  ctx.training = false;
  const Index n = x.batch();
  Eigen::VectorXd out(n);
  std::vector<Index> idx;
  for (Index start = 0; start < n; start += chunk) {
    const Index len = std::min(chunk, n - start);
    idx.resize(static_cast<std::size_t>(len));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor<Scalar> y = net.forward(gather_samples(x, std::span<const Index>(idx)), ctx);
    out.segment(start, len) = y.data.row(0).transpose().template cast<double>();
  }
  return out;
}

template <typename Scalar>
struct TrainProblem {
  Task task = Task::classification;
  Tensor<Scalar> x_train;
  Vector<Scalar> y_train;        // transformed scale for regression
  Tensor<Scalar> x_stop;
  Eigen::VectorXd y_stop;        // original scale
  TargetTransform target;
};

struct TrainOptions {
  OptimizerConfig optimizer;
  EarlyStopping early_stopping;
  Index batch_size = 256;
  std::uint64_t seed = 0;
};

/// Minibatch AdamW with a per-epoch cosine warm-restart schedule and early
/// stopping on the stop split. The network ends in the best-epoch state.
template <typename Scalar>
TrainState train(Sequential<Scalar>& net, const TrainProblem<Scalar>& prob, const TrainOptions& opt) {
  opt.optimizer.validate();
  const Index n = prob.x_train.batch();
  if (n < 1 || prob.y_train.size() != n) throw ContractError("train: empty or mismatched training data");
  AdamWHyper hyper;
  hyper.lr = opt.optimizer.learning_rate;
  hyper.eps = opt.optimizer.eps;
  hyper.weight_decay = opt.optimizer.weight_decay;
  AdamW<Scalar> adam(net.params(), hyper);

  Context ctx;
  ctx.rng.seed(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 shuffle_rng(opt.seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  const Index bs = std::min(opt.batch_size, n);
  Snapshot best;

  auto epoch = [&](int e) -> EpochOutcome {
    const double lr = cosine_warm_restart_lr(e - 1, opt.optimizer.t0, opt.optimizer.t_mult, opt.optimizer.learning_rate);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    ctx.training = true;
    double loss_sum = 0.0;
    Index start = 0;
    while (start < n) {
      Index len = std::min(bs, n - start);
      // A trailing batch of one sample would break batch statistics; fold it in.
      if (n - (start + len) == 1) ++len;
      const std::span<const Index> idx(order.data() + start, static_cast<std::size_t>(len));
      const Tensor<Scalar> xb = gather_samples(prob.x_train, idx);
      Vector<Scalar> yb(len);
      for (Index i = 0; i < len; ++i) yb(i) = prob.y_train(idx[static_cast<std::size_t>(i)]);
      const Tensor<Scalar> out = net.forward(xb, ctx);
      const LossResult<Scalar> l = prob.task == Task::classification ? bce_with_logits(out, yb) : mse(out, yb);
      if (!std::isfinite(l.value)) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
      net.backward(l.grad);
      adam.step(lr);
      loss_sum += l.value * static_cast<double>(len);
      start += len;
    }
    const Eigen::VectorXd pred = predict(net, prob.x_stop);
    if (!pred.allFinite()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    return {loss_sum / static_cast<double>(n), criterion(prob.task, pred, prob.y_stop, prob.target)};
  };

  return run_early_stopping(
      opt.early_stopping, criterion_maximize(prob.task), criterion_worst(prob.task), epoch,
      [&] { best = capture(net); }, [&] { restore(net, best); });
}

}  // namespace icftab::nn
