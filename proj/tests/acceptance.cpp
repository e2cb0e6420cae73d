// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails. Pass criterion ids as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "icftab/cfd.hpp"
#include "icftab/icf.hpp"
#include "icftab/nn/layers.hpp"
#include "icftab/nn/loss.hpp"
#include "icftab/report.hpp"
#include "icftab/search.hpp"
#include "icftab/special.hpp"
#include "icftab/stats.hpp"
#include "module_check.hpp"
#include "oracles.hpp"

using namespace icftab;
namespace sp = icftab::special;
using namespace icftab::stats;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit;  // seconds
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

// ---------------------------------------------------------------- 1

Outcome special_functions() {
  std::mt19937_64 rng(20261018);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int points = 1000;
  double chi = 0, beta = 0, f = 0, ppf = 0;
  for (int i = 0; i < points; ++i) {
    const double k = std::round(1.0 + 99.0 * u(rng));
    const double x = 3.0 * k * u(rng);
    chi = std::max(chi, std::abs(sp::chi2_sf(x, k) - oracle::chi2_sf(x, k)));
  }
  for (int i = 0; i < points; ++i) {
    const double a = 0.5 + 19.5 * u(rng), b = 0.5 + 19.5 * u(rng), x = u(rng);
    beta = std::max(beta, std::abs(sp::reg_inc_beta(a, b, x) - oracle::reg_inc_beta(a, b, x)));
  }
  for (int i = 0; i < points; ++i) {
    const double d1 = std::round(1.0 + 49.0 * u(rng)), d2 = std::round(1.0 + 49.0 * u(rng));
    const double x = 10.0 * u(rng);
    f = std::max(f, std::abs(sp::f_sf(x, d1, d2) - oracle::f_sf(x, d1, d2)));
  }
  for (int i = 0; i < points; ++i) {
    // Half the points in the tails, log-uniform down to 1e-12.
    double p = i % 2 == 0 ? u(rng) : std::pow(10.0, -12.0 * u(rng)) * 0.5;
    if (i % 4 == 3) p = 1.0 - p;
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    ppf = std::max(ppf, std::abs(sp::norm_ppf(p) - oracle::norm_ppf(p)));
  }
  const double worst = std::max({chi, beta, f, ppf});
  return {worst <= 1e-9,
          fmt("max abs error chi2_sf %.2e, reg_inc_beta %.2e, f_sf %.2e, norm_ppf %.2e", chi, beta, f, ppf)};
}

// ---------------------------------------------------------------- 2

TestResult chi2_of(const std::vector<std::vector<int>>& counts) {
  std::vector<int> x, y;
  for (std::size_t r = 0; r < counts.size(); ++r)
    for (std::size_t c = 0; c < counts[r].size(); ++c)
      for (int i = 0; i < counts[r][c]; ++i) {
        x.push_back(static_cast<int>(r));
        y.push_back(static_cast<int>(c));
      }
  return chi2_independence(x, y);
}

Outcome statistical_tests() {
  std::vector<std::string> bad;
  auto near = [&](const std::string& what, double got, double want, double tol) {
    if (!(std::abs(got - want) <= tol)) bad.push_back(fmt("%s: %.15g vs %.15g", what.c_str(), got, want));
  };

  const auto diag = chi2_of({{10, 0}, {0, 10}});
  near("diag statistic", diag.statistic, 20.0, 1e-12);
  near("diag p", diag.p_value, std::erfc(std::sqrt(10.0)), 1e-12);
  const auto flat = chi2_of({{5, 5}, {5, 5}});
  near("flat statistic", flat.statistic, 0.0, 1e-12);
  near("flat p", flat.p_value, 1.0, 1e-12);
  // Expected counts 18 18 24 / 12 12 16; statistic 475/36 on 2 dof.
  const auto wide = chi2_of({{10, 20, 30}, {20, 10, 10}});
  near("2x3 statistic", wide.statistic, 475.0 / 36.0, 1e-12);
  near("2x3 dof", wide.dof, 2.0, 0.0);
  near("2x3 p", wide.p_value, std::exp(-475.0 / 72.0), 1e-12);

  Eigen::VectorXd g1(4), g2(4);
  g1 << 1, 2, 3, 4;
  g2 << 3, 4, 5, 6;
  const auto an = anova_oneway({g1, g2});
  near("anova F", an.statistic, 4.8, 1e-12);
  near("anova p", an.p_value, oracle::f_sf(4.8, 1.0, 6.0), 1e-9);

  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int levels = 1 + static_cast<int>(rng() % 12);
    const std::size_t n = 1 + rng() % 500;
    std::vector<int> a(n);
    std::map<int, double> freq;
    for (auto& v : a) {
      v = static_cast<int>(rng() % static_cast<unsigned>(levels));
      freq[v] += 1.0;
    }
    double h = 0.0;
    for (const auto& [_, c] : freq) h -= (c / n) * std::log(c / n);
    worst = std::max(worst, std::abs(mutual_info_discrete(a, a) - h));
  }
  near("MI(a,a) - H(a)", worst, 0.0, 1e-12);

  return {bad.empty(), bad.empty() ? fmt("chi2 tables, F = %.12g, max |MI(a,a) - H| = %.1e", an.statistic, worst)
                                   : bad.front()};
}

// ---------------------------------------------------------------- 3

Outcome icf_classification() {
  IcfConfig cfg;
  cfg.test = IcfTest::chi2;
  cfg.chi_thresh = 1e-3;
  int hits = 0, false_pos = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto rep = run_icf(gen_planted_icf(4000, 20, 3, 0.1, seed), cfg);
    hits += rep.columns[0].flagged;
    for (std::size_t j = 1; j < rep.columns.size(); ++j) false_pos += rep.columns[j].flagged;
  }
  return {hits >= 19 && false_pos <= 2, fmt("planted flagged %d/20, false positives %d (3 noise columns)", hits, false_pos)};
}

// ---------------------------------------------------------------- 4

Outcome icf_regression() {
  IcfConfig anova;
  anova.test = IcfTest::anova;
  IcfConfig mi;
  mi.test = IcfTest::mutual_info;
  mi.mi_thresh = 1.25;
  int anova_hits = 0, perm_hits = 0, lin_declined = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    anova_hits += run_icf(gen_planted_regression(1000, 10, 2, 3.0, PlantedMode::permuted, seed), anova).columns[0].flagged;
    perm_hits += run_icf(gen_planted_regression(4000, 50, 1, 3.0, PlantedMode::permuted, seed), mi).columns[0].flagged;
    lin_declined += !run_icf(gen_planted_regression(4000, 50, 1, 3.0, PlantedMode::linear, seed), mi).columns[0].flagged;
  }
  return {anova_hits >= 19 && perm_hits >= 18 && lin_declined >= 18,
          fmt("anova flagged %d/20, MI permuted flagged %d/20, MI linear declined %d/20", anova_hits, perm_hits,
              lin_declined)};
}

// ---------------------------------------------------------------- 5

Outcome encoding_properties() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int failures = 0;
  std::string first;
  auto fail = [&](int c, const std::string& why) {
    if (failures++ == 0) first = fmt("case %d: %s", c, why.c_str());
  };
  const int cases = 1000;
  for (int c = 0; c < cases; ++c) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 30);
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 6);
    Dataset ds;
    ds.id = "prop";
    ds.task = Task::classification;
    ds.X.resize(n, d);
    ds.y = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < d; ++j) {
      const int levels = 1 + static_cast<int>(rng() % 8);
      for (Eigen::Index i = 0; i < n; ++i) ds.X(i, j) = std::floor(u(rng) * levels) * 1.5 - 2.0;
      ds.columns.push_back({"c" + std::to_string(j), ColumnKind::numerical, 0, static_cast<std::size_t>(j)});
    }
    ds.split.resize(static_cast<std::size_t>(n));
    for (auto& s : ds.split) s = u(rng) < 0.7 ? Split::train : Split::test;
    ds.split[0] = Split::train;
    refit_column_meta(ds);

    std::vector<std::size_t> icf;
    for (Eigen::Index j = 0; j < d; ++j)
      if (u(rng) < 0.5) icf.push_back(static_cast<std::size_t>(j));
    const CfdOptions opt{.append_raw = u(rng) < 0.3};

    // Reference bins: distinct training values per encoded column.
    std::map<std::size_t, std::vector<double>> bins;
    for (auto j : icf) {
      std::set<double> seen;
      for (Eigen::Index i = 0; i < n; ++i)
        if (ds.split[static_cast<std::size_t>(i)] == Split::train) seen.insert(ds.X(i, static_cast<Eigen::Index>(j)));
      bins[j].assign(seen.begin(), seen.end());
    }
    Eigen::Index want_m = 0;
    for (const auto& [_, v] : bins) want_m = std::max<Eigen::Index>(want_m, static_cast<Eigen::Index>(v.size()));
    want_m = std::max<Eigen::Index>(1, want_m + (opt.append_raw ? 1 : 0));

    const auto maps = fit_binmaps(ds, icf);
    const Eigen::Index m = channel_depth(maps, opt);
    if (m != want_m) {
      fail(c, fmt("depth %ld, want %ld", static_cast<long>(m), static_cast<long>(want_m)));
      continue;
    }
    const Eigen::Index pad = m + static_cast<Eigen::Index>(rng() % 3);
    Eigen::MatrixXd stdz = Eigen::MatrixXd::Random(n, d);
    const auto t = encode(ds.X, stdz, maps, pad, opt);
    const Eigen::MatrixXd flat = flatten(t);
    if (t.n != n || t.d != d || t.m != pad || flat.rows() != n || flat.cols() != d * pad) {
      fail(c, "shape");
      continue;
    }
    const Eigen::Index shift = opt.append_raw ? 1 : 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::VectorXd want = Eigen::VectorXd::Zero(pad);
        const auto it = bins.find(static_cast<std::size_t>(j));
        if (it == bins.end()) {
          want(0) = stdz(i, j);
        } else {
          if (opt.append_raw) want(0) = stdz(i, j);
          const auto& v = it->second;
          const auto pos = std::find(v.begin(), v.end(), ds.X(i, j));
          if (pos != v.end()) want(shift + (pos - v.begin())) = 1.0;
          const double onehot = flat.row(i).segment(j * pad + shift, pad - shift).sum();
          if (onehot != (pos != v.end() ? 1.0 : 0.0)) fail(c, "one-hot channel sum");
        }
        for (Eigen::Index ch = 0; ch < pad; ++ch) {
          if (flat(i, j * pad + ch) != want(ch)) fail(c, fmt("value at row %ld col %ld ch %ld", long(i), long(j), long(ch)));
          if (t(i, j, ch) != flat(i, j * pad + ch)) fail(c, "flatten layout");
        }
      }
    if (t.categorical.size() != static_cast<std::size_t>(d)) fail(c, "categorical mask size");
    for (Eigen::Index j = 0; j < d; ++j)
      if (t.categorical[static_cast<std::size_t>(j)] != bins.contains(static_cast<std::size_t>(j))) fail(c, "mask");
  }
  return {failures == 0, failures == 0 ? fmt("%d randomized datasets, all invariants hold", cases)
                                       : fmt("%d violations; first %s", failures, first.c_str())};
}

// ---------------------------------------------------------------- 6

Outcome gradients() {
  using namespace icftab::nn;
  using gradcheck::random_tensor;
  std::mt19937_64 rng(6);
  auto pick = [&](int lo, int hi) { return static_cast<Index>(lo + static_cast<int>(rng() % (hi - lo + 1))); };
  std::map<std::string, double> worst;
  auto note = [&](const std::string& name, double e) { worst[name] = std::max(worst[name], e); };
  const int shapes = 50;
  for (int s = 0; s < shapes; ++s) {
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(s);
    const Index c = pick(1, 5), out = pick(1, 5), b = pick(2, 6), len = pick(1, 6);
    {
      Linear<double> l(c * len, out, rng);
      note("linear", gradcheck::check_module(l, random_tensor(c * len, b, 1, seed)).worst());
    }
    {
      Conv1d<double> conv(c, out, pick(1, 5), rng);
      note("conv1d", gradcheck::check_module(conv, random_tensor(c, b, len, seed)).worst());
    }
    {
      BatchNorm<double> bn(c);
      note("batchnorm", gradcheck::check_module(bn, random_tensor(c, b, len, seed)).worst());
      Context ctx;
      bn.forward(random_tensor(c, b + 3, len, seed + 1), ctx);
      note("batchnorm_eval", gradcheck::check_module(bn, random_tensor(c, b, len, seed + 2), false).worst());
    }
    {
      LayerNorm<double> ln(c);
      note("layernorm", gradcheck::check_module(ln, random_tensor(c, b, len, seed)).worst());
    }
    for (auto kind : {ActivationKind::relu, ActivationKind::leaky_relu}) {
      Activation<double> a(kind);
      note(kind == ActivationKind::relu ? "relu" : "leaky_relu",
           gradcheck::check_module(a, random_tensor(c, b, len, seed)).worst());
    }
    {
      Dropout<double> d(0.1 + 0.8 * static_cast<double>(s) / shapes);
      note("dropout", gradcheck::check_module(d, random_tensor(c, b, len, seed)).worst());
    }
    for (auto kind : {PoolKind::max, PoolKind::avg}) {
      Pool1d<double> p(kind);
      note(kind == PoolKind::max ? "maxpool" : "avgpool",
           gradcheck::check_module(p, random_tensor(c, b, len + 1, seed)).worst());
    }
    {
      MeanOverLength<double> mean;
      note("mean_over_length", gradcheck::check_module(mean, random_tensor(c, b, len, seed)).worst());
    }
    for (auto v : {LffVariant::conv1x1, LffVariant::linear}) {
      LffLayer<double> l(init_lff<double>(v, len, pick(1, 6), 0.1 + 0.05 * s, seed, false));
      note(to_string(v), gradcheck::check_module(l, random_tensor(1, b, len, seed)).worst());
    }
    {
      const Tensor<double> p = random_tensor(1, b, 1, seed);
      Vector<double> labels(b), targets(b);
      for (Index i = 0; i < b; ++i) {
        labels(i) = static_cast<double>(rng() % 2);
        targets(i) = std::normal_distribution<double>()(rng);
      }
      Tensor<double> x = p;
      note("bce_with_logits", gradcheck::max_rel_error(x.data, bce_with_logits(p, labels).grad.data,
                                                       [&] { return bce_with_logits(x, labels).value; }));
      note("mse", gradcheck::max_rel_error(x.data, mse(p, targets).grad.data, [&] { return mse(x, targets).value; }));
    }
  }
  double overall = 0.0;
  std::string which;
  for (const auto& [name, e] : worst)
    if (e >= overall) overall = e, which = name;
  return {overall <= 1e-4, fmt("%zu layers x %d shapes, max rel error %.2e (%s)", worst.size(), shapes, overall,
                               which.c_str())};
}

// ---------------------------------------------------------------- 7 and 8

struct ArmGap {
  std::vector<double> gap;
  std::string detail;
};

double best_test(const std::vector<RunRecord>& rs, Task task) { return *rs[select_best(rs, task)].test_score; }

/// Best-of-20 comparison of an F|C arm against the plain MLP, both searches
/// drawing from the same per-trial seeds.
ArmGap compare_arms(const std::function<Dataset(std::uint64_t)>& make, ArmPolicy arm, const char* label) {
  ArmGap out;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset ds = split_dataset(make(seed), {0.6, 0.2, 0.2}, seed);
    const std::uint64_t search_seed = 100 + seed;
    const auto fc = run_search(ds, {.model = SearchModel::mlp_fc, .arm = arm}, 20, search_seed);
    const auto plain = run_search(ds, {.model = SearchModel::mlp}, 20, search_seed);
    const double a = best_test(fc, ds.task), b = best_test(plain, ds.task);
    out.gap.push_back(a - b);
    out.detail += fmt("%sseed %lu: %s %.4f vs MLP %.4f", seed ? "; " : "", static_cast<unsigned long>(seed), label, a, b);
    std::cerr << "  seed " << seed << " done in " << elapsed(t0) << " s\n";
  }
  return out;
}

Outcome arm_outcome(const ArmGap& g, double required) {
  double mean = 0.0, lo = INFINITY;
  for (double x : g.gap) mean += x / static_cast<double>(g.gap.size()), lo = std::min(lo, x);
  return {mean >= required, fmt("mean gap %.4f, min gap %.4f (need %.2f); %s", mean, lo, required, g.detail.c_str())};
}

Outcome cfd_benefit() {
  return arm_outcome(compare_arms([](std::uint64_t s) { return gen_planted_icf(4000, 20, 3, 0.1, s); },
                                  ArmPolicy::cfd, "MLP+C"),
                     0.10);
}

Outcome lff_benefit() {
  return arm_outcome(compare_arms([](std::uint64_t s) { return gen_nonsmooth_regression(4000, 20.0, 0.05, s); },
                                  ArmPolicy::lff, "MLP+F"),
                     0.15);
}

// ---------------------------------------------------------------- 9

Outcome protocol() {
  std::vector<std::string> bad;
  const nn::EarlyStopping es;
  if (es.patience != 40 || es.max_epochs != 400) bad.push_back("default patience/cap");

  // Plateau after a scripted best epoch, for both directions.
  for (int best : {1, 7, 123, 359}) {
    for (bool maximize : {true, false}) {
      const double sign = maximize ? 1.0 : -1.0;
      auto epoch = [&](int e) {
        return nn::EpochOutcome{1.0, sign * static_cast<double>(std::min(e, best))};
      };
      const auto st = nn::run_early_stopping(es, maximize, 0.0, epoch, [] {}, [] {});
      if (st.best_epoch != best || st.epochs_run != best + 40 || st.reason != nn::StopReason::patience)
        bad.push_back(fmt("plateau after %d stopped at %d", best, st.epochs_run));
    }
  }
  const auto capped = nn::run_early_stopping(
      es, true, 0.0, [](int e) { return nn::EpochOutcome{1.0, static_cast<double>(e)}; }, [] {}, [] {});
  if (capped.epochs_run != 400 || capped.reason != nn::StopReason::max_epochs) bad.push_back("cap not 400");

  // The real training loop: accuracy saturates, so every run ends at best + 40.
  const Dataset easy = split_dataset(gen_planted_icf(400, 4, 1, 0.0, 9), {0.6, 0.2, 0.2}, 9);
  int real_checked = 0;
  for (const auto& r : run_search(easy, {.model = SearchModel::mlp_fc, .arm = ArmPolicy::cfd}, 3, 9)) {
    if (r.status != RunStatus::completed) continue;
    ++real_checked;
    const bool ok = r.stop_reason == nn::StopReason::patience ? r.epochs_run == r.best_epoch + 40 : r.epochs_run == 400;
    if (!ok) bad.push_back(fmt("trial stopped at %d with best %d", r.epochs_run, r.best_epoch));
  }
  if (real_checked == 0) bad.push_back("no completed trial");

  // Arm counts of a fixed-seed 150-sample F|C search.
  int cfd = 0;
  for (std::uint64_t i = 0; i < 150; ++i) {
    std::mt19937_64 rng(splitmix64(0 + i));
    cfd += sample_hyperparams({.model = SearchModel::mlp_fc}, Task::classification, rng).preprocessing ==
           Preprocessing::cfd;
  }
  if (cfd < 60 || cfd > 90) bad.push_back(fmt("arm counts %d / %d", cfd, 150 - cfd));

  // Selection never reads test scores.
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mutations = 0;
  for (int t = 0; t < 200; ++t) {
    const Task task = t % 2 ? Task::classification : Task::regression;
    std::vector<RunRecord> rs(1 + rng() % 30);
    for (std::size_t i = 0; i < rs.size(); ++i) {
      rs[i].index = i;
      rs[i].task = task;
      rs[i].val_criterion = std::round(u(rng) * 20.0) / 20.0;
      rs[i].test_score = u(rng);
      rs[i].status = u(rng) < 0.15 ? RunStatus::failed : RunStatus::completed;
    }
    rs[0].status = RunStatus::completed;
    const std::size_t chosen = select_best(rs, task);
    for (int k = 0; k < 50; ++k) {
      for (auto& r : rs) {
        const double v = u(rng);
        if (v < 0.3) r.test_score.reset();
        else r.test_score = (v - 0.5) * 1e6;
      }
      ++mutations;
      if (select_best(rs, task) != chosen) {
        bad.push_back("selection changed under test-score mutation");
        break;
      }
    }
  }
  return {bad.empty(), bad.empty() ? fmt("plateau/cap exact, %d real trials stop at best+40, arms %d/%d, %d mutations",
                                         real_checked, cfd, 150 - cfd, mutations)
                                   : bad.front()};
}

// ---------------------------------------------------------------- 10

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome report_math() {
  using namespace icftab::report;
  std::vector<std::string> bad;
  if (std::abs(normalize(0.75, lower_bound(Task::classification), 1.0) - 0.5) > 1e-15) bad.push_back("normalize");
  if (lower_bound(Task::classification) != 0.5 || lower_bound(Task::regression) != 0.0) bad.push_back("lower bounds");
  const std::vector<double> val{0.6, 0.9, 0.7}, score{0.2, 0.9, 0.4};
  if (budget_trace(val, score, {2, 0, 1}, true) != std::vector<double>{0.4, 0.4, 0.9}) bad.push_back("budget trace");

  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.5, 1.0);
  std::vector<RunRecord> rs;
  for (int d = 0; d < 4; ++d)
    for (const char* model : {"mlp", "mlp-fc", "resnet"})
      for (int i = 0; i < 25; ++i) {
        RunRecord r;
        r.dataset = "ds" + std::to_string(d);
        r.model = model;
        r.index = static_cast<std::size_t>(i);
        r.val_criterion = u(rng);
        r.test_score = r.val_criterion + 0.05 * (u(rng) - 0.75);
        rs.push_back(r);
      }
  const auto norm = normalize_records(rs, Task::classification);
  for (const auto& p : performance_profile(rs, norm, Task::classification, 8))
    for (std::size_t i = 1; i < p.fraction.size(); ++i)
      if (p.tau[i] <= p.tau[i - 1] || p.fraction[i] > p.fraction[i - 1]) bad.push_back("profile not monotone in tau");

  const auto base = std::filesystem::temp_directory_path() / "icftab_acceptance_report";
  std::filesystem::remove_all(base);
  ReportOptions opt;
  opt.svg = true;
  opt.seed = 42;
  const auto s1 = write_report(rs, opt, base / "a");
  const auto s2 = write_report(rs, opt, base / "b");
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(base / "a")) {
    ++files;
    if (slurp(e.path()) != slurp(base / "b" / e.path().filename()))
      bad.push_back("output differs: " + e.path().filename().string());
  }
  if (s1 != s2) bad.push_back("summary differs");
  std::filesystem::remove_all(base);
  return {bad.empty(), bad.empty() ? fmt("normalization, budget [0.4, 0.4, 0.9], profile, %zu files identical", files)
                                   : bad.front()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "special functions vs oracles", 10, special_functions},
      {2, "statistical test oracles", 5, statistical_tests},
      {3, "chi2 ICF detection on planted data", 30, icf_classification},
      {4, "ANOVA and MI-ratio ICF detection", 60, icf_regression},
      {5, "encoding invariants", 10, encoding_properties},
      {6, "gradient checks", 120, gradients},
      {7, "CFD benefit end to end", 900, cfd_benefit},
      {8, "LFF benefit end to end", 900, lff_benefit},
      {9, "protocol fidelity", 60, protocol},
      {10, "report math", 10, report_math},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = elapsed(t0);
    const bool in_time = secs < c.time_limit;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << " (" << fmt("%.1f", secs) << " s, limit "
              << c.time_limit << " s" << (in_time ? "" : ", over time") << "): " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
