#include <doctest.h>

#include <random>

#include "icftab/errors.hpp"
#include "icftab/icf.hpp"
#include "icftab/stats.hpp"

using namespace icftab;

namespace {

Dataset with_column(Dataset ds, const Eigen::VectorXd& col, const std::string& name) {
  ds.X.conservativeResize(Eigen::NoChange, ds.X.cols() + 1);
  ds.X.col(ds.X.cols() - 1) = col;
  ds.columns.push_back({name, ColumnKind::numerical, 0, static_cast<std::size_t>(ds.X.cols() - 1)});
  refit_column_meta(ds);
  return ds;
}

IcfConfig cfg_of(IcfTest t) {
  IcfConfig c;
  c.test = t;
  return c;
}

}  // namespace

TEST_CASE("cardinality_gate") {
  IcfConfig c;
  c.max_cardinality = 5000;
  CHECK(cardinality_gate(6000, c) == Gate::skip);
  CHECK(cardinality_gate(5000, c) == Gate::test);
  c.min_cardinality = 10;
  c.auto_low_card = true;
  CHECK(cardinality_gate(8, c) == Gate::auto_cat);
  c.max_cardinality = 500;
  CHECK(cardinality_gate(200, c) == Gate::test);
  c.auto_low_card = false;
  CHECK(cardinality_gate(8, c) == Gate::test);
  // skip dominates auto_cat
  c.auto_low_card = true;
  c.min_cardinality = 100;
  c.max_cardinality = 50;
  CHECK(cardinality_gate(60, c) == Gate::skip);
}

TEST_CASE("IcfConfig validation and JSON") {
  IcfConfig c;
  c.chi_thresh = 1e-2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = IcfConfig{};
  c.mi_thresh = 2.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = IcfConfig{};
  c.max_cardinality = 700;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = IcfConfig{};
  c.min_cardinality = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = IcfConfig{};
  c.test = IcfTest::anova;
  c.anova_thresh = 1e-20;
  c.min_cardinality = 100;
  c.max_cardinality = 1500;
  c.auto_low_card = true;
  const auto back = IcfConfig::from_json(c.to_json());
  CHECK(back.test == IcfTest::anova);
  CHECK(back.anova_thresh == 1e-20);
  CHECK(back.min_cardinality == 100);
  CHECK(back.max_cardinality == 1500);
  CHECK(back.auto_low_card);
}

TEST_CASE("chi2 detection on planted data") {
  int false_positives = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset ds = gen_planted_icf(4000, 20, 3, 0.1, seed);
    const auto rep = run_icf(ds, cfg_of(IcfTest::chi2));
    CHECK(rep.columns[0].flagged);
    CHECK(rep.columns[0].p_value < 1e-10);
    for (std::size_t j = 1; j < rep.columns.size(); ++j) false_positives += rep.columns[j].flagged;
  }
  CHECK(false_positives <= 1);
}

TEST_CASE("column equal to the target is flagged at the strictest threshold") {
  Dataset ds = gen_planted_icf(500, 2, 1, 0.5, 3);
  ds = with_column(ds, ds.y, "copy");
  IcfConfig c = cfg_of(IcfTest::chi2);
  c.chi_thresh = 1e-50;
  const auto rep = run_icf(ds, c);
  CHECK(rep.columns[2].flagged);
}

TEST_CASE("high-cardinality predictive column is skipped") {
  Dataset ds = gen_planted_icf(6000, 2, 0, 0.0, 4);
  Eigen::VectorXd col(ds.n_rows());
  for (Eigen::Index i = 0; i < col.size(); ++i) col(i) = 2.0 * static_cast<double>(i) + ds.y(i);
  ds = with_column(ds, col, "unique");
  const auto rep = run_icf(ds, cfg_of(IcfTest::chi2));
  CHECK(rep.columns[1].gate == Gate::skip);
  CHECK_FALSE(rep.columns[1].flagged);
}

TEST_CASE("auto low-cardinality flagging") {
  const Dataset ds = gen_planted_regression(1000, 8, 0, 0.0001, PlantedMode::linear, 5);
  IcfConfig c = cfg_of(IcfTest::anova);
  c.anova_thresh = 1e-30;
  c.min_cardinality = 10;
  CHECK_FALSE(run_icf(ds, c).columns[0].flagged);
  c.auto_low_card = true;
  const auto rep = run_icf(ds, c);
  CHECK(rep.columns[0].gate == Gate::auto_cat);
  CHECK(rep.columns[0].flagged);
}

TEST_CASE("ANOVA detection") {
  const Dataset ds = gen_planted_regression(1000, 10, 2, 3.0, PlantedMode::permuted, 6);
  const auto rep = run_icf(ds, cfg_of(IcfTest::anova));
  CHECK(rep.columns[0].flagged);
  CHECK(rep.categorical_set == std::vector<std::size_t>{0});

  Dataset flat = ds;
  flat.X.col(0).setConstant(3.0);
  refit_column_meta(flat);
  CHECK_FALSE(run_icf(flat, cfg_of(IcfTest::anova)).columns[0].flagged);
}

TEST_CASE("ANOVA calibration on independent codes") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> code(0, 9);
  IcfConfig c = cfg_of(IcfTest::anova);
  c.anova_thresh = 1e-3;
  int tested = 0, flagged = 0, flagged_loose = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Dataset ds = gen_nonsmooth_regression(500, 1.0, 1.0, seed);
    ds.y = ds.y - (2.0 * M_PI * ds.X.col(0).array()).sin().matrix();  // pure N(0, 1)
    ds.X.resize(500, 20);
    ds.columns.clear();
    for (int j = 0; j < 20; ++j) {
      for (Eigen::Index i = 0; i < 500; ++i) ds.X(i, j) = code(rng);
      ds.columns.push_back({"c" + std::to_string(j), ColumnKind::numerical, 0, static_cast<std::size_t>(j)});
    }
    refit_column_meta(ds);
    const auto rep = run_icf(ds, c);
    for (const auto& col : rep.columns) {
      ++tested;
      flagged += col.flagged;
      flagged_loose += col.p_value < 0.05;
    }
  }
  CHECK(tested == 1000);
  CHECK(static_cast<double>(flagged) / tested <= 2e-3);
  CHECK(static_cast<double>(flagged_loose) / tested <= 0.1);
}

TEST_CASE("MI detection") {
  double lo = 1e9, hi = 0.0;
  int permuted_flagged = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto perm = run_icf(gen_planted_regression(4000, 50, 1, 3.0, PlantedMode::permuted, seed),
                              cfg_of(IcfTest::mutual_info));
    CHECK(perm.columns[0].mi_ratio > 1.25);
    permuted_flagged += perm.columns[0].flagged;
    const auto lin = run_icf(gen_planted_regression(4000, 50, 1, 3.0, PlantedMode::linear, seed),
                             cfg_of(IcfTest::mutual_info));
    lo = std::min(lo, lin.columns[0].mi_ratio);
    hi = std::max(hi, lin.columns[0].mi_ratio);
    CHECK_FALSE(lin.columns[0].flagged);
  }
  CHECK(permuted_flagged == 20);
  CHECK(lo >= 0.8);
  CHECK(hi <= 1.2);
}

TEST_CASE("MI zero over zero is not flagged") {
  Dataset ds = gen_planted_regression(200, 2, 0, 1.0, PlantedMode::linear, 1);
  ds.X.col(0).setConstant(1.0);
  ds.y.setConstant(2.0);
  refit_column_meta(ds);
  const auto rep = run_icf(ds, cfg_of(IcfTest::mutual_info));
  CHECK_FALSE(rep.columns[0].flagged);
}

TEST_CASE("run_icf dispatch, merge and train-only dependence") {
  const Dataset cls = gen_planted_icf(400, 4, 1, 0.0, 2);
  CHECK_THROWS_AS(run_icf(cls, cfg_of(IcfTest::anova)), ConfigError);
  const Dataset reg = gen_planted_regression(400, 4, 1, 1.0, PlantedMode::linear, 2);
  CHECK_THROWS_AS(run_icf(reg, cfg_of(IcfTest::chi2)), ConfigError);

  Dataset declared = gen_planted_icf(400, 4, 2, 0.5, 3);
  declared.X.col(0).setRandom();
  declared.columns[2].declared_kind = ColumnKind::categorical;
  refit_column_meta(declared);
  CHECK(run_icf(declared, cfg_of(IcfTest::chi2)).categorical_set == std::vector<std::size_t>{2});

  Dataset split = split_dataset(gen_planted_icf(2000, 10, 2, 0.1, 4), {0.6, 0.2, 0.2}, 1);
  const auto a = run_icf(split, cfg_of(IcfTest::chi2));
  for (auto r : split.rows(Split::test)) split.X(r, 1) = 1e6, split.y(r) = 0;
  const auto b = run_icf(split, cfg_of(IcfTest::chi2));
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("threshold monotonicity") {
  const Dataset ds = gen_planted_icf(1000, 10, 5, 0.3, 8);
  IcfConfig c = cfg_of(IcfTest::chi2);
  std::size_t prev = 0;
  for (double t : {1e-50, 1e-20, 1e-8, 1e-3}) {
    c.chi_thresh = t;
    const auto n = run_icf(ds, c).categorical_set.size();
    CHECK(n >= prev);
    prev = n;
  }
}

TEST_CASE("IcfReport JSON round trip") {
  const auto rep = run_icf(gen_planted_regression(1000, 30, 2, 3.0, PlantedMode::permuted, 3),
                           cfg_of(IcfTest::mutual_info));
  const auto back = IcfReport::from_json(rep.to_json());
  CHECK(back.to_json() == rep.to_json());
  CHECK(back.categorical_set == rep.categorical_set);
}
