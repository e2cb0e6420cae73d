// icf-tab: command-line front end for detection, encoding, training, search
// and reporting.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "icftab/cfd.hpp"
#include "icftab/errors.hpp"
#include "icftab/icf.hpp"
#include "icftab/nn/snapshot.hpp"
#include "icftab/report.hpp"
#include "icftab/search.hpp"
#include "icftab/tabular.hpp"

namespace {

using namespace icftab;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Global {
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string log_level = "info";
};

std::array<double, 3> parse_fractions(const std::string& s) {
  std::array<double, 3> f{};
  std::stringstream ss(s);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) throw ConfigError("--split takes three comma-separated fractions");
    try {
      f[i++] = std::stod(part);
    } catch (const std::exception&) {
      throw ConfigError("--split: '" + part + "' is not a number");
    }
  }
  if (i != 3) throw ConfigError("--split takes three comma-separated fractions");
  return f;
}

Dataset load_split(const std::string& csv, const std::string& schema_path, const std::string& split,
                   std::uint64_t seed) {
  const Schema schema = Schema::load(schema_path);
  return split_dataset(load_csv(csv, schema), parse_fractions(split), seed);
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicitly categorical feature detection, encoding and tabular network search"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--seed", g.seed, "Base random seed")->capture_default_str();
  app.add_option("--workers", g.workers, "Parallel trials")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  // gen
  auto* gen = app.add_subcommand("gen", "Write a synthetic dataset and its schema");
  std::string gen_kind = "planted-icf", gen_out, gen_schema, gen_mode = "permuted";
  long gen_n = 4000;
  int gen_k = 20, gen_noise_cols = 3;
  double gen_flip = 0.1, gen_freq = 20.0, gen_noise_std = 0.05, gen_spacing = 3.0;
  gen->add_option("--kind", gen_kind, "planted-icf, planted-regression or nonsmooth")->capture_default_str();
  gen->add_option("--n", gen_n, "Rows")->capture_default_str();
  gen->add_option("--k", gen_k, "Number of codes")->capture_default_str();
  gen->add_option("--noise-cols", gen_noise_cols, "Extra noise columns")->capture_default_str();
  gen->add_option("--flip", gen_flip, "Label flip probability")->capture_default_str();
  gen->add_option("--frequency", gen_freq, "Sine frequency")->capture_default_str();
  gen->add_option("--noise-std", gen_noise_std, "Target noise")->capture_default_str();
  gen->add_option("--spacing", gen_spacing, "Level spacing in noise units")->capture_default_str();
  gen->add_option("--mode", gen_mode, "permuted or linear")->capture_default_str();
  gen->add_option("--out", gen_out, "CSV output")->required();
  gen->add_option("--schema-out", gen_schema, "Schema output (default: <out>.schema.json)");

  // detect
  auto* detect = app.add_subcommand("detect", "Run the ICF detector on the training split");
  std::string det_data, det_schema, det_split = "0.6,0.2,0.2", det_out = "-", det_config, det_test;
  IcfConfig det_cfg;
  detect->add_option("--data", det_data, "CSV file")->required();
  detect->add_option("--schema", det_schema, "Schema JSON")->required();
  detect->add_option("--split", det_split, "train,valid,test fractions")->capture_default_str();
  detect->add_option("--config", det_config, "ICF configuration JSON");
  detect->add_option("--test", det_test, "chi2, anova or mi (default by task)");
  detect->add_option("--chi-thresh", det_cfg.chi_thresh)->capture_default_str();
  detect->add_option("--anova-thresh", det_cfg.anova_thresh)->capture_default_str();
  detect->add_option("--mi-thresh", det_cfg.mi_thresh)->capture_default_str();
  detect->add_option("--min-card", det_cfg.min_cardinality)->capture_default_str();
  detect->add_option("--max-card", det_cfg.max_cardinality)->capture_default_str();
  detect->add_flag("--auto-low-card", det_cfg.auto_low_card);
  detect->add_option("--out", det_out, "Report JSON ('-' for stdout)")->capture_default_str();

  // encode
  auto* enc = app.add_subcommand("encode", "Encode a dataset as a padded one-hot channel tensor");
  std::string enc_data, enc_schema, enc_split = "0.6,0.2,0.2", enc_report, enc_out;
  bool enc_append_raw = false;
  enc->add_option("--data", enc_data, "CSV file")->required();
  enc->add_option("--schema", enc_schema, "Schema JSON")->required();
  enc->add_option("--split", enc_split, "train,valid,test fractions")->capture_default_str();
  enc->add_option("--report", enc_report, "ICF report from 'detect' (default: declared columns only)");
  enc->add_flag("--append-raw", enc_append_raw, "Keep the standardized value in channel 0 of categorical columns");
  enc->add_option("--out", enc_out, "Tensor file")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train one configuration and report its metrics");
  std::string tr_data, tr_schema, tr_split = "0.6,0.2,0.2", tr_sample, tr_out = "-", tr_snapshot;
  std::string tr_model = "mlp", tr_arm = "coin";
  int tr_max_epochs = 400, tr_patience = 40;
  tr->add_option("--data", tr_data, "CSV file")->required();
  tr->add_option("--schema", tr_schema, "Schema JSON")->required();
  tr->add_option("--split", tr_split, "train,valid,test fractions")->capture_default_str();
  tr->add_option("--sample", tr_sample, "Hyperparameter sample JSON (default: draw one with --seed)");
  tr->add_option("--model", tr_model, "mlp, resnet, mlp-fc or resnet-fc when drawing")->capture_default_str();
  tr->add_option("--arm", tr_arm, "coin, cfd or lff when drawing")->capture_default_str();
  tr->add_option("--out", tr_out, "Run record JSON ('-' for stdout)")->capture_default_str();
  tr->add_option("--snapshot", tr_snapshot, "Write the best-epoch model snapshot here");
  tr->add_option("--max-epochs", tr_max_epochs)->capture_default_str();
  tr->add_option("--patience", tr_patience)->capture_default_str();

  // search
  auto* se = app.add_subcommand("search", "Random hyperparameter search");
  std::string se_data, se_schema, se_split = "0.6,0.2,0.2", se_model = "mlp", se_out, se_arm = "coin";
  std::size_t se_runs = 150;
  bool se_combined = false;
  double se_sigma = 1.0;
  int se_max_epochs = 400, se_patience = 40;
  se->add_option("--data", se_data, "CSV file")->required();
  se->add_option("--schema", se_schema, "Schema JSON")->required();
  se->add_option("--split", se_split, "train,valid,test fractions")->capture_default_str();
  se->add_option("--model", se_model, "mlp, resnet, mlp-fc or resnet-fc")->capture_default_str();
  se->add_option("--runs", se_runs, "Number of trials")->capture_default_str();
  se->add_option("--out", se_out, "records.jsonl (appended)")->required();
  se->add_flag("--combined-mode", se_combined, "F|C samples use combined categorical + LFF preprocessing");
  se->add_option("--arm", se_arm, "coin, cfd or lff for F|C models")->capture_default_str();
  se->add_option("--lff-sigma", se_sigma, "LFF weight init standard deviation")->capture_default_str();
  se->add_option("--max-epochs", se_max_epochs)->capture_default_str();
  se->add_option("--patience", se_patience)->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "Aggregate run records into report tables");
  std::vector<std::string> rep_records;
  std::string rep_task, rep_out;
  report::ReportOptions rep_opt;
  rep->add_option("--records", rep_records, "One or more records.jsonl files")->required();
  rep->add_option("--task", rep_task, "classification or regression")->required();
  rep->add_option("--out-dir", rep_out, "Output directory")->required();
  rep->add_option("--sims", rep_opt.sims, "Search simulations")->capture_default_str();
  rep->add_option("--top-k", rep_opt.top_k, "Top runs per model and dataset")->capture_default_str();
  rep->add_flag("--svg", rep_opt.svg, "Also render heatmap.svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    auto logger = spdlog::stderr_color_mt("icf-tab");
    spdlog::set_default_logger(logger);
    const auto level = spdlog::level::from_str(g.log_level);
    if (level == spdlog::level::off && g.log_level != "off") throw ConfigError("unknown log level '" + g.log_level + "'");
    spdlog::set_level(level);

    if (*gen) {
      Dataset ds;
      if (gen_kind == "planted-icf") {
        ds = gen_planted_icf(gen_n, gen_k, gen_noise_cols, gen_flip, g.seed);
      } else if (gen_kind == "planted-regression") {
        if (gen_mode != "permuted" && gen_mode != "linear") throw ConfigError("--mode must be permuted or linear");
        ds = gen_planted_regression(gen_n, gen_k, gen_noise_cols, gen_spacing,
                                    gen_mode == "permuted" ? PlantedMode::permuted : PlantedMode::linear, g.seed);
      } else if (gen_kind == "nonsmooth") {
        ds = gen_nonsmooth_regression(gen_n, gen_freq, gen_noise_std, g.seed);
      } else {
        throw ConfigError("unknown dataset kind '" + gen_kind + "'");
      }
      if (gen_schema.empty()) gen_schema = gen_out + ".schema.json";
      save_csv_with_schema(ds, gen_out, gen_schema);
      spdlog::info("wrote {} rows to {} and schema to {}", ds.n_rows(), gen_out, gen_schema);
    } else if (*detect) {
      const Dataset ds = load_split(det_data, det_schema, det_split, g.seed);
      IcfConfig cfg = det_cfg;
      if (!det_config.empty()) cfg = IcfConfig::from_json(read_json(det_config));
      if (!det_test.empty())
        cfg.test = icf_test_from_string(det_test);
      else if (det_config.empty())
        cfg.test = ds.task == Task::classification ? IcfTest::chi2 : IcfTest::anova;
      const IcfReport r = run_icf(ds, cfg);
      write_json(det_out, r.to_json());
    } else if (*enc) {
      const Dataset ds = load_split(enc_data, enc_schema, enc_split, g.seed);
      std::vector<std::size_t> cat = ds.declared_categorical();
      if (!enc_report.empty()) cat = IcfReport::from_json(read_json(enc_report)).categorical_set;
      const auto maps = fit_binmaps(ds, cat);
      CfdOptions opt;
      opt.append_raw = enc_append_raw;
      const Standardizer st = Standardizer::fit(gather_rows(ds.X, ds.rows(Split::train)));
      const EncodedTensor t = encode(ds.X, st.transform(ds.X), maps, channel_depth(maps, opt), opt);
      save_tensor(enc_out, t);
      spdlog::info("encoded {} x {} x {} tensor to {}", t.n, t.d, t.m, enc_out);
    } else if (*tr) {
      const Dataset ds = load_split(tr_data, tr_schema, tr_split, g.seed);
      HyperSample s;
      if (!tr_sample.empty()) {
        s = HyperSample::from_json(read_json(tr_sample));
      } else {
        SearchSpace space;
        space.model = search_model_from_string(tr_model);
        space.arm = arm_policy_from_string(tr_arm);
        std::mt19937_64 rng(splitmix64(g.seed));
        s = sample_hyperparams(space, ds.task, rng);
      }
      std::unique_ptr<nn::Sequential<float>> net;
      if (tr_max_epochs < 1 || tr_patience < 1) throw ConfigError("--max-epochs and --patience must be >= 1");
      TrialOptions opt;
      opt.early_stopping.max_epochs = tr_max_epochs;
      opt.early_stopping.patience = tr_patience;
      RunRecord r = run_trial(ds, s, opt, tr_snapshot.empty() ? nullptr : &net);
      r.model = tr_sample.empty() ? tr_model : "custom";
      if (!tr_snapshot.empty() && net) nn::save_snapshot(tr_snapshot, nn::capture(*net));
      write_json(tr_out, r.to_json());
      if (r.status == RunStatus::failed) throw DataError("trial failed: " + r.error);
    } else if (*se) {
      const Dataset ds = load_split(se_data, se_schema, se_split, g.seed);
      SearchSpace space;
      space.model = search_model_from_string(se_model);
      space.arm = arm_policy_from_string(se_arm);
      space.combined_mode = se_combined;
      space.lff_sigma = se_sigma;
      if (!(se_sigma >= 0.0)) throw ConfigError("--lff-sigma must be >= 0");
      if (se_max_epochs < 1 || se_patience < 1) throw ConfigError("--max-epochs and --patience must be >= 1");
      TrialOptions opt;
      opt.early_stopping.max_epochs = se_max_epochs;
      opt.early_stopping.patience = se_patience;
      std::ofstream out(se_out, std::ios::app);
      if (!out) throw DataError("cannot write " + se_out);
      const auto records =
          run_search(ds, space, se_runs, g.seed, opt, g.workers, [&](const RunRecord& r) { append_record(out, r); });
      try {
        const auto& best = records[select_best(records, ds.task)];
        spdlog::info("best run {}: val={:.4f} test={:.4f}", best.index, best.val_criterion, best.test_score.value_or(0.0));
      } catch (const DataError& e) {
        spdlog::warn("{}", e.what());
      }
    } else if (*rep) {
      rep_opt.task = task_from_string(rep_task);
      rep_opt.seed = g.seed;
      std::vector<RunRecord> all;
      for (const auto& f : rep_records) {
        auto r = load_records(f);
        all.insert(all.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
      }
      const json summary = report::write_report(all, rep_opt, rep_out);
      spdlog::info("report written to {} ({} excluded datasets)", rep_out, summary["excluded_datasets"].size());
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
