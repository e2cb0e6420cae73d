#include "icftab/search.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "icftab/errors.hpp"

namespace icftab {

using Eigen::Index;
using nlohmann::json;

namespace {

template <typename E>
struct Names {
  E value;
  const char* name;
};

constexpr Names<ModelFamily> kFamilies[] = {{ModelFamily::mlp, "MLP"}, {ModelFamily::resnet, "ResNet"}};
constexpr Names<Preprocessing> kPreprocessing[] = {{Preprocessing::none, "none"},
                                                   {Preprocessing::cfd, "CFD"},
                                                   {Preprocessing::lff, "LFF"},
                                                   {Preprocessing::combined, "combined"}};
constexpr Names<SearchModel> kModels[] = {{SearchModel::mlp, "mlp"},
                                          {SearchModel::resnet, "resnet"},
                                          {SearchModel::mlp_fc, "mlp-fc"},
                                          {SearchModel::resnet_fc, "resnet-fc"}};
constexpr Names<ArmPolicy> kArms[] = {{ArmPolicy::coin, "coin"}, {ArmPolicy::cfd, "cfd"}, {ArmPolicy::lff, "lff"}};
constexpr Names<RunStatus> kStatus[] = {
    {RunStatus::completed, "completed"}, {RunStatus::diverged, "diverged"}, {RunStatus::failed, "failed"}};

template <typename E, std::size_t N>
std::string name_of(const Names<E> (&table)[N], E v) {
  for (const auto& t : table)
    if (t.value == v) return t.name;
  return "unknown";
}

template <typename Err, typename E, std::size_t N>
E value_of(const Names<E> (&table)[N], const std::string& s, const char* what) {
  for (const auto& t : table)
    if (s == t.name) return t.value;
  throw Err(std::string("unknown ") + what + " '" + s + "'");
}

template <typename T, std::size_t N>
T pick(const T (&choices)[N], std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, N - 1);
  return choices[d(rng)];
}

double uniform(double lo, double hi, std::mt19937_64& rng) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(int lo, int hi, std::mt19937_64& rng) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool coin(std::mt19937_64& rng) { return std::bernoulli_distribution(0.5)(rng); }

nn::Tensor<float> to_tensor(const EncodedTensor& t) {
  nn::Tensor<float> x;
  x.length = t.d;
  x.data = Eigen::Map<const Eigen::MatrixXd>(t.data.data(), t.m, t.n * t.d).cast<float>();
  return x;
}

nn::Tensor<float> to_tensor(const Eigen::MatrixXd& standardized) {
  const RowMatrixXd r = standardized;
  nn::Tensor<float> x;
  x.length = r.cols();
  x.data = Eigen::Map<const Eigen::MatrixXd>(r.data(), 1, r.rows() * r.cols()).cast<float>();
  return x;
}

double lower_bound_score(Task task) { return task == Task::classification ? 0.5 : 0.0; }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string to_string(ModelFamily f) { return name_of(kFamilies, f); }
std::string to_string(Preprocessing p) { return name_of(kPreprocessing, p); }
std::string to_string(SearchModel m) { return name_of(kModels, m); }
std::string to_string(ArmPolicy a) { return name_of(kArms, a); }
std::string to_string(RunStatus s) { return name_of(kStatus, s); }
ModelFamily model_family_from_string(const std::string& s) { return value_of<DataError>(kFamilies, s, "model family"); }
Preprocessing preprocessing_from_string(const std::string& s) {
  return value_of<DataError>(kPreprocessing, s, "preprocessing");
}
SearchModel search_model_from_string(const std::string& s) { return value_of<ConfigError>(kModels, s, "model"); }
ArmPolicy arm_policy_from_string(const std::string& s) { return value_of<ConfigError>(kArms, s, "arm policy"); }
RunStatus run_status_from_string(const std::string& s) { return value_of<DataError>(kStatus, s, "run status"); }

json HyperSample::to_json() const {
  json j;
  j["family"] = to_string(family);
  j["preprocessing"] = to_string(preprocessing);
  j["mlp"] = mlp.to_json();
  j["resnet"] = resnet.to_json();
  j["optimizer"] = optimizer.to_json();
  j["icf"] = icf ? icf->to_json() : json(nullptr);
  j["lff"] = {{"variant", icftab::to_string(lff_variant)}, {"dim", lff_dim}, {"sigma", lff_sigma}};
  j["gaussian_target"] = gaussian_target;
  j["seed"] = seed;
  return j;
}

HyperSample HyperSample::from_json(const json& j) {
  try {
    HyperSample s;
    s.family = model_family_from_string(j.at("family").get<std::string>());
    s.preprocessing = preprocessing_from_string(j.at("preprocessing").get<std::string>());
    s.mlp = nn::MlpConfig::from_json(j.at("mlp"));
    s.resnet = nn::ResNetConfig::from_json(j.at("resnet"));
    s.optimizer = nn::OptimizerConfig::from_json(j.at("optimizer"));
    if (j.contains("icf") && !j.at("icf").is_null()) s.icf = IcfConfig::from_json(j.at("icf"));
    const auto& l = j.at("lff");
    s.lff_variant = lff_variant_from_string(l.at("variant").get<std::string>());
    s.lff_dim = l.at("dim").get<int>();
    s.lff_sigma = l.at("sigma").get<double>();
    s.gaussian_target = j.at("gaussian_target").get<bool>();
    s.seed = j.at("seed").get<std::uint64_t>();
    if ((s.preprocessing == Preprocessing::cfd || s.preprocessing == Preprocessing::combined) && !s.icf)
      throw ConfigError("CFD sample without an ICF configuration");
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed hyperparameter sample: ") + e.what());
  }
}

long log_uniform_int(long lo, long hi, std::mt19937_64& rng) {
  if (lo < 1 || hi < lo) throw ConfigError("log_uniform_int: need 1 <= lo <= hi");
  const double u = uniform(std::log(static_cast<double>(lo)), std::log(static_cast<double>(hi)), rng);
  return std::clamp(std::lround(std::exp(u)), lo, hi);
}

HyperSample sample_hyperparams(const SearchSpace& space, Task task, std::mt19937_64& rng) {
  static constexpr int kT0[] = {10, 20, 30, 50, 75, 100};
  static constexpr int kTMult[] = {1, 2};
  static constexpr int kWidth[] = {128, 256, 512, 1024};
  static constexpr double kMlpDropout[] = {0.0, 0.5, 0.6, 0.7, 0.8, 0.9};
  static constexpr nn::ActivationKind kAct[] = {nn::ActivationKind::relu, nn::ActivationKind::leaky_relu};
  static constexpr double kDoProb[] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  static constexpr int kGap[] = {0, 1, 2};
  static constexpr nn::PoolKind kPool[] = {nn::PoolKind::max, nn::PoolKind::avg};
  static constexpr int kLffDim[] = {32, 64, 128, 256};
  static constexpr LffVariant kEmb[] = {LffVariant::conv1x1, LffVariant::linear};
  static constexpr std::size_t kMinCard[] = {0, 10, 100};
  static constexpr std::size_t kMaxCard[] = {300, 500, 1000, 1500, 5000};

  HyperSample s;
  const bool fc = space.model == SearchModel::mlp_fc || space.model == SearchModel::resnet_fc;
  s.family = space.model == SearchModel::mlp || space.model == SearchModel::mlp_fc ? ModelFamily::mlp
                                                                                   : ModelFamily::resnet;

  s.optimizer.learning_rate = uniform(0.001, 0.1, rng);
  s.optimizer.eps = uniform(1e-8, 1e-4, rng);
  s.optimizer.weight_decay = uniform(0.0001, 0.6, rng);
  s.optimizer.t0 = pick(kT0, rng);
  s.optimizer.t_mult = pick(kTMult, rng);

  s.mlp.depth = uniform_int(2, 8, rng);
  s.mlp.width = pick(kWidth, rng);
  s.mlp.activation = pick(kAct, rng);
  s.mlp.batch_norm = coin(rng);
  s.mlp.dropout = pick(kMlpDropout, rng);

  s.resnet.num_block = uniform_int(1, 3, rng);
  s.resnet.num_linear = uniform_int(1, 3, rng);
  s.resnet.use_norm = coin(rng);
  s.resnet.norm_type = coin(rng) ? nn::ResNetConfig::NormType::batch : nn::ResNetConfig::NormType::layer;
  s.resnet.use_dropout = coin(rng);
  s.resnet.dropout_prob = pick(kDoProb, rng);
  s.resnet.downsample_gap = pick(kGap, rng);
  s.resnet.increasefilter_gap = pick(kGap, rng);
  s.resnet.pooling = pick(kPool, rng);
  s.resnet.kernel_fraction = uniform(0.0, 1.0, rng);
  s.resnet.activation = pick(kAct, rng);

  s.lff_dim = pick(kLffDim, rng);
  s.lff_variant = pick(kEmb, rng);
  s.lff_sigma = space.lff_sigma;

  IcfConfig icf;
  const bool regression_mi = coin(rng);
  icf.test = task == Task::classification ? IcfTest::chi2 : regression_mi ? IcfTest::mutual_info : IcfTest::anova;
  icf.chi_thresh = uniform(1e-50, 1e-3, rng);
  icf.anova_thresh = uniform(1e-30, 1e-3, rng);
  icf.mi_thresh = uniform(0.75, 1.5, rng);
  icf.min_cardinality = pick(kMinCard, rng);
  icf.max_cardinality = pick(kMaxCard, rng);
  icf.auto_low_card = coin(rng);

  const bool gaussian = coin(rng);
  s.gaussian_target = task == Task::regression && gaussian;

  const bool arm_cfd = coin(rng);
  s.seed = rng();

  if (!fc) {
    s.preprocessing = Preprocessing::none;
  } else if (space.combined_mode) {
    s.preprocessing = Preprocessing::combined;
  } else {
    switch (space.arm) {
      case ArmPolicy::coin: s.preprocessing = arm_cfd ? Preprocessing::cfd : Preprocessing::lff; break;
      case ArmPolicy::cfd: s.preprocessing = Preprocessing::cfd; break;
      case ArmPolicy::lff: s.preprocessing = Preprocessing::lff; break;
    }
  }
  if (s.preprocessing == Preprocessing::cfd || s.preprocessing == Preprocessing::combined) s.icf = icf;
  return s;
}

json RunRecord::to_json() const {
  json j;
  j["schema"] = kSchemaVersion;
  j["index"] = index;
  j["dataset"] = dataset;
  j["model"] = model;
  j["task"] = to_string(task);
  j["sample"] = sample ? sample->to_json() : json(nullptr);
  j["status"] = to_string(status);
  j["val_criterion"] = finite_or_null(val_criterion);
  j["stop_criterion"] = finite_or_null(stop_criterion);
  j["test_score"] = test_score ? json(*test_score) : json(nullptr);
  j["test_metric"] = task == Task::classification ? "accuracy" : "r2";
  j["wall_time"] = wall_time;
  j["epochs_run"] = epochs_run;
  j["best_epoch"] = best_epoch;
  j["stop_reason"] = nn::to_string(stop_reason);
  j["arm"] = to_string(arm);
  j["categorical_set"] = categorical_set;
  if (!error.empty()) j["error"] = error;
  return j;
}

RunRecord RunRecord::from_json(const json& j) {
  try {
    RunRecord r;
    const int version = j.at("schema").get<int>();
    if (version != kSchemaVersion) throw DataError("unsupported record schema " + std::to_string(version));
    r.index = j.at("index").get<std::size_t>();
    r.dataset = j.at("dataset").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.task = task_from_string(j.at("task").get<std::string>());
    if (j.contains("sample") && !j.at("sample").is_null()) r.sample = HyperSample::from_json(j.at("sample"));
    r.status = run_status_from_string(j.at("status").get<std::string>());
    const double worst = nn::criterion_worst(r.task);
    r.val_criterion = j.at("val_criterion").is_null() ? worst : j.at("val_criterion").get<double>();
    r.stop_criterion =
        !j.contains("stop_criterion") || j.at("stop_criterion").is_null() ? worst : j.at("stop_criterion").get<double>();
    if (!j.at("test_score").is_null()) r.test_score = j.at("test_score").get<double>();
    r.wall_time = j.value("wall_time", 0.0);
    r.epochs_run = j.value("epochs_run", 0);
    r.best_epoch = j.value("best_epoch", 0);
    r.stop_reason = nn::stop_reason_from_string(j.value("stop_reason", std::string("max_epochs")));
    r.arm = preprocessing_from_string(j.value("arm", std::string("none")));
    r.categorical_set = j.value("categorical_set", std::vector<std::size_t>{});
    r.error = j.value("error", std::string());
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed run record: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed run record: ") + e.what());
  }
}

std::pair<std::vector<Index>, std::vector<Index>> split_validation(const Dataset& ds) {
  const auto valid = ds.rows(Split::valid);
  const std::size_t half = (valid.size() + 1) / 2;
  return {std::vector<Index>(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(half)),
          std::vector<Index>(valid.begin() + static_cast<std::ptrdiff_t>(half), valid.end())};
}

PreparedInputs prepare_inputs(const Dataset& ds, const HyperSample& sample) {
  const auto train_rows = ds.rows(Split::train);
  const auto [stop_rows, select_rows] = split_validation(ds);
  const auto test_rows = ds.rows(Split::test);
  if (train_rows.empty()) throw DataError("dataset has no training rows");

  const Eigen::MatrixXd x_train = gather_rows(ds.X, train_rows);
  const Standardizer st = Standardizer::fit(x_train);
  const std::vector<Index>* rows[4] = {&train_rows, &stop_rows, &select_rows, &test_rows};
  nn::Tensor<float>* outs[4];
  PreparedInputs in;
  outs[0] = &in.train;
  outs[1] = &in.stop;
  outs[2] = &in.select;
  outs[3] = &in.test;

  if (sample.preprocessing == Preprocessing::lff) {
    for (int s = 0; s < 4; ++s) *outs[s] = to_tensor(st.transform(gather_rows(ds.X, *rows[s])));
    in.channels = 1;
    in.length = ds.n_cols();
    return in;
  }

  if (sample.preprocessing == Preprocessing::none) {
    in.categorical_set = ds.declared_categorical();
  } else {
    if (!sample.icf) throw ConfigError("CFD preprocessing requires an ICF configuration");
    in.icf_report = run_icf(ds, *sample.icf);
    in.categorical_set = in.icf_report->categorical_set;
  }
  in.maps = fit_binmaps(ds, in.categorical_set);
  const Index depth = channel_depth(in.maps);
  for (int s = 0; s < 4; ++s) {
    const Eigen::MatrixXd raw = gather_rows(ds.X, *rows[s]);
    *outs[s] = to_tensor(encode(raw, st.transform(raw), in.maps, depth));
  }
  in.channels = depth;
  in.length = ds.n_cols();
  return in;
}

std::unique_ptr<nn::Sequential<float>> build_network(const HyperSample& sample, const PreparedInputs& in) {
  std::mt19937_64 rng(sample.seed);
  const std::uint64_t lff_seed = splitmix64(sample.seed ^ 0x4c4646ULL);
  auto net = std::make_unique<nn::Sequential<float>>();
  Index channels = in.channels;
  const Index length = in.length;

  if (sample.preprocessing == Preprocessing::lff) {
    auto p = init_lff<float>(sample.lff_variant, length, sample.lff_dim, sample.lff_sigma, lff_seed);
    net->emplace<nn::LffLayer<float>>(std::move(p));
    channels = 2 * sample.lff_dim;
  } else if (sample.preprocessing == Preprocessing::combined) {
    std::vector<Index> cat, num;
    std::vector<bool> is_cat(static_cast<std::size_t>(length), false);
    for (auto c : in.categorical_set) is_cat.at(c) = true;
    for (Index j = 0; j < length; ++j) (is_cat[static_cast<std::size_t>(j)] ? cat : num).push_back(j);
    std::optional<LffParams<float>> p;
    if (!num.empty())
      p = init_lff<float>(sample.lff_variant, static_cast<Index>(num.size()), sample.lff_dim, sample.lff_sigma, lff_seed);
    auto& emb = net->emplace<nn::CombinedEmbedding<float>>(in.channels, cat, num, std::move(p));
    channels = emb.out_channels();
  }

  if (sample.family == ModelFamily::mlp)
    nn::append_mlp(*net, sample.mlp, channels, length, rng);
  else
    nn::append_resnet(*net, sample.resnet, channels, length, rng);
  return net;
}

RunRecord run_trial(const Dataset& ds, const HyperSample& sample, const TrialOptions& opt,
                    std::unique_ptr<nn::Sequential<float>>* model) {
  RunRecord r;
  r.dataset = ds.id;
  r.task = ds.task;
  r.sample = sample;
  r.arm = sample.preprocessing;
  const double worst = nn::criterion_worst(ds.task);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    PreparedInputs in = prepare_inputs(ds, sample);
    r.categorical_set = in.categorical_set;
    auto net = build_network(sample, in);

    const auto train_rows = ds.rows(Split::train);
    const auto [stop_rows, select_rows] = split_validation(ds);
    const auto test_rows = ds.rows(Split::test);
    const Eigen::VectorXd y_train = gather_rows(ds.y, train_rows);

    nn::TrainProblem<float> prob;
    prob.task = ds.task;
    prob.target = ds.task == Task::regression && sample.gaussian_target ? TargetTransform::fit_gaussian(y_train)
                                                                         : TargetTransform::identity();
    prob.x_train = std::move(in.train);
    prob.y_train = prob.target.forward(y_train).cast<float>();
    prob.x_stop = std::move(in.stop);
    prob.y_stop = gather_rows(ds.y, stop_rows);

    nn::TrainOptions topt;
    topt.optimizer = sample.optimizer;
    topt.early_stopping = opt.early_stopping;
    topt.batch_size = opt.batch_size;
    topt.seed = splitmix64(sample.seed ^ 0x545241494eULL);
    const nn::TrainState st = nn::train(*net, prob, topt);
    r.epochs_run = st.epochs_run;
    r.best_epoch = st.best_epoch;
    r.stop_reason = st.reason;
    r.stop_criterion = st.best_criterion;

    bool diverged = st.reason == nn::StopReason::divergence;
    if (!diverged) {
      const Eigen::VectorXd sel = nn::predict(*net, in.select);
      const Eigen::VectorXd test = nn::predict(*net, in.test);
      if (!sel.allFinite() || !test.allFinite()) {
        diverged = true;
        r.stop_reason = nn::StopReason::divergence;
      } else {
        r.status = RunStatus::completed;
        r.val_criterion = nn::criterion(ds.task, sel, gather_rows(ds.y, select_rows), prob.target);
        r.test_score = nn::test_metric(ds.task, test, gather_rows(ds.y, test_rows), prob.target);
      }
    }
    if (diverged) {
      r.status = RunStatus::diverged;
      r.val_criterion = worst;
      r.test_score = lower_bound_score(ds.task);
    }
    if (model != nullptr) *model = std::move(net);
  } catch (const std::exception& e) {
    r.status = RunStatus::failed;
    r.val_criterion = worst;
    r.stop_criterion = worst;
    r.test_score.reset();
    r.error = e.what();
    spdlog::warn("trial on {} failed: {}", ds.id, e.what());
  }
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<RunRecord> run_search(const Dataset& ds, const SearchSpace& space, std::size_t runs, std::uint64_t seed,
                                  const TrialOptions& opt, unsigned workers,
                                  const std::function<void(const RunRecord&)>& sink) {
  std::vector<std::optional<RunRecord>> slots(runs);
  std::mutex mu;
  std::size_t next_out = 0;
  std::atomic<std::size_t> next_in{0};
  const std::string label = to_string(space.model);

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next_in.fetch_add(1);
      if (i >= runs) return;
      std::mt19937_64 rng(splitmix64(seed + i));
      const HyperSample s = sample_hyperparams(space, ds.task, rng);
      RunRecord r = run_trial(ds, s, opt);
      r.index = i;
      r.model = label;
      spdlog::info("{} trial {}/{}: {} {} val={:.4f} test={} epochs={}", label, i + 1, runs, to_string(r.arm),
                   to_string(r.status), r.val_criterion, r.test_score ? std::to_string(*r.test_score) : "-",
                   r.epochs_run);
      std::lock_guard lock(mu);
      slots[i] = std::move(r);
      while (next_out < runs && slots[next_out]) {
        if (sink) sink(*slots[next_out]);
        ++next_out;
      }
    }
  };

  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(runs)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<RunRecord> out;
  out.reserve(runs);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::size_t select_best(const std::vector<RunRecord>& records, Task task) {
  const bool maximize = nn::criterion_maximize(task);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.status != RunStatus::completed) continue;
    if (!best) {
      best = i;
      continue;
    }
    const double b = records[*best].val_criterion;
    if (maximize ? r.val_criterion > b : r.val_criterion < b) best = i;
  }
  if (!best) throw DataError("no completed run to select from");
  return *best;
}

void append_record(std::ostream& out, const RunRecord& r) {
  out << r.to_json().dump() << '\n';
  out.flush();
  if (!out) throw DataError("failed writing run record");
}

std::vector<RunRecord> read_records(std::istream& in) {
  std::vector<RunRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("records line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(RunRecord::from_json(j));
  }
  return out;
}

std::vector<RunRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_records(in);
}

}  // namespace icftab
