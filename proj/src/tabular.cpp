#include "icftab/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "icftab/errors.hpp"
#include "icftab/special.hpp"

namespace icftab {

using Eigen::Index;

std::string to_string(Task task) {
  return task == Task::classification ? "classification" : "regression";
}

Task task_from_string(const std::string& s) {
  if (s == "classification") return Task::classification;
  if (s == "regression") return Task::regression;
  throw ConfigError("unknown task '" + s + "'");
}

std::vector<Index> Dataset::rows(Split which) const {
  std::vector<Index> out;
  for (Index i = 0; i < static_cast<Index>(split.size()); ++i)
    if (split[i] == which) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::declared_categorical() const {
  std::vector<std::size_t> out;
  for (const auto& c : columns)
    if (c.declared_kind == ColumnKind::categorical) out.push_back(c.index);
  return out;
}

// ---------------------------------------------------------------- schema

Schema Schema::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("schema is not valid JSON: ") + e.what());
  }
  Schema s;
  try {
    s.target = j.at("target").get<std::string>();
    s.task = task_from_string(j.at("task").get<std::string>());
    if (j.contains("categorical")) s.categorical = j["categorical"].get<std::vector<std::string>>();
    if (j.contains("features")) s.features = j["features"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError(e.what());
  }
  return s;
}

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string Schema::to_json_text() const {
  nlohmann::json j;
  j["target"] = target;
  j["task"] = to_string(task);
  j["categorical"] = categorical;
  if (!features.empty()) j["features"] = features;
  return j.dump(2);
}

// ---------------------------------------------------------------- csv

namespace {

// Splits one RFC-4180 record. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_no;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get(ch);
      ++line_no;
      fields.push_back(std::move(field));
      return true;
    } else if (ch == '\n') {
      ++line_no;
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(ch);
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col, const std::string& name) {
  const std::string s = trim(raw);
  if (s.empty())
    throw DataError("missing value at row " + std::to_string(row) + ", column " +
                    std::to_string(col) + " ('" + name + "')");
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw ParseError("non-numeric value '" + s + "' at row " + std::to_string(row) +
                         ", column " + std::to_string(col) + " ('" + name + "')",
                     row, col);
  return v;
}

}  // namespace

Dataset read_csv(std::istream& in, const Schema& schema, const std::string& id) {
  std::vector<std::string> header;
  std::size_t line_no = 0;
  if (!read_record(in, header, line_no)) throw DataError("CSV is empty");
  for (auto& h : header) h = trim(h);
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0] = header[0].substr(3);

  const auto target_it = std::find(header.begin(), header.end(), schema.target);
  if (target_it == header.end())
    throw SchemaError("target column '" + schema.target + "' not found in CSV header");
  const std::size_t target_col = static_cast<std::size_t>(target_it - header.begin());

  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != target_col) feature_cols.push_back(c);

  {
    std::set<std::string> seen;
    for (const auto& h : header)
      if (!seen.insert(h).second) throw SchemaError("duplicate column '" + h + "' in CSV header");
  }
  if (!schema.features.empty()) {
    std::set<std::string> declared(schema.features.begin(), schema.features.end());
    std::set<std::string> present;
    for (auto c : feature_cols) present.insert(header[c]);
    for (const auto& f : declared)
      if (!present.count(f)) throw SchemaError("schema feature '" + f + "' missing from CSV");
    for (const auto& p : present)
      if (!declared.count(p)) throw SchemaError("CSV column '" + p + "' not declared in schema");
  }
  for (const auto& cat : schema.categorical) {
    if (cat == schema.target) throw SchemaError("target column cannot be categorical");
    if (std::find(header.begin(), header.end(), cat) == header.end())
      throw SchemaError("categorical column '" + cat + "' not found in CSV header");
  }
  if (feature_cols.empty()) throw SchemaError("CSV has no feature columns");

  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::vector<std::string> fields;
  std::size_t row = 0;
  while (read_record(in, fields, line_no)) {
    ++row;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                      " cells, expected " + std::to_string(header.size()));
    std::vector<double> values(feature_cols.size());
    for (std::size_t j = 0; j < feature_cols.size(); ++j)
      values[j] = parse_cell(fields[feature_cols[j]], row, feature_cols[j], header[feature_cols[j]]);
    targets.push_back(parse_cell(fields[target_col], row, target_col, header[target_col]));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError("CSV has no data rows");

  Dataset ds;
  ds.id = id;
  ds.task = schema.task;
  const Index n = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(feature_cols.size());
  ds.X.resize(n, d);
  ds.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) ds.X(i, j) = rows[i][j];
    ds.y(i) = targets[i];
    if (ds.task == Task::classification && ds.y(i) != 0.0 && ds.y(i) != 1.0)
      throw DataError("classification target at row " + std::to_string(i + 1) +
                      " is not 0 or 1");
  }
  for (Index j = 0; j < d; ++j) {
    ColumnMeta meta;
    meta.name = header[feature_cols[j]];
    meta.index = static_cast<std::size_t>(j);
    meta.declared_kind = std::find(schema.categorical.begin(), schema.categorical.end(),
                                   meta.name) != schema.categorical.end()
                             ? ColumnKind::categorical
                             : ColumnKind::numerical;
    ds.columns.push_back(meta);
  }
  ds.split.assign(static_cast<std::size_t>(n), Split::train);
  refit_column_meta(ds);
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CSV file " + path.string());
  return read_csv(in, schema, path.stem().string());
}

void write_csv(std::ostream& out, const Dataset& ds, const std::string& target_name) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q.push_back('"');
      q.push_back(c);
    }
    q.push_back('"');
    return q;
  };
  for (const auto& c : ds.columns) out << quote(c.name) << ',';
  out << quote(target_name) << '\n';
  out << std::setprecision(17);
  for (Index i = 0; i < ds.n_rows(); ++i) {
    for (Index j = 0; j < ds.n_cols(); ++j) out << ds.X(i, j) << ',';
    out << ds.y(i) << '\n';
  }
}

void save_csv_with_schema(const Dataset& ds, const std::filesystem::path& csv_path,
                          const std::filesystem::path& schema_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw DataError("cannot write " + csv_path.string());
  write_csv(csv, ds, "y");
  Schema schema;
  schema.target = "y";
  schema.task = ds.task;
  for (const auto& c : ds.columns)
    if (c.declared_kind == ColumnKind::categorical) schema.categorical.push_back(c.name);
  std::ofstream js(schema_path);
  if (!js) throw DataError("cannot write " + schema_path.string());
  js << schema.to_json_text() << '\n';
}

void refit_column_meta(Dataset& ds) {
  const auto train = ds.rows(Split::train);
  for (auto& meta : ds.columns) {
    std::vector<double> v;
    v.reserve(train.size());
    for (Index r : train) v.push_back(ds.X(r, static_cast<Index>(meta.index)));
    std::sort(v.begin(), v.end());
    meta.cardinality = static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
  }
}

// ---------------------------------------------------------------- split

Dataset split_dataset(Dataset ds, const std::array<double, 3>& fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");

  const Index n = ds.n_rows();
  std::array<Index, 3> sizes;
  sizes[0] = static_cast<Index>(std::llround(static_cast<double>(n) * fractions[0]));
  sizes[1] = static_cast<Index>(std::llround(static_cast<double>(n) * fractions[1]));
  sizes[2] = n - sizes[0] - sizes[1];
  for (Index s : sizes)
    if (s <= 0) throw ConfigError("split would leave a partition with no rows");

  std::mt19937_64 rng(seed);
  const std::array<Split, 3> labels{Split::train, Split::valid, Split::test};
  ds.split.assign(static_cast<std::size_t>(n), Split::train);

  auto deal = [&](std::vector<Index>& idx, const std::array<Index, 3>& counts) {
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s)
      for (Index c = 0; c < counts[s]; ++c) ds.split[static_cast<std::size_t>(idx[pos++])] = labels[s];
  };

  if (ds.task == Task::regression) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    deal(idx, sizes);
  } else {
    std::vector<Index> ones, zeros;
    for (Index i = 0; i < n; ++i) (ds.y(i) == 1.0 ? ones : zeros).push_back(i);
    // Class-1 quota per split by largest remainder; class 0 fills the rest.
    const double p1 = static_cast<double>(ones.size()) / static_cast<double>(n);
    std::array<Index, 3> q1;
    std::array<double, 3> frac;
    Index assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = static_cast<double>(sizes[s]) * p1;
      q1[s] = static_cast<Index>(std::floor(exact));
      frac[s] = exact - static_cast<double>(q1[s]);
      assigned += q1[s];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (int i = 0; assigned < static_cast<Index>(ones.size()); ++i, ++assigned) ++q1[order[i % 3]];
    std::array<Index, 3> q0;
    for (int s = 0; s < 3; ++s) q0[s] = sizes[s] - q1[s];
    deal(ones, q1);
    deal(zeros, q0);
  }
  refit_column_meta(ds);
  return ds;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& X, const std::vector<Index>& rows) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = X.row(rows[i]);
  return out;
}

Eigen::VectorXd gather_rows(const Eigen::VectorXd& y, const std::vector<Index>& rows) {
  Eigen::VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = y(rows[i]);
  return out;
}

// ---------------------------------------------------------------- transforms

Standardizer Standardizer::fit(const Eigen::MatrixXd& train) {
  Standardizer s;
  const Index n = train.rows();
  s.mean_ = train.colwise().mean().transpose();
  s.std_.resize(train.cols());
  for (Index j = 0; j < train.cols(); ++j) {
    const double var = n > 0 ? (train.col(j).array() - s.mean_(j)).square().sum() / static_cast<double>(n) : 0.0;
    s.std_(j) = std::sqrt(var);
  }
  return s;
}

double Standardizer::transform_value(Index col, double v) const {
  if (std_(col) < kMinStd) return 0.0;
  return (v - mean_(col)) / std_(col);
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd out(X.rows(), X.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    if (std_(j) < kMinStd)
      out.col(j).setZero();
    else
      out.col(j) = (X.col(j).array() - mean_(j)) / std_(j);
  }
  return out;
}

TargetTransform TargetTransform::fit_gaussian(const Eigen::VectorXd& y_train) {
  const Index n = y_train.size();
  if (n < 2) throw DataError("gaussian target transform needs at least 2 training targets");
  std::vector<double> sorted(y_train.data(), y_train.data() + n);
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back())
    throw DataError("gaussian target transform: all training targets are equal");

  TargetTransform t;
  t.kind_ = Kind::gaussian;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    // average 1-based rank of the tie block [i, j)
    const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    t.values_.push_back(sorted[i]);
    t.probs_.push_back((rank - 0.5) / static_cast<double>(n));
    i = j;
  }
  return t;
}

namespace {

double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  if (xs[lo] == x) return ys[lo];
  const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + w * (ys[hi] - ys[lo]);
}

}  // namespace

double TargetTransform::forward(double y) const {
  if (kind_ == Kind::identity) return y;
  return special::norm_ppf(interp(values_, probs_, y));
}

double TargetTransform::inverse(double z) const {
  if (kind_ == Kind::identity) return z;
  const double p = special::norm_cdf(z);
  return interp(probs_, values_, p);
}

Eigen::VectorXd TargetTransform::forward(const Eigen::VectorXd& y) const {
  return y.unaryExpr([this](double v) { return forward(v); });
}

Eigen::VectorXd TargetTransform::inverse(const Eigen::VectorXd& z) const {
  return z.unaryExpr([this](double v) { return inverse(v); });
}

// ---------------------------------------------------------------- metrics

namespace {
void check_pair(const Eigen::VectorXd& pred, const Eigen::VectorXd& y, const char* name) {
  if (pred.size() != y.size())
    throw std::invalid_argument(std::string(name) + ": length mismatch");
  if (y.size() == 0) throw std::invalid_argument(std::string(name) + ": empty input");
}
}  // namespace

double metric_accuracy(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  check_pair(pred, y, "metric_accuracy");
  return (pred.array() == y.array()).cast<double>().mean();
}

double metric_r2(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  check_pair(pred, y, "metric_r2");
  if (y.size() < 2) throw std::invalid_argument("metric_r2: needs at least 2 points");
  const double mean = y.mean();
  const double ss_tot = (y.array() - mean).square().sum();
  if (!(ss_tot > 0.0)) throw std::invalid_argument("metric_r2: target has zero variance");
  const double ss_res = (pred - y).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

double metric_mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  check_pair(pred, y, "metric_mae");
  return (pred - y).cwiseAbs().mean();
}

// ---------------------------------------------------------------- generators

Dataset gen_planted_icf(Index n, int k, int d_noise, double flip_prob, std::uint64_t seed) {
  if (k < 2) throw ConfigError("gen_planted_icf: k must be >= 2");
  if (n < 10 * static_cast<Index>(k)) throw ConfigError("gen_planted_icf: n must be >= 10 k");
  if (d_noise < 0) throw ConfigError("gen_planted_icf: d_noise must be >= 0");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("gen_planted_icf: flip_prob in [0,1]");

  std::mt19937_64 rng(seed);
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::uniform_int_distribution<int> code_dist(0, k - 1);
  std::bernoulli_distribution flip(flip_prob);
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset ds;
  ds.id = "planted_icf";
  ds.task = Task::classification;
  ds.X.resize(n, 1 + d_noise);
  ds.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const int code = code_dist(rng);
    ds.X(i, 0) = code;
    int label = perm[static_cast<std::size_t>(code)] % 2;
    if (flip(rng)) label = 1 - label;
    ds.y(i) = label;
    for (int j = 0; j < d_noise; ++j) ds.X(i, 1 + j) = noise(rng);
  }
  ds.columns.push_back({"code", ColumnKind::numerical, 0, 0});
  for (int j = 0; j < d_noise; ++j)
    ds.columns.push_back({"noise" + std::to_string(j + 1), ColumnKind::numerical, 0,
                          static_cast<std::size_t>(j + 1)});
  ds.split.assign(static_cast<std::size_t>(n), Split::train);
  refit_column_meta(ds);
  return ds;
}

Dataset gen_planted_regression(Index n, int k, int d_noise, double spacing, PlantedMode mode,
                               std::uint64_t seed) {
  if (k < 2) throw ConfigError("gen_planted_regression: k must be >= 2");
  if (n < 10 * static_cast<Index>(k)) throw ConfigError("gen_planted_regression: n must be >= 10 k");
  if (d_noise < 0) throw ConfigError("gen_planted_regression: d_noise must be >= 0");
  if (!(spacing > 0.0)) throw ConfigError("gen_planted_regression: spacing must be > 0");

  std::mt19937_64 rng(seed);
  std::vector<int> g(static_cast<std::size_t>(k));
  std::iota(g.begin(), g.end(), 0);
  if (mode == PlantedMode::permuted) std::shuffle(g.begin(), g.end(), rng);

  std::uniform_int_distribution<int> code_dist(0, k - 1);
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset ds;
  ds.id = mode == PlantedMode::permuted ? "planted_regression_permuted" : "planted_regression_linear";
  ds.task = Task::regression;
  ds.X.resize(n, 1 + d_noise);
  ds.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const int code = code_dist(rng);
    ds.X(i, 0) = code;
    ds.y(i) = spacing * g[static_cast<std::size_t>(code)] + noise(rng);
    for (int j = 0; j < d_noise; ++j) ds.X(i, 1 + j) = noise(rng);
  }
  ds.columns.push_back({"code", ColumnKind::numerical, 0, 0});
  for (int j = 0; j < d_noise; ++j)
    ds.columns.push_back({"noise" + std::to_string(j + 1), ColumnKind::numerical, 0,
                          static_cast<std::size_t>(j + 1)});
  ds.split.assign(static_cast<std::size_t>(n), Split::train);
  refit_column_meta(ds);
  return ds;
}

Dataset gen_nonsmooth_regression(Index n, double frequency, double noise_std, std::uint64_t seed) {
  if (!(frequency >= 1.0)) throw ConfigError("gen_nonsmooth_regression: frequency must be >= 1");
  if (!(noise_std >= 0.0)) throw ConfigError("gen_nonsmooth_regression: noise_std must be >= 0");
  if (n < 1) throw ConfigError("gen_nonsmooth_regression: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset ds;
  ds.id = "nonsmooth_regression";
  ds.task = Task::regression;
  ds.X.resize(n, 1);
  ds.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double x = unif(rng);
    ds.X(i, 0) = x;
    ds.y(i) = std::sin(2.0 * std::numbers::pi * frequency * x) + noise_std * noise(rng);
  }
  ds.columns.push_back({"x", ColumnKind::numerical, 0, 0});
  ds.split.assign(static_cast<std::size_t>(n), Split::train);
  refit_column_meta(ds);
  return ds;
}

}  // namespace icftab
