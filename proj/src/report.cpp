#include "icftab/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "icftab/errors.hpp"

namespace icftab::report {

namespace {

using Groups = std::map<std::string, std::map<std::string, std::vector<std::size_t>>>;

/// model -> dataset -> record indices in input order, matching task only.
Groups group(const std::vector<RunRecord>& records, Task task) {
  Groups g;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].task == task) g[records[i].model][records[i].dataset].push_back(i);
  return g;
}

bool better(double a, double b, bool maximize) { return maximize ? a > b : a < b; }

/// Indices ordered by validation criterion, best first; ties keep input order.
std::vector<std::size_t> rank_by_validation(const std::vector<RunRecord>& records, std::vector<std::size_t> idx,
                                            bool maximize) {
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return better(records[a].val_criterion, records[b].val_criterion, maximize);
  });
  return idx;
}

std::string fmt_num(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

void open_out(std::ofstream& out, const std::filesystem::path& p) {
  out.open(p);
  if (!out) throw DataError("cannot write " + p.string());
}

std::string safe_name(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return out;
}

std::string svg_colour(double v) {
  if (std::isnan(v)) return "#dddddd";
  // Dark blue at 0 to yellow at 1.
  const double t = std::clamp(v, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(30 + t * (250 - 30)));
  const int g = static_cast<int>(std::lround(30 + t * (220 - 30)));
  const int b = static_cast<int>(std::lround(110 + t * (40 - 110)));
  std::ostringstream os;
  os << '#' << std::hex << std::setfill('0') << std::setw(2) << r << std::setw(2) << g << std::setw(2) << b;
  return os.str();
}

void write_svg(const Heatmap& h, const std::filesystem::path& p) {
  constexpr int cell = 18, left = 220, top = 40;
  const int cols = static_cast<int>(h.models.size()) * h.k_top;
  const int width = left + cols * cell + 20;
  const int height = top + static_cast<int>(h.datasets.size()) * cell + 20;
  std::ofstream out;
  open_out(out, p);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  for (std::size_t m = 0; m < h.models.size(); ++m)
    out << "<text x=\"" << left + static_cast<int>(m) * h.k_top * cell << "\" y=\"" << top - 10
        << "\" font-size=\"12\">" << h.models[m] << "</text>\n";
  for (std::size_t d = 0; d < h.datasets.size(); ++d) {
    const int y = top + static_cast<int>(d) * cell;
    out << "<text x=\"4\" y=\"" << y + cell - 5 << "\" font-size=\"11\">" << h.datasets[d] << "</text>\n";
    for (int c = 0; c < cols; ++c)
      out << "<rect x=\"" << left + c * cell << "\" y=\"" << y << "\" width=\"" << cell - 1 << "\" height=\""
          << cell - 1 << "\" fill=\"" << svg_colour(h.rows[d][static_cast<std::size_t>(c)]) << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace

double lower_bound(Task task) { return task == Task::classification ? 0.5 : 0.0; }

double normalize(double raw, double low, double high) {
  if (!(high > low)) throw ContractError("normalize: high must exceed low");
  return std::clamp((raw - low) / (high - low), 0.0, 1.0);
}

bool exclude_degenerate(double best_normalized, double threshold) { return !(best_normalized > threshold); }

Normalized normalize_records(const std::vector<RunRecord>& records, Task task, double exclude_threshold) {
  Normalized n;
  n.score.assign(records.size(), 0.0);
  const double low = lower_bound(task);
  const bool maximize = nn::criterion_maximize(task);
  std::map<std::string, std::vector<std::size_t>> by_dataset;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].task == task) by_dataset[records[i].dataset].push_back(i);

  for (const auto& [ds, idx] : by_dataset) {
    DatasetStats st;
    st.low = low;
    st.records = idx.size();
    st.high = -std::numeric_limits<double>::infinity();
    for (auto i : idx)
      if (records[i].test_score) st.high = std::max(st.high, *records[i].test_score);
    if (!(st.high > low)) {
      st.excluded = true;
      n.datasets[ds] = st;
      continue;
    }
    for (auto i : idx)
      if (records[i].test_score) n.score[i] = normalize(*records[i].test_score, low, st.high);

    // Best normalized score among the runs each model would select.
    std::map<std::string, std::optional<std::size_t>> selected;
    for (auto i : idx) {
      const auto& r = records[i];
      if (r.status != RunStatus::completed) continue;
      auto& s = selected[r.model];
      if (!s || better(r.val_criterion, records[*s].val_criterion, maximize)) s = i;
    }
    st.best_selected = 0.0;
    for (const auto& [model, s] : selected)
      if (s) st.best_selected = std::max(st.best_selected, n.score[*s]);
    st.excluded = exclude_degenerate(st.best_selected, exclude_threshold);
    n.datasets[ds] = st;
  }
  return n;
}

std::vector<double> budget_trace(const std::vector<double>& val, const std::vector<double>& score,
                                 const std::vector<std::size_t>& order, bool maximize) {
  if (val.size() != score.size()) throw ContractError("budget_trace: val and score differ in length");
  std::vector<double> out;
  out.reserve(order.size());
  std::optional<std::size_t> best;
  for (auto i : order) {
    if (i >= val.size()) throw ContractError("budget_trace: order index out of range");
    if (!best || better(val[i], val[*best], maximize)) best = i;
    out.push_back(score[*best]);
  }
  return out;
}

std::vector<BudgetCurve> budget_curves(const std::vector<RunRecord>& records, const Normalized& norm, Task task,
                                       int sims, std::uint64_t seed) {
  if (sims < 1) throw ConfigError("number of simulations must be >= 1");
  const bool maximize = nn::criterion_maximize(task);
  std::mt19937_64 rng(seed);
  std::vector<BudgetCurve> out;
  for (const auto& [model, per_ds] : group(records, task)) {
    std::vector<std::vector<double>> curves;
    std::size_t longest = 0;
    for (const auto& [ds, idx] : per_ds) {
      const auto it = norm.datasets.find(ds);
      if (it == norm.datasets.end() || it->second.excluded) continue;
      std::vector<double> val, score;
      for (auto i : idx) {
        val.push_back(records[i].val_criterion);
        score.push_back(norm.score[i]);
      }
      std::vector<double> mean(idx.size(), 0.0);
      std::vector<std::size_t> order(idx.size());
      for (int s = 0; s < sims; ++s) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        const auto tr = budget_trace(val, score, order, maximize);
        for (std::size_t b = 0; b < tr.size(); ++b) mean[b] += tr[b] / sims;
      }
      longest = std::max(longest, mean.size());
      curves.push_back(std::move(mean));
    }
    if (curves.empty()) continue;
    BudgetCurve c;
    c.model = model;
    c.mean.assign(longest, 0.0);
    for (const auto& cv : curves)
      for (std::size_t b = 0; b < longest; ++b) c.mean[b] += cv[std::min(b, cv.size() - 1)] / static_cast<double>(curves.size());
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ProfileSeries> performance_profile(const std::vector<RunRecord>& records, const Normalized& norm, Task task,
                                               int k_top, int tau_points) {
  if (k_top < 1) throw ConfigError("top-k must be >= 1");
  if (tau_points < 2) throw ConfigError("tau grid needs at least two points");
  const bool maximize = nn::criterion_maximize(task);
  std::vector<ProfileSeries> out;
  for (const auto& [model, per_ds] : group(records, task)) {
    ProfileSeries ps;
    ps.model = model;
    std::vector<double> pooled;
    for (const auto& [ds, idx] : per_ds) {
      const auto it = norm.datasets.find(ds);
      if (it == norm.datasets.end() || it->second.excluded) continue;
      if (idx.size() < static_cast<std::size_t>(k_top)) ps.short_group = true;
      const auto ranked = rank_by_validation(records, idx, maximize);
      const std::size_t take = std::min(ranked.size(), static_cast<std::size_t>(k_top));
      for (std::size_t r = 0; r < take; ++r) pooled.push_back(norm.score[ranked[r]]);
    }
    if (pooled.empty()) continue;
    for (int t = 0; t < tau_points; ++t) {
      const double tau = static_cast<double>(t) / (tau_points - 1);
      const auto above = std::count_if(pooled.begin(), pooled.end(), [tau](double s) { return s > tau; });
      ps.tau.push_back(tau);
      ps.fraction.push_back(static_cast<double>(above) / static_cast<double>(pooled.size()));
    }
    out.push_back(std::move(ps));
  }
  return out;
}

Heatmap heatmap(const std::vector<RunRecord>& records, const Normalized& norm, Task task, int k_top) {
  if (k_top < 1) throw ConfigError("top-k must be >= 1");
  const bool maximize = nn::criterion_maximize(task);
  const Groups g = group(records, task);
  Heatmap h;
  h.k_top = k_top;
  for (const auto& [model, _] : g) h.models.push_back(model);
  for (const auto& [ds, st] : norm.datasets)
    if (!st.excluded) h.datasets.push_back(ds);
  for (const auto& ds : h.datasets) {
    std::vector<double> row;
    for (const auto& model : h.models) {
      std::vector<std::size_t> idx;
      const auto& per_ds = g.at(model);
      if (auto it = per_ds.find(ds); it != per_ds.end()) idx = rank_by_validation(records, it->second, maximize);
      for (int r = 0; r < k_top; ++r)
        row.push_back(static_cast<std::size_t>(r) < idx.size() ? norm.score[idx[static_cast<std::size_t>(r)]]
                                                               : std::numeric_limits<double>::quiet_NaN());
    }
    h.rows.push_back(std::move(row));
  }
  return h;
}

nlohmann::json write_report(const std::vector<RunRecord>& records, const ReportOptions& opt,
                            const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::size_t skipped = 0;
  for (const auto& r : records)
    if (r.task != opt.task) ++skipped;
  if (skipped > 0) spdlog::warn("ignoring {} records of the other task", skipped);

  const Normalized norm = normalize_records(records, opt.task);
  const auto budget = budget_curves(records, norm, opt.task, opt.sims, opt.seed);
  const auto profile = performance_profile(records, norm, opt.task, opt.top_k, opt.tau_points);
  const Heatmap hm = heatmap(records, norm, opt.task, opt.top_k);

  {
    std::ofstream out;
    open_out(out, out_dir / "budget.csv");
    out << "budget";
    std::size_t longest = 0;
    for (const auto& c : budget) {
      out << ',' << c.model;
      longest = std::max(longest, c.mean.size());
    }
    out << '\n';
    for (std::size_t b = 0; b < longest; ++b) {
      out << b + 1;
      for (const auto& c : budget) out << ',' << (b < c.mean.size() ? fmt_num(c.mean[b]) : "");
      out << '\n';
    }
  }
  {
    std::ofstream out;
    open_out(out, out_dir / "profile.csv");
    out << "tau";
    for (const auto& p : profile) out << ',' << p.model;
    out << '\n';
    for (int t = 0; t < opt.tau_points && !profile.empty(); ++t) {
      out << fmt_num(profile.front().tau[static_cast<std::size_t>(t)]);
      for (const auto& p : profile) out << ',' << fmt_num(p.fraction[static_cast<std::size_t>(t)]);
      out << '\n';
    }
  }
  auto heat_header = [&](std::ostream& out) {
    out << "dataset";
    for (const auto& m : hm.models)
      for (int r = 1; r <= hm.k_top; ++r) out << ',' << m << "_r" << r;
    out << '\n';
  };
  auto heat_row = [&](std::ostream& out, std::size_t d) {
    out << hm.datasets[d];
    for (double v : hm.rows[d]) out << ',' << fmt_num(v);
    out << '\n';
  };
  {
    std::ofstream out;
    open_out(out, out_dir / "heatmap.csv");
    heat_header(out);
    for (std::size_t d = 0; d < hm.datasets.size(); ++d) heat_row(out, d);
  }
  for (std::size_t d = 0; d < hm.datasets.size(); ++d) {
    std::ofstream out;
    open_out(out, out_dir / ("heatmap_" + safe_name(hm.datasets[d]) + ".csv"));
    heat_header(out);
    heat_row(out, d);
  }
  if (opt.svg) write_svg(hm, out_dir / "heatmap.svg");

  nlohmann::json summary;
  summary["task"] = to_string(opt.task);
  summary["sims"] = opt.sims;
  summary["top_k"] = opt.top_k;
  summary["seed"] = opt.seed;
  summary["records"] = records.size() - skipped;
  summary["excluded_datasets"] = nlohmann::json::array();
  summary["datasets"] = nlohmann::json::object();
  for (const auto& [ds, st] : norm.datasets) {
    if (st.excluded) summary["excluded_datasets"].push_back(ds);
    summary["datasets"][ds] = {{"low", st.low},
                               {"high", std::isfinite(st.high) ? nlohmann::json(st.high) : nlohmann::json(nullptr)},
                               {"best_selected_normalized", st.best_selected},
                               {"excluded", st.excluded},
                               {"records", st.records}};
  }
  nlohmann::json selection = nlohmann::json::object();
  for (const auto& [model, per_ds] : group(records, opt.task)) {
    for (const auto& [ds, idx] : per_ds) {
      std::vector<RunRecord> subset;
      for (auto i : idx) subset.push_back(records[i]);
      nlohmann::json entry = {{"runs", idx.size()}};
      try {
        const std::size_t best = idx[select_best(subset, opt.task)];
        entry["record_index"] = records[best].index;
        entry["val_criterion"] = records[best].val_criterion;
        entry["test_score"] = records[best].test_score ? nlohmann::json(*records[best].test_score) : nlohmann::json(nullptr);
        entry["normalized"] = norm.score[best];
      } catch (const DataError&) {
        entry["record_index"] = nullptr;
      }
      selection[model][ds] = entry;
    }
  }
  summary["selection"] = selection;
  nlohmann::json short_groups = nlohmann::json::array();
  for (const auto& p : profile)
    if (p.short_group) short_groups.push_back(p.model);
  summary["profile_short_groups"] = short_groups;

  std::ofstream out;
  open_out(out, out_dir / "summary.json");
  out << summary.dump(2) << '\n';
  return summary;
}

}  // namespace icftab::report
