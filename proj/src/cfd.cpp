#include "icftab/cfd.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "icftab/errors.hpp"
#include "icftab/stats.hpp"

namespace icftab {

using Eigen::Index;

int BinMap::code(double v) const {
  const auto it = std::lower_bound(values.begin(), values.end(), v);
  if (it == values.end() || *it != v) return -1;
  return static_cast<int>(it - values.begin());
}

std::vector<BinMap> fit_binmaps(const Dataset& ds, const std::vector<std::size_t>& icf_set,
                                std::size_t max_cardinality) {
  const auto rows = ds.rows(Split::train);
  std::vector<BinMap> maps;
  for (std::size_t col : icf_set) {
    if (col >= static_cast<std::size_t>(ds.n_cols()))
      throw ContractError("categorical index " + std::to_string(col) + " out of range");
    Eigen::VectorXd v(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) v(static_cast<Index>(i)) = ds.X(rows[i], static_cast<Index>(col));
    BinMap map;
    map.column = col;
    map.values = stats::categorize(v).table;
    if (map.values.size() > max_cardinality)
      throw ContractError("column " + std::to_string(col) + " has " + std::to_string(map.values.size()) +
                          " categories, above the detector's cardinality gate");
    maps.push_back(std::move(map));
  }
  std::sort(maps.begin(), maps.end(), [](const BinMap& a, const BinMap& b) { return a.column < b.column; });
  return maps;
}

Index channel_depth(const std::vector<BinMap>& maps, const CfdOptions& opt) {
  if (maps.empty()) return 1;
  int m = 0;
  for (const auto& b : maps) m = std::max(m, b.bin_count());
  return std::max<Index>(1, m + (opt.append_raw ? 1 : 0));
}

EncodedTensor encode(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& standardized,
                     const std::vector<BinMap>& maps, Index depth, const CfdOptions& opt) {
  if (raw.rows() != standardized.rows() || raw.cols() != standardized.cols())
    throw ContractError("encode: raw and standardized shapes differ");
  if (depth < channel_depth(maps, opt)) throw ContractError("encode: channel depth below bin count");

  EncodedTensor t;
  t.n = raw.rows();
  t.d = raw.cols();
  t.m = depth;
  t.data = RowMatrixXd::Zero(t.n, t.d * t.m);
  t.categorical.assign(static_cast<std::size_t>(t.d), false);
  std::vector<const BinMap*> by_col(static_cast<std::size_t>(t.d), nullptr);
  for (const auto& b : maps) {
    by_col.at(b.column) = &b;
    t.categorical[b.column] = true;
  }
  const Index shift = opt.append_raw ? 1 : 0;
  for (Index i = 0; i < t.n; ++i) {
    for (Index j = 0; j < t.d; ++j) {
      const BinMap* b = by_col[static_cast<std::size_t>(j)];
      if (b == nullptr) {
        t.data(i, j * t.m) = standardized(i, j);
        continue;
      }
      if (opt.append_raw) t.data(i, j * t.m) = standardized(i, j);
      const int c = b->code(raw(i, j));
      if (c >= 0) t.data(i, j * t.m + shift + c) = 1.0;
    }
  }
  return t;
}

Eigen::MatrixXd flatten(const EncodedTensor& t) { return Eigen::MatrixXd(t.data); }

namespace {

constexpr char kMagic[4] = {'I', 'C', 'F', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "tensor I/O assumes a little-endian host");

template <typename T>
void put_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("tensor file truncated");
  return v;
}

}  // namespace

void write_tensor(std::ostream& out, const EncodedTensor& t) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.n));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.d));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.m));
  std::vector<unsigned char> bitmap(static_cast<std::size_t>((t.d + 7) / 8), 0);
  for (Index j = 0; j < t.d; ++j)
    if (t.categorical[static_cast<std::size_t>(j)]) bitmap[static_cast<std::size_t>(j / 8)] |= static_cast<unsigned char>(1u << (j % 8));
  out.write(reinterpret_cast<const char*>(bitmap.data()), static_cast<std::streamsize>(bitmap.size()));
  for (Index i = 0; i < t.n; ++i)
    for (Index k = 0; k < t.d * t.m; ++k)
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(t.data(i, k))));
  if (!out) throw DataError("failed writing tensor");
}

EncodedTensor read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw DataError("not an encoded tensor file");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVersion) throw DataError("unsupported tensor file version " + std::to_string(version));
  EncodedTensor t;
  t.n = static_cast<Index>(get_le<std::uint64_t>(in));
  t.d = static_cast<Index>(get_le<std::uint64_t>(in));
  t.m = static_cast<Index>(get_le<std::uint64_t>(in));
  std::vector<unsigned char> bitmap(static_cast<std::size_t>((t.d + 7) / 8));
  in.read(reinterpret_cast<char*>(bitmap.data()), static_cast<std::streamsize>(bitmap.size()));
  if (!in) throw DataError("tensor file truncated");
  t.categorical.resize(static_cast<std::size_t>(t.d));
  for (Index j = 0; j < t.d; ++j) t.categorical[static_cast<std::size_t>(j)] = (bitmap[static_cast<std::size_t>(j / 8)] >> (j % 8)) & 1u;
  t.data.resize(t.n, t.d * t.m);
  for (Index i = 0; i < t.n; ++i)
    for (Index k = 0; k < t.d * t.m; ++k) t.data(i, k) = std::bit_cast<float>(get_le<std::uint32_t>(in));
  return t;
}

void save_tensor(const std::filesystem::path& path, const EncodedTensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_tensor(out, t);
}

EncodedTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_tensor(in);
}

}  // namespace icftab
