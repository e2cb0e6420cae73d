#include "icftab/nn/snapshot.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace icftab::nn {

namespace {

constexpr char kMagic[4] = {'I', 'C', 'F', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxArrays = 1u << 20;

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("snapshot file truncated");
  return v;
}

}  // namespace

void write_snapshot(std::ostream& out, const Snapshot& s) {
  if (s.names.size() != s.arrays.size()) throw ContractError("snapshot names and arrays differ in count");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, s.arrays.size());
  for (std::size_t i = 0; i < s.arrays.size(); ++i) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.names[i].size()));
    out.write(s.names[i].data(), static_cast<std::streamsize>(s.names[i].size()));
    put<std::uint64_t>(out, s.arrays[i].size());
  }
  for (const auto& a : s.arrays)
    out.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
  if (!out) throw DataError("failed writing snapshot");
}

Snapshot read_snapshot(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a model snapshot");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw DataError("unsupported snapshot version " + std::to_string(version));
  const auto count = get<std::uint64_t>(in);
  if (count > kMaxArrays) throw DataError("snapshot array count is implausible");
  Snapshot s;
  std::vector<std::uint64_t> sizes;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw DataError("snapshot file truncated");
    s.names.push_back(std::move(name));
    sizes.push_back(get<std::uint64_t>(in));
  }
  for (auto n : sizes) {
    std::vector<double> a(n);
    in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw DataError("snapshot file truncated");
    s.arrays.push_back(std::move(a));
  }
  return s;
}

void save_snapshot(const std::filesystem::path& path, const Snapshot& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_snapshot(out, s);
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_snapshot(in);
}

}  // namespace icftab::nn
