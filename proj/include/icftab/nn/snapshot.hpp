#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "icftab/nn/tensor.hpp"

namespace icftab::nn {

/// Named parameter and buffer arrays of a network, in collection order.
struct Snapshot {
  std::vector<std::string> names;
  std::vector<std::vector<double>> arrays;

  bool empty() const { return arrays.empty(); }
};

template <typename Scalar>
Snapshot capture(Sequential<Scalar>& net) {
  Snapshot s;
  for (const auto& p : net.params()) {
    s.names.push_back(p.name);
    s.arrays.emplace_back(p.value, p.value + p.size);
  }
  for (const auto& b : net.buffers()) {
    s.names.push_back(b.name);
    s.arrays.emplace_back(b.value, b.value + b.size);
  }
  return s;
}

template <typename Scalar>
void restore(Sequential<Scalar>& net, const Snapshot& s) {
  std::vector<std::pair<Scalar*, Index>> targets;
  for (const auto& p : net.params()) targets.emplace_back(p.value, p.size);
  for (const auto& b : net.buffers()) targets.emplace_back(b.value, b.size);
  if (targets.size() != s.arrays.size()) throw ContractError("snapshot does not match the network layout");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (static_cast<Index>(s.arrays[i].size()) != targets[i].second)
      throw ContractError("snapshot array '" + s.names[i] + "' has the wrong size");
    for (Index k = 0; k < targets[i].second; ++k)
      targets[i].first[k] = static_cast<Scalar>(s.arrays[i][static_cast<std::size_t>(k)]);
  }
}

/// "ICFS", u32 version, u64 array count, then per array u32 name length,
/// name bytes, u64 element count; then every array as little-endian f64.
void write_snapshot(std::ostream& out, const Snapshot& s);
Snapshot read_snapshot(std::istream& in);
void save_snapshot(const std::filesystem::path& path, const Snapshot& s);
Snapshot load_snapshot(const std::filesystem::path& path);

}  // namespace icftab::nn
