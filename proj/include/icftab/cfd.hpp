#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "icftab/tabular.hpp"

namespace icftab {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Value-to-code table for one column encoded as categorical.
struct BinMap {
  std::size_t column = 0;
  std::vector<double> values;  // ascending; code = position

  int bin_count() const { return static_cast<int>(values.size()); }
  /// Code of v, or -1 when v never appeared in the training rows.
  int code(double v) const;
};

struct CfdOptions {
  /// Prepend the standardized raw value as channel 0 of categorical columns.
  bool append_raw = false;
};

/// N x D x M channel tensor, stored as an N x (D*M) row-major matrix so that
/// element (n, d, m) sits at column d*M + m.
struct EncodedTensor {
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  Eigen::Index m = 1;
  RowMatrixXd data;
  std::vector<bool> categorical;  // per column

  double operator()(Eigen::Index row, Eigen::Index col, Eigen::Index ch) const {
    return data(row, col * m + ch);
  }
};

/// One BinMap per index in `icf_set`, fitted on the training rows. A column
/// whose training cardinality exceeds `max_cardinality` is a ContractError.
std::vector<BinMap> fit_binmaps(const Dataset& ds, const std::vector<std::size_t>& icf_set,
                                std::size_t max_cardinality = std::numeric_limits<std::size_t>::max());

/// Channel depth: largest bin count (plus one with append_raw), 1 when empty.
Eigen::Index channel_depth(const std::vector<BinMap>& maps, const CfdOptions& opt = {});

/// Encodes rows. `raw` provides the values looked up in the bin maps,
/// `standardized` the values placed in channel 0 of numerical columns.
EncodedTensor encode(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& standardized,
                     const std::vector<BinMap>& maps, Eigen::Index depth, const CfdOptions& opt = {});

/// N x (D*M) matrix, (feature, channel) row-major within each row.
Eigen::MatrixXd flatten(const EncodedTensor& t);

/// Binary tensor file: "ICFT", u32 version, u64 N, D, M, ceil(D/8) layout
/// bytes (bit d set when column d is categorical, LSB first), then N*D*M
/// little-endian float32 values in N -> D -> M order.
void write_tensor(std::ostream& out, const EncodedTensor& t);
EncodedTensor read_tensor(std::istream& in);
void save_tensor(const std::filesystem::path& path, const EncodedTensor& t);
EncodedTensor load_tensor(const std::filesystem::path& path);

}  // namespace icftab
