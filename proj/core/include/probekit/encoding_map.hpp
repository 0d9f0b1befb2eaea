#pragma once

#include <string>
#include <vector>

namespace probekit {

enum class ColumnKind { Numeric, Ordinal, Categorical };

/// How one raw column was laid out in the encoded feature vector.
struct EncodedColumn {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> categories;  // categorical only
  int offset = 0;                       // first encoded coordinate
  int width = 1;                        // 1 for numeric/ordinal, |categories| otherwise
};

/// Ordered description of the raw -> encoded expansion. Empty means the
/// features are already numeric and need no decoding.
struct EncodingMap {
  std::vector<EncodedColumn> columns;

  bool empty() const { return columns.empty(); }
  int encoded_dimension() const {
    int d = 0;
    for (const auto& c : columns) d += c.width;
    return d;
  }
};

}  // namespace probekit
