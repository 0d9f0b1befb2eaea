#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "probekit/encoding_map.hpp"
#include "probekit/types.hpp"

namespace probekit {

using RawValue = std::variant<double, std::string>;
using RawRow = std::vector<RawValue>;

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> categories;  // required for categorical columns
};

/// Label column description. Classification labels are either numeric class
/// indices or strings listed in `classes`.
struct TargetSchema {
  std::string name;
  bool classification = true;
  std::vector<std::string> classes;
};

struct Schema {
  std::vector<ColumnSchema> columns;
  std::optional<TargetSchema> target;

  const ColumnSchema* find(const std::string& name) const;
};

/// Mixed-type table. `columns` names each entry of every row.
struct RawTable {
  std::vector<std::string> columns;
  std::vector<RawRow> rows;
};

/// Expands categorical columns to indicator blocks; numeric and ordinal
/// columns pass through. The target column, when the schema names one, becomes
/// the label. Throws EncodingError naming the row and column of any value the
/// schema does not admit.
Dataset one_hot_encode(const RawTable& table, const Schema& schema);

/// Inverse of one_hot_encode for one feature vector: each categorical block
/// decodes to its arg-max category (ties go to the lowest index).
RawRow decode_sample(const Vector& x, const EncodingMap& encoding);

std::string to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& s);

}  // namespace probekit
