#include "probekit/encoding.hpp"

#include <algorithm>
#include <unordered_map>

#include "probekit/errors.hpp"

namespace probekit {

const ColumnSchema* Schema::find(const std::string& name) const {
  for (const auto& c : columns) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Ordinal: return "ordinal";
    case ColumnKind::Categorical: return "categorical";
  }
  return "numeric";
}

ColumnKind column_kind_from_string(const std::string& s) {
  if (s == "numeric") return ColumnKind::Numeric;
  if (s == "ordinal") return ColumnKind::Ordinal;
  if (s == "categorical") return ColumnKind::Categorical;
  throw SpecError("unknown column kind '" + s + "'");
}

namespace {

std::string describe(const RawValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return "'" + *s + "'";
  return std::to_string(std::get<double>(v));
}

// Categorical cells may arrive as numbers (e.g. integer codes); match them
// against the category strings by their shortest textual form.
std::string category_key(const RawValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  const double d = std::get<double>(v);
  if (d == static_cast<double>(static_cast<long long>(d))) return std::to_string(static_cast<long long>(d));
  return std::to_string(d);
}

}  // namespace

Dataset one_hot_encode(const RawTable& table, const Schema& schema) {
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < table.columns.size(); ++i) position[table.columns[i]] = i;

  EncodingMap map;
  std::vector<std::string> names;
  std::vector<std::size_t> source;
  int offset = 0;
  for (const auto& col : schema.columns) {
    auto it = position.find(col.name);
    if (it == position.end()) throw SpecError("schema column '" + col.name + "' missing from table");
    if (col.kind == ColumnKind::Categorical && col.categories.empty()) {
      throw SpecError("categorical column '" + col.name + "' lists no categories");
    }
    EncodedColumn enc{col.name, col.kind, col.categories, offset, 1};
    if (col.kind == ColumnKind::Categorical) {
      enc.width = static_cast<int>(col.categories.size());
      for (const auto& c : col.categories) names.push_back(col.name + "=" + c);
    } else {
      names.push_back(col.name);
    }
    offset += enc.width;
    source.push_back(it->second);
    map.columns.push_back(std::move(enc));
  }

  std::optional<std::size_t> target_pos;
  int num_classes = 0;
  if (schema.target) {
    auto it = position.find(schema.target->name);
    if (it == position.end()) throw SpecError("target column '" + schema.target->name + "' missing from table");
    target_pos = it->second;
  }

  std::vector<DataPoint> points;
  points.reserve(table.rows.size());
  int max_class = -1;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.columns.size()) {
      throw EncodingError("row " + std::to_string(r) + " has " + std::to_string(row.size()) + " cells, expected " +
                              std::to_string(table.columns.size()),
                          r, "");
    }
    DataPoint p;
    p.features = Vector::Zero(offset);
    for (std::size_t c = 0; c < map.columns.size(); ++c) {
      const auto& enc = map.columns[c];
      const RawValue& v = row[source[c]];
      if (enc.kind == ColumnKind::Categorical) {
        const std::string key = category_key(v);
        auto cat = std::find(enc.categories.begin(), enc.categories.end(), key);
        if (cat == enc.categories.end()) {
          throw EncodingError("unknown category " + describe(v) + " in row " + std::to_string(r) + ", column '" +
                                  enc.name + "'",
                              r, enc.name);
        }
        p.features[enc.offset + (cat - enc.categories.begin())] = 1.0;
      } else {
        const auto* d = std::get_if<double>(&v);
        if (d == nullptr) {
          throw EncodingError("non-numeric value " + describe(v) + " in row " + std::to_string(r) + ", column '" +
                                  enc.name + "'",
                              r, enc.name);
        }
        p.features[enc.offset] = *d;
      }
    }
    if (target_pos) {
      const RawValue& v = row[*target_pos];
      const auto& target = *schema.target;
      if (target.classification && !target.classes.empty()) {
        const std::string key = category_key(v);
        auto cls = std::find(target.classes.begin(), target.classes.end(), key);
        if (cls == target.classes.end()) {
          throw EncodingError("unknown class " + describe(v) + " in row " + std::to_string(r), r, target.name);
        }
        p.label = static_cast<double>(cls - target.classes.begin());
      } else if (const auto* d = std::get_if<double>(&v)) {
        p.label = *d;
      } else {
        throw EncodingError("non-numeric label " + describe(v) + " in row " + std::to_string(r), r, target.name);
      }
      if (target.classification) max_class = std::max(max_class, static_cast<int>(*p.label));
    }
    points.push_back(std::move(p));
  }
  if (schema.target && schema.target->classification) {
    num_classes = schema.target->classes.empty() ? max_class + 1 : static_cast<int>(schema.target->classes.size());
    num_classes = std::max(num_classes, 2);
  }
  return Dataset(std::move(points), std::move(names), std::move(map), std::nullopt, num_classes);
}

RawRow decode_sample(const Vector& x, const EncodingMap& encoding) {
  RawRow row;
  if (encoding.empty()) {
    for (Eigen::Index i = 0; i < x.size(); ++i) row.emplace_back(x[i]);
    return row;
  }
  row.reserve(encoding.columns.size());
  for (const auto& enc : encoding.columns) {
    if (enc.kind == ColumnKind::Categorical) {
      int best = 0;
      for (int k = 1; k < enc.width; ++k) {
        if (x[enc.offset + k] > x[enc.offset + best]) best = k;  // strict: ties keep the lower index
      }
      row.emplace_back(enc.categories[best]);
    } else {
      row.emplace_back(x[enc.offset]);
    }
  }
  return row;
}

}  // namespace probekit
