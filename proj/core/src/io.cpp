#include "probekit/io.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "probekit/errors.hpp"
#include "probekit/log.hpp"

namespace probekit {

namespace {

// Splits the stream into records, honouring quoted fields with embedded
// delimiters, doubled quotes and line breaks.
std::vector<std::vector<std::string>> parse_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char ch;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  while (in.get(ch)) {
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field.push_back(ch);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (in.peek() == '\n') in.get(ch);
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) throw IoError("csv: unterminated quoted field");
  if (!field.empty() || !record.empty()) end_record();
  return records;
}

std::optional<double> parse_number(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  if (b == e) return std::nullopt;
  double v = 0;
  const char* first = s.data() + b;
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + e, v);
  if (ec != std::errc() || ptr != s.data() + e) return std::nullopt;
  return v;
}

}  // namespace

CsvDocument parse_csv(std::istream& in) {
  auto records = parse_records(in);
  CsvDocument doc;
  if (records.empty()) return doc;
  doc.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != doc.header.size()) {
      throw IoError("csv: record " + std::to_string(i) + " has " + std::to_string(records[i].size()) +
                    " fields, header has " + std::to_string(doc.header.size()));
    }
    doc.rows.push_back(std::move(records[i]));
  }
  return doc;
}

CsvDocument read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return parse_csv(in);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv(std::ostream& out, const CsvDocument& doc) {
  auto write_row = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(row[i]);
    }
    out << '\n';
  };
  write_row(doc.header);
  for (const auto& r : doc.rows) write_row(r);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Schema schema_from_json(const nlohmann::json& j) {
  Schema schema;
  if (!j.contains("columns") || !j["columns"].is_array()) throw SpecError("schema: 'columns' array required");
  for (const auto& c : j["columns"]) {
    ColumnSchema col;
    col.name = c.at("name").get<std::string>();
    col.kind = column_kind_from_string(c.value("kind", std::string("numeric")));
    if (c.contains("categories")) col.categories = c["categories"].get<std::vector<std::string>>();
    if (col.kind == ColumnKind::Categorical && col.categories.empty()) {
      throw SpecError("schema: categorical column '" + col.name + "' needs categories");
    }
    schema.columns.push_back(std::move(col));
  }
  if (j.contains("target")) {
    const auto& t = j["target"];
    TargetSchema target;
    target.name = t.at("name").get<std::string>();
    target.classification = t.value("classification", true);
    if (t.contains("classes")) target.classes = t["classes"].get<std::vector<std::string>>();
    schema.target = std::move(target);
  }
  return schema;
}

nlohmann::json schema_to_json(const Schema& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema.columns) {
    nlohmann::json col = {{"name", c.name}, {"kind", to_string(c.kind)}};
    if (!c.categories.empty()) col["categories"] = c.categories;
    cols.push_back(std::move(col));
  }
  nlohmann::json j = {{"columns", cols}};
  if (schema.target) {
    j["target"] = {{"name", schema.target->name}, {"classification", schema.target->classification}};
    if (!schema.target->classes.empty()) j["target"]["classes"] = schema.target->classes;
  }
  return j;
}

RawTable to_raw_table(const CsvDocument& doc, const Schema& schema, std::size_t* dropped) {
  RawTable table;
  table.columns = doc.header;
  std::vector<int> numeric(doc.header.size(), 0);  // 1 numeric feature, 2 numeric label
  for (std::size_t i = 0; i < doc.header.size(); ++i) {
    if (const auto* c = schema.find(doc.header[i]); c != nullptr && c->kind != ColumnKind::Categorical) {
      numeric[i] = 1;
    }
    if (schema.target && schema.target->name == doc.header[i] &&
        (!schema.target->classification || schema.target->classes.empty())) {
      numeric[i] = 2;
    }
  }
  std::size_t n_dropped = 0;
  for (const auto& cells : doc.rows) {
    RawRow row;
    row.reserve(cells.size());
    bool keep = true;
    for (std::size_t i = 0; i < cells.size() && keep; ++i) {
      if (numeric[i]) {
        auto v = parse_number(cells[i]);
        if (!v) {
          keep = false;
        } else {
          row.emplace_back(*v);
        }
      } else {
        row.emplace_back(cells[i]);
      }
    }
    if (keep) {
      table.rows.push_back(std::move(row));
    } else {
      ++n_dropped;
    }
  }
  if (n_dropped > 0) log().info("ingestion dropped {} row(s) with missing or unparsable numeric cells", n_dropped);
  if (dropped) *dropped = n_dropped;
  return table;
}

Dataset load_dataset(const std::filesystem::path& csv, const Schema& schema) {
  return one_hot_encode(to_raw_table(read_csv(csv), schema), schema);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  CsvDocument doc;
  doc.header = data.feature_names();
  const bool labelled = data.has_labels();
  if (labelled) doc.header.push_back("label");
  for (const auto& p : data.points()) {
    std::vector<std::string> row;
    for (Eigen::Index j = 0; j < p.features.size(); ++j) row.push_back(format_double(p.features[j]));
    if (labelled) row.push_back(format_double(*p.label));
    doc.rows.push_back(std::move(row));
  }
  write_csv(out, doc);
}

Dataset read_numeric_dataset(const std::filesystem::path& csv, std::optional<bool> classification) {
  const auto doc = read_csv(csv);
  Schema schema;
  bool has_label = false;
  int max_label = -1;
  bool integral = true;
  for (const auto& h : doc.header) {
    if (h == "label") {
      has_label = true;
    } else {
      schema.columns.push_back({h, ColumnKind::Numeric, {}});
    }
  }
  if (has_label) {
    const auto idx = static_cast<std::size_t>(
        std::find(doc.header.begin(), doc.header.end(), "label") - doc.header.begin());
    for (const auto& r : doc.rows) {
      auto v = parse_number(r[idx]);
      if (!v) continue;
      if (*v != static_cast<double>(static_cast<long long>(*v)) || *v < 0) integral = false;
      max_label = std::max(max_label, static_cast<int>(*v));
    }
    schema.target = TargetSchema{"label", classification.value_or(integral && max_label >= 1), {}};
  }
  return load_dataset(csv, schema);
}

}  // namespace probekit
