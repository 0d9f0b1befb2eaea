#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probekit/encoding.hpp"
#include "probekit/types.hpp"

namespace probekit {

/// Header plus string cells, as read from an RFC-4180 CSV file.
struct CsvDocument {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvDocument parse_csv(std::istream& in);
CsvDocument read_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const CsvDocument& doc);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_escape(const std::string& field);

/// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double v);

Schema schema_from_json(const nlohmann::json& j);
nlohmann::json schema_to_json(const Schema& schema);

/// Converts string cells to a RawTable under `schema`. Rows with an empty or
/// unparsable numeric cell are dropped and the count is logged.
RawTable to_raw_table(const CsvDocument& doc, const Schema& schema, std::size_t* dropped = nullptr);

/// CSV + sidecar schema -> encoded Dataset.
Dataset load_dataset(const std::filesystem::path& csv, const Schema& schema);

/// Writes feature columns (named by the dataset) plus a trailing `label` column.
void write_dataset_csv(std::ostream& out, const Dataset& data);

/// Reads a headered numeric CSV; a column named `label` becomes the label.
/// Without an explicit `classification` flag, non-negative integer labels
/// with at least two distinct values are treated as classes.
Dataset read_numeric_dataset(const std::filesystem::path& csv,
                             std::optional<bool> classification = std::nullopt);

}  // namespace probekit
