#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jointpanel/types.hpp"

namespace jointpanel {

enum class ZeroPolicy { Missing, Offset };
enum class LogScale { Natural, Base10 };

struct ColumnMap {
  std::string group = "group";
  std::string year = "year";
  std::string sector = "sector";
  std::string tonnes = "tonnes";
  // Used when `tonnes` is absent: values already on the model scale, taken as-is.
  std::string log_tonnes = "log_tonnes";
};

struct IngestConfig {
  ZeroPolicy zero_policy = ZeroPolicy::Missing;
  double zero_offset = 1.0;  // c in log(tonnes + c); applied to every value in Offset mode
  LogScale log_scale = LogScale::Natural;
  std::optional<std::pair<int, int>> year_range;
  ColumnMap columns;

  void validate() const;  // throws DataError
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;  // outside year_range
  std::size_t zeros_handled = 0;
  std::size_t missing_values = 0;
  std::vector<std::string> groups_missing_channel;  // groups with no value in some channel
};

nlohmann::json to_json(const IngestReport& report);

struct IngestResult {
  PanelDataset data;
  IngestReport report;
};

// Long-format CSV, one row per (group, year, sector). Sector is matched
// case-insensitively against "industrial" and "artisanal". An empty or NA value
// marks that channel-year missing. Groups are sorted lexicographically and
// t = year - min_year, where min_year is the lower year_range bound if set and
// the smallest retained year otherwise.
// Throws ParseError, DuplicateRecord or EmptyAfterFilter.
IngestResult parse_panel_csv(std::istream& in, const IngestConfig& config);

// As parse_panel_csv; additionally throws DataError naming the path when the
// file cannot be opened.
IngestResult load(const std::filesystem::path& path, const IngestConfig& config);

// Writes `data` in the format parse_panel_csv reads back unchanged: a
// log_tonnes column at full precision, one row per channel and grid point.
void write_panel_csv(std::ostream& os, const PanelDataset& data);
void write_panel_csv(const std::filesystem::path& path, const PanelDataset& data);

// Splits one CSV record. Double quotes delimit fields and "" escapes a quote.
std::vector<std::string> split_csv_record(const std::string& line);

}  // namespace jointpanel
