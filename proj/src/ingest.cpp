#include "jointpanel/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "jointpanel/errors.hpp"

namespace jointpanel {

void IngestConfig::validate() const {
  if (zero_policy == ZeroPolicy::Offset && !(zero_offset > 0.0))
    throw DataError("zero offset must be positive");
  if (year_range && year_range->first > year_range->second)
    throw DataError("year range is empty (min_year > max_year)");
}

nlohmann::json to_json(const IngestReport& report) {
  return {{"rows_read", report.rows_read},
          {"rows_dropped", report.rows_dropped},
          {"zeros_handled", report.zeros_handled},
          {"missing_values", report.missing_values},
          {"groups_missing_channel", report.groups_missing_channel}};
}

std::vector<std::string> split_csv_record(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else if (ch != '\r') {
      fields.back() += ch;
    }
  }
  return fields;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::string fold(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

template <typename T>
std::optional<T> parse_number(const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

struct Cell {
  std::optional<double> value;
};

}  // namespace

IngestResult parse_panel_csv(std::istream& in, const IngestConfig& config) {
  config.validate();
  const ColumnMap& cols = config.columns;
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw ParseError(row, "", "missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const std::vector<std::string> header = split_csv_record(line);
  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (trim(header[i]) == name) return i;
    return std::nullopt;
  };
  auto require = [&](const std::string& name) {
    if (auto i = find(name)) return *i;
    throw ParseError(row, name, "column not found in header");
  };
  const std::size_t group_col = require(cols.group);
  const std::size_t year_col = require(cols.year);
  const std::size_t sector_col = require(cols.sector);
  bool raw_tonnes = true;
  std::size_t value_col = 0;
  if (auto i = find(cols.tonnes)) {
    value_col = *i;
  } else if (auto j = find(cols.log_tonnes)) {
    value_col = *j;
    raw_tonnes = false;
  } else {
    throw ParseError(row, cols.tonnes, "column not found in header (nor '" + cols.log_tonnes + "')");
  }
  const std::string& value_name = raw_tonnes ? cols.tonnes : cols.log_tonnes;

  IngestReport report;
  std::map<std::string, std::map<int, std::array<std::optional<Cell>, 2>>> cells;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty() || line == "\r") continue;
    ++report.rows_read;
    const std::vector<std::string> f = split_csv_record(line);
    auto field = [&](std::size_t i, const std::string& name) {
      if (i >= f.size()) throw ParseError(row, name, "row has only " + std::to_string(f.size()) + " fields");
      return trim(f[i]);
    };

    const std::string group = field(group_col, cols.group);
    if (group.empty()) throw ParseError(row, cols.group, "empty group name");
    const auto year = parse_number<int>(field(year_col, cols.year));
    if (!year) throw ParseError(row, cols.year, "not an integer year");
    const std::string sector = fold(field(sector_col, cols.sector));
    Channel channel;
    if (sector == "industrial") {
      channel = Channel::Industrial;
    } else if (sector == "artisanal") {
      channel = Channel::Artisanal;
    } else {
      throw ParseError(row, cols.sector, "sector '" + sector + "' is neither industrial nor artisanal");
    }

    const std::string text = field(value_col, value_name);
    Cell cell;
    if (!text.empty() && fold(text) != "na") {
      const auto v = parse_number<double>(text);
      if (!v || !std::isfinite(*v)) throw ParseError(row, value_name, "not a number: '" + text + "'");
      if (!raw_tonnes) {
        cell.value = *v;
      } else if (*v < 0.0) {
        throw ParseError(row, value_name, "negative tonnage");
      } else {
        const bool zero = *v == 0.0;
        report.zeros_handled += zero;
        if (config.zero_policy == ZeroPolicy::Offset) {
          cell.value = std::log(*v + config.zero_offset);
        } else if (!zero) {
          cell.value = std::log(*v);
        }
        if (cell.value && config.log_scale == LogScale::Base10) *cell.value /= std::log(10.0);
      }
    }

    if (config.year_range && (*year < config.year_range->first || *year > config.year_range->second)) {
      ++report.rows_dropped;
      continue;
    }
    auto& slot = cells[group][*year][index(channel)];
    if (slot)
      throw DuplicateRecord("duplicate record for (" + group + ", " + std::to_string(*year) + ", " + sector +
                            ") at row " + std::to_string(row));
    slot = cell;
  }
  if (cells.empty()) throw EmptyAfterFilter("no rows left after applying the year range");

  int min_year = config.year_range ? config.year_range->first : cells.begin()->second.begin()->first;
  if (!config.year_range)
    for (const auto& [group, years] : cells) min_year = std::min(min_year, years.begin()->first);

  IngestResult out;
  out.data.t0_label = min_year;
  for (const auto& [group, years] : cells) {
    GroupSeries series{group, {}};
    for (const auto& [year, pair] : years) {
      Observation o{year - min_year, {}};
      for (Channel c : kChannels) {
        if (pair[index(c)] && pair[index(c)]->value) {
          o[c] = pair[index(c)]->value;
        } else {
          ++report.missing_values;
        }
      }
      series.obs.push_back(o);
    }
    for (Channel c : kChannels) {
      const bool any = std::any_of(series.obs.begin(), series.obs.end(), [c](const Observation& o) { return o[c].has_value(); });
      if (!any) {
        report.groups_missing_channel.push_back(group);
        break;
      }
    }
    out.data.groups.push_back(std::move(series));
  }
  out.report = std::move(report);
  return out;
}

IngestResult load(const std::filesystem::path& path, const IngestConfig& config) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");
  return parse_panel_csv(in, config);
}

namespace {

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

void write_panel_csv(std::ostream& os, const PanelDataset& data) {
  os << "group,year,sector,log_tonnes\n";
  char buf[64];
  for (const auto& g : data.groups) {
    const std::string id = quote_if_needed(g.id);
    for (const auto& o : g.obs) {
      for (Channel c : kChannels) {
        os << id << ',' << data.t0_label + o.t << ',' << (c == Channel::Industrial ? "industrial" : "artisanal")
           << ',';
        if (o[c]) {
          std::snprintf(buf, sizeof buf, "%.17g", *o[c]);
          os << buf;
        }
        os << '\n';
      }
    }
  }
}

void write_panel_csv(const std::filesystem::path& path, const PanelDataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_panel_csv(out, data);
}

}  // namespace jointpanel
