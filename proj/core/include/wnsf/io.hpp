#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "wnsf/lti.hpp"

namespace wnsf::io {

/// Split one CSV line on commas (no quoting; none of our formats need it).
std::vector<std::string> split_csv_line(std::string_view line);

/// Parse a full-precision double; accepts "nan"/"inf". Throws ConfigError.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

/// Dataset CSV: header `t,u,y,r,e` with absent columns omitted; t starts at 1.
void write_dataset_csv(std::ostream& os, const TimeSeriesDataset& data);
TimeSeriesDataset read_dataset_csv(std::istream& is);

void write_dataset_csv(const std::string& path, const TimeSeriesDataset& data);
TimeSeriesDataset read_dataset_csv(const std::string& path);

}  // namespace wnsf::io
