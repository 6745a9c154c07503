#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "wnsf/error.hpp"
#include "wnsf/io.hpp"

namespace wnsf::io {

std::vector<std::string> split_csv_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

double parse_double(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError("cannot parse number '" + std::string(text) + "'");
    }
    return value;
}

long long parse_int(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError("cannot parse integer '" + std::string(text) + "'");
    }
    return value;
}

void write_dataset_csv(std::ostream& os, const TimeSeriesDataset& data) {
    data.validate();
    os << "t,u,y";
    if (data.r) os << ",r";
    if (data.e) os << ",e";
    os << '\n';
    for (std::size_t t = 0; t < data.size(); ++t) {
        os << (t + 1) << ',' << format_number(data.u[t]) << ',' << format_number(data.y[t]);
        if (data.r) os << ',' << format_number((*data.r)[t]);
        if (data.e) os << ',' << format_number((*data.e)[t]);
        os << '\n';
    }
}

TimeSeriesDataset read_dataset_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("dataset CSV is empty");
    const auto header = split_csv_line(line);
    int col_u = -1, col_y = -1, col_r = -1, col_e = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto& h = header[i];
        if (h == "u") col_u = static_cast<int>(i);
        else if (h == "y") col_y = static_cast<int>(i);
        else if (h == "r") col_r = static_cast<int>(i);
        else if (h == "e") col_e = static_cast<int>(i);
        else if (h != "t") throw ConfigError("unknown dataset column '" + h + "'");
    }
    if (col_u < 0 || col_y < 0) throw ConfigError("dataset CSV needs 'u' and 'y' columns");

    TimeSeriesDataset data;
    if (col_r >= 0) data.r.emplace();
    if (col_e >= 0) data.e.emplace();
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw ConfigError("dataset CSV line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                              " fields, expected " + std::to_string(header.size()));
        }
        data.u.push_back(parse_double(fields[static_cast<std::size_t>(col_u)]));
        data.y.push_back(parse_double(fields[static_cast<std::size_t>(col_y)]));
        if (col_r >= 0) data.r->push_back(parse_double(fields[static_cast<std::size_t>(col_r)]));
        if (col_e >= 0) data.e->push_back(parse_double(fields[static_cast<std::size_t>(col_e)]));
    }
    data.validate();
    return data;
}

void write_dataset_csv(const std::string& path, const TimeSeriesDataset& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    write_dataset_csv(os, data);
    if (!os) throw Error("write to '" + path + "' failed");
}

TimeSeriesDataset read_dataset_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open dataset '" + path + "'");
    return read_dataset_csv(is);
}

}  // namespace wnsf::io
