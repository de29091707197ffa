#include "matchup.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "errors.hpp"
#include "util.hpp"

namespace aqua {

namespace {

const std::vector<std::string> kColumns = {
    "station_id", "date", "lon", "lat", "B1",  "B2", "B3",        "B4", "B5",
    "B6",         "B7",   "B8A", "B11", "B12", "chla", "ss", "turbidity",
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

double parse_double(const std::string& cell, const std::string& what, std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw DataError("line " + std::to_string(line_no) + ": unparseable " + what + " '" +
                        cell + "'");
    }
    return v;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

void finalize_table(MatchupTable& table) {
    table.provenance.row_count = table.records.size();
    table.provenance.digest.clear();
    table.provenance.digest = hex64(fnv1a64(serialize_matchup_table(table)));
}

MatchupTable parse_matchup_csv(const std::string& text, const IngestPolicy& policy,
                               const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(origin + ": empty file, header row required");
    }

    auto header = split_csv_line(line);
    std::map<std::string, std::size_t> col_index;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (col_index.count(header[i])) {
            throw DataError(origin + ": duplicate column '" + header[i] + "'");
        }
        if (std::find(kColumns.begin(), kColumns.end(), header[i]) == kColumns.end()) {
            throw DataError(origin + ": unknown column '" + header[i] + "'");
        }
        col_index[header[i]] = i;
    }
    for (const auto& name : kColumns) {
        if (!col_index.count(name)) {
            throw DataError(origin + ": missing column '" + name + "'");
        }
    }

    MatchupTable table;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError(origin + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        }

        MatchupRecord rec;
        rec.station_id = cells[col_index["station_id"]];
        rec.timestamp = Date::parse(cells[col_index["date"]]);
        rec.lon = parse_double(cells[col_index["lon"]], "lon", line_no);
        rec.lat = parse_double(cells[col_index["lat"]], "lat", line_no);

        for (BandId b : kAllBands) {
            double v = parse_double(cells[col_index[band_name(b)]], band_name(b), line_no);
            if (!std::isfinite(v)) {
                throw DataError(origin + ": line " + std::to_string(line_no) +
                                ": non-finite reflectance in " + band_name(b));
            }
            if (v < policy.reject_below) {
                throw DataError(origin + ": line " + std::to_string(line_no) + ": reflectance " +
                                format_double(v) + " in " + band_name(b) + " below policy floor");
            }
            if (v < 0.0 && policy.clamp_negatives) {
                v = 0.0;
            }
            rec.spectrum[b] = v;
        }

        bool any_target = false;
        const std::array<std::string, kParameterCount> target_cols = {"chla", "ss", "turbidity"};
        for (std::size_t p = 0; p < kParameterCount; ++p) {
            const std::string& cell = cells[col_index[target_cols[p]]];
            if (cell.empty()) continue;
            double v = parse_double(cell, target_cols[p], line_no);
            if (!std::isfinite(v)) {
                throw DataError(origin + ": line " + std::to_string(line_no) +
                                ": non-finite target " + target_cols[p]);
            }
            rec.targets[p] = v;
            any_target = true;
        }
        if (!any_target) {
            throw DataError(origin + ": line " + std::to_string(line_no) +
                            ": no target value present");
        }
        table.records.push_back(std::move(rec));
    }

    std::stable_sort(table.records.begin(), table.records.end(),
                     [](const MatchupRecord& a, const MatchupRecord& b) {
                         if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                         return a.station_id < b.station_id;
                     });
    finalize_table(table);
    return table;
}

MatchupTable ingest_matchup_table(const std::filesystem::path& path, const IngestPolicy& policy) {
    return parse_matchup_csv(read_file(path), policy, path.string());
}

std::string serialize_matchup_table(const MatchupTable& table) {
    std::string out;
    for (std::size_t i = 0; i < kColumns.size(); ++i) {
        if (i) out += ',';
        out += kColumns[i];
    }
    out += '\n';
    for (const auto& rec : table.records) {
        out += rec.station_id;
        out += ',';
        out += rec.timestamp.iso();
        out += ',';
        out += format_double(rec.lon);
        out += ',';
        out += format_double(rec.lat);
        for (BandId b : kAllBands) {
            out += ',';
            out += format_double(rec.spectrum[b]);
        }
        for (std::size_t p = 0; p < kParameterCount; ++p) {
            out += ',';
            if (rec.targets[p]) out += format_double(*rec.targets[p]);
        }
        out += '\n';
    }
    return out;
}

std::pair<MatchupTable, MatchupTable> split_by_year(const MatchupTable& table,
                                                    int boundary_year) {
    MatchupTable train, validation;
    for (const auto& rec : table.records) {
        if (rec.timestamp.year < boundary_year) {
            train.records.push_back(rec);
        } else {
            validation.records.push_back(rec);
        }
    }
    if (train.records.empty()) {
        throw DataError("split_by_year: empty train partition (no records before " +
                        std::to_string(boundary_year) + ")");
    }
    if (validation.records.empty()) {
        throw DataError("split_by_year: empty validation partition (no records in or after " +
                        std::to_string(boundary_year) + ")");
    }
    finalize_table(train);
    finalize_table(validation);
    return {std::move(train), std::move(validation)};
}

}  // namespace aqua
