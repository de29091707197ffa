#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bands.hpp"
#include "date.hpp"

namespace aqua {

// Surface reflectance across the 10 retained bands, indexed by BandId.
struct Spectrum {
    std::array<double, kBandCount> reflectance{};

    double operator[](BandId b) const { return reflectance[band_index(b)]; }
    double& operator[](BandId b) { return reflectance[band_index(b)]; }
};

struct MatchupRecord {
    std::string station_id;
    Date timestamp;
    double lon = 0.0;
    double lat = 0.0;
    Spectrum spectrum;
    // One optional value per ParameterId; at least one present.
    std::array<std::optional<double>, kParameterCount> targets;

    std::optional<double> target(ParameterId p) const {
        return targets[static_cast<std::size_t>(p)];
    }
};

struct Provenance {
    std::string digest;  // over the canonical serialization
    std::size_t row_count = 0;
};

// Records sorted ascending by (timestamp, station_id).
struct MatchupTable {
    std::vector<MatchupRecord> records;
    Provenance provenance;
};

// How to treat negative reflectance from atmospheric-correction noise.
// Default: clamp small negatives to 0, reject anything below reject_below.
struct IngestPolicy {
    double reject_below = -0.01;
    bool clamp_negatives = true;
};

// Reads the match-up CSV (schema: station_id,date,lon,lat,B1..B12,chla,ss,
// turbidity), validates, sorts and computes provenance.
MatchupTable ingest_matchup_table(const std::filesystem::path& path,
                                  const IngestPolicy& policy = {});

// Parses CSV text directly; `origin` names the source in error messages.
MatchupTable parse_matchup_csv(const std::string& text, const IngestPolicy& policy,
                               const std::string& origin);

// Canonical CSV serialization; re-ingesting it yields a digest-equal table.
std::string serialize_matchup_table(const MatchupTable& table);

// train: year < boundary_year; validation: year >= boundary_year.
// Throws DataError if either side would be empty.
std::pair<MatchupTable, MatchupTable> split_by_year(const MatchupTable& table,
                                                    int boundary_year);

// Rebuilds provenance (digest + row count) from the records.
void finalize_table(MatchupTable& table);

}  // namespace aqua
