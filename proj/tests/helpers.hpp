#pragma once

// Shared synthetic-data builders for the test suites.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "bands.hpp"
#include "matchup.hpp"

namespace testutil {

// Small deterministic generator, independent of the library RNG.
struct XorShift {
    std::uint64_t state;
    explicit XorShift(std::uint64_t seed) : state(seed ? seed : 1) {}
    std::uint64_t next() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        return state;
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

inline aqua::Spectrum random_spectrum(XorShift& rng, double lo = 0.001, double hi = 0.2) {
    aqua::Spectrum s;
    for (aqua::BandId b : aqua::kAllBands) {
        s[b] = rng.uniform(lo, hi);
    }
    return s;
}

// Monthly records for `stations` stations spanning [first_year, last_year],
// with the chosen target computed from each spectrum.
inline std::string synthetic_matchup_csv(
    int stations, int first_year, int last_year, std::uint64_t seed,
    const std::function<double(const aqua::Spectrum&, XorShift&)>& target) {
    XorShift rng(seed);
    std::string csv =
        "station_id,date,lon,lat,B1,B2,B3,B4,B5,B6,B7,B8A,B11,B12,chla,ss,turbidity\n";
    char buf[64];
    for (int st = 0; st < stations; ++st) {
        for (int year = first_year; year <= last_year; ++year) {
            for (int month = 1; month <= 12; ++month) {
                aqua::Spectrum s = random_spectrum(rng);
                double y = target(s, rng);
                std::snprintf(buf, sizeof(buf), "S%02d,%04d-%02d-15,114.1,22.3", st, year, month);
                csv += buf;
                for (aqua::BandId b : aqua::kAllBands) {
                    std::snprintf(buf, sizeof(buf), ",%.10f", s[b]);
                    csv += buf;
                }
                std::snprintf(buf, sizeof(buf), ",%.10f,,\n", y);
                csv += buf;
            }
        }
    }
    return csv;
}

}  // namespace testutil
