#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bands.hpp"
#include "matchup.hpp"

namespace aqua {

// Normalized two-band ratio (R_i - R_j)/(R_i + R_j). nullopt when the
// denominator is zero; callers substitute 0 and count the event.
std::optional<double> norm_ratio(double r_i, double r_j);

// Three-band ratio [1/R_i - 1/R_j] * R_k. nullopt when R_i or R_j is zero.
std::optional<double> three_band(double r_i, double r_j, double r_k);

// Deviation of R_j above the chord from (lambda_i, R_i) to (lambda_k, R_k).
// Throws ConfigError on degenerate wavelengths (lambda_i >= lambda_j or
// lambda_j >= lambda_k).
double line_height(double r_i, double r_j, double r_k, double lambda_i, double lambda_j,
                   double lambda_k);

// One candidate predictor. Triples for ThreeBand/LineHeight must be
// consecutive in the retained-band ordering.
struct FeatureExpr {
    enum class Kind { Band, Power, NormRatio, ThreeBand, LineHeight };

    Kind kind = Kind::Band;
    BandId a = BandId::B1;
    BandId b = BandId::B1;
    BandId c = BandId::B1;
    int exponent = 1;  // 2 or 3 for Power

    bool operator==(const FeatureExpr&) const = default;

    std::string name() const;

    // Value on one spectrum. Zero-denominator cases yield 0 and set
    // *undefined (never NaN).
    double eval(const Spectrum& s, bool* undefined = nullptr) const;
};

// Grammar: Bn | (Bn)^2 | (Bn)^3 | NR(Bi,Bj) | TB(Bi,Bj,Bk) | LH(Bi,Bj,Bk).
// Throws DataError on unknown/excluded band tokens and non-consecutive
// TB/LH triples.
FeatureExpr parse_feature(const std::string& name);

// Full candidate space in deterministic order: 10 bands, 10 squares,
// 10 cubes, 90 ordered NR pairs, 8 TB triples, 8 LH triples (136 total).
std::vector<FeatureExpr> enumerate_candidates();

// Parses a list of names; exact duplicates are dropped (Table-style lists
// may repeat an entry) and counted in duplicates_dropped.
std::vector<FeatureExpr> parse_feature_list(const std::vector<std::string>& names,
                                            std::size_t* duplicates_dropped = nullptr);

struct FeatureMatrix {
    std::vector<std::string> names;     // canonical, one per column
    std::vector<double> values;         // row-major, rows * cols
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::string> stations;  // per row
    std::vector<Date> dates;            // per row

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::vector<double> column(std::size_t c) const;
};

struct FeatureEvalLog {
    std::size_t undefined_substitutions = 0;
};

// Evaluates every expression on every record; the result is NaN-free by
// construction (undefined values become 0 and are counted in the log).
FeatureMatrix evaluate_features(const MatchupTable& table, const std::vector<FeatureExpr>& exprs,
                                FeatureEvalLog* log = nullptr);

// Export format: station_id,date,<canonical names...>.
std::string feature_matrix_csv(const FeatureMatrix& m);

}  // namespace aqua
