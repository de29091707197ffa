#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bands.hpp"
#include "date.hpp"
#include "matchup.hpp"

namespace aqua {

struct FenceResult {
    std::vector<std::size_t> kept;
    std::vector<std::size_t> rejected;
    double lower_fence = 0.0;
    double upper_fence = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double k = 1.5;
};

// Linear-interpolation quantile over a sorted sequence, p in [0, 1].
double quantile_linear(const std::vector<double>& sorted_values, double p);

// Tukey's fences at [Q1 - k*IQR, Q3 + k*IQR], inclusive. Requires at
// least 4 finite values.
FenceResult tukey_fences(const std::vector<double>& values, double k = 1.5);

// MNDWI = (green - swir)/(green + swir); nullopt on zero denominator
// (classified non-water). Water under the strict > 0 cut.
std::optional<double> mndwi(double green, double swir);

inline constexpr double kMndwiWaterThreshold = 0.0;  // water iff mndwi > this

// Synthetic scene: per-band planes in a local planar frame (meters).
struct SceneGrid {
    std::size_t width = 0;
    std::size_t height = 0;
    double cell_size = 0.0;      // meters
    double origin_x = 0.0;       // meters, cell (0,0) lower-left corner
    double origin_y = 0.0;
    Date scene_date;
    // One plane per retained band, row-major height*width.
    std::array<std::vector<float>, kBandCount> bands;
    std::vector<std::uint8_t> land;  // nonzero = land

    double cell_center_x(std::size_t col) const {
        return origin_x + (static_cast<double>(col) + 0.5) * cell_size;
    }
    double cell_center_y(std::size_t row) const {
        return origin_y + (static_cast<double>(row) + 0.5) * cell_size;
    }
};

// .sgrid container: one-line JSON header, '\n', then little-endian f32
// planes per band in retained order, then the land-mask byte plane.
std::string serialize_scene(const SceneGrid& scene);
SceneGrid parse_scene(const std::string& bytes, const std::string& origin);
SceneGrid load_scene(const std::filesystem::path& path);
void save_scene(const SceneGrid& scene, const std::filesystem::path& path);

enum class RejectReason {
    Adjacency,      // nearest land cell closer than the minimum distance
    NoWaterPixels,  // no buffered cell passed the water mask
};

struct PointRejection {
    RejectReason reason;
};

using ExtractResult = std::variant<Spectrum, PointRejection>;

// Buffer-mean spectrum at a point: mean per band over water cells (MNDWI
// > 0, non-land) whose centers fall within buffer_radius. Rejects points
// whose nearest land-cell center is closer than min_land_distance.
// Throws DataError when the point is outside the scene bounds.
ExtractResult extract_point(const SceneGrid& scene, double x, double y, double buffer_radius,
                            double min_land_distance);

struct DatedSample {
    std::size_t id = 0;
    Date date;
};

struct TemporalPair {
    std::size_t sample_id = 0;
    std::size_t scene_id = 0;
    long day_offset = 0;  // scene date - sample date
};

// Pairs each sample with the nearest scene within +-1 day (ties toward
// the earlier scene); each sample matched at most once. Unmatched samples
// are reported through unmatched when provided.
std::vector<TemporalPair> temporal_match(const std::vector<DatedSample>& samples,
                                         const std::vector<DatedSample>& scenes,
                                         std::vector<std::size_t>* unmatched = nullptr);

}  // namespace aqua
