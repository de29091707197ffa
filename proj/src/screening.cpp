#include "screening.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include <json.hpp>

#include "errors.hpp"
#include "util.hpp"

namespace aqua {

double quantile_linear(const std::vector<double>& sorted_values, double p) {
    const std::size_t n = sorted_values.size();
    if (n == 0) {
        throw DataError("quantile of empty sequence");
    }
    double h = p * static_cast<double>(n - 1);
    auto lo = static_cast<std::size_t>(std::floor(h));
    auto hi = static_cast<std::size_t>(std::ceil(h));
    double frac = h - static_cast<double>(lo);
    return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

FenceResult tukey_fences(const std::vector<double>& values, double k) {
    if (values.size() < 4) {
        throw DataError("tukey_fences: need at least 4 values, got " +
                        std::to_string(values.size()));
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw DataError("tukey_fences: non-finite input");
        }
    }
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());

    FenceResult res;
    res.k = k;
    res.q1 = quantile_linear(sorted, 0.25);
    res.q3 = quantile_linear(sorted, 0.75);
    double iqr = res.q3 - res.q1;
    res.lower_fence = res.q1 - k * iqr;
    res.upper_fence = res.q3 + k * iqr;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] >= res.lower_fence && values[i] <= res.upper_fence) {
            res.kept.push_back(i);
        } else {
            res.rejected.push_back(i);
        }
    }
    return res;
}

std::optional<double> mndwi(double green, double swir) {
    double denom = green + swir;
    if (denom == 0.0) return std::nullopt;
    return (green - swir) / denom;
}

std::string serialize_scene(const SceneGrid& scene) {
    nlohmann::ordered_json header;
    header["format"] = "sgrid-v1";
    header["width"] = scene.width;
    header["height"] = scene.height;
    header["cell_size_m"] = scene.cell_size;
    header["origin_m"] = {scene.origin_x, scene.origin_y};
    header["scene_date"] = scene.scene_date.iso();
    std::vector<std::string> band_names;
    for (BandId b : kAllBands) band_names.push_back(band_name(b));
    header["bands"] = band_names;

    std::string out = header.dump();
    out += '\n';
    const std::size_t plane = scene.width * scene.height;
    for (const auto& bandplane : scene.bands) {
        if (bandplane.size() != plane) {
            throw DataError("serialize_scene: band plane size mismatch");
        }
        // Host is little-endian; planes are stored verbatim.
        const char* raw = reinterpret_cast<const char*>(bandplane.data());
        out.append(raw, plane * sizeof(float));
    }
    if (scene.land.size() != plane) {
        throw DataError("serialize_scene: land mask size mismatch");
    }
    out.append(reinterpret_cast<const char*>(scene.land.data()), plane);
    return out;
}

SceneGrid parse_scene(const std::string& bytes, const std::string& origin) {
    auto nl = bytes.find('\n');
    if (nl == std::string::npos) {
        throw DataError(origin + ": missing sgrid header line");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(0, nl));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(origin + ": bad sgrid header: " + e.what());
    }
    if (header.value("format", "") != "sgrid-v1") {
        throw DataError(origin + ": unsupported sgrid format");
    }

    SceneGrid scene;
    scene.width = header.at("width").get<std::size_t>();
    scene.height = header.at("height").get<std::size_t>();
    scene.cell_size = header.at("cell_size_m").get<double>();
    scene.origin_x = header.at("origin_m").at(0).get<double>();
    scene.origin_y = header.at("origin_m").at(1).get<double>();
    scene.scene_date = Date::parse(header.at("scene_date").get<std::string>());
    if (scene.cell_size <= 0.0) {
        throw DataError(origin + ": cell size must be positive");
    }

    const std::size_t plane = scene.width * scene.height;
    std::size_t expected = nl + 1 + plane * sizeof(float) * kBandCount + plane;
    if (bytes.size() != expected) {
        throw DataError(origin + ": sgrid payload size mismatch");
    }
    const char* p = bytes.data() + nl + 1;
    for (auto& bandplane : scene.bands) {
        bandplane.resize(plane);
        std::memcpy(bandplane.data(), p, plane * sizeof(float));
        p += plane * sizeof(float);
    }
    scene.land.resize(plane);
    std::memcpy(scene.land.data(), p, plane);
    return scene;
}

SceneGrid load_scene(const std::filesystem::path& path) {
    return parse_scene(read_file(path), path.string());
}

void save_scene(const SceneGrid& scene, const std::filesystem::path& path) {
    atomic_write_file(path, serialize_scene(scene));
}

ExtractResult extract_point(const SceneGrid& scene, double x, double y, double buffer_radius,
                            double min_land_distance) {
    double max_x = scene.origin_x + static_cast<double>(scene.width) * scene.cell_size;
    double max_y = scene.origin_y + static_cast<double>(scene.height) * scene.cell_size;
    if (x < scene.origin_x || x > max_x || y < scene.origin_y || y > max_y) {
        throw DataError("extract_point: point outside scene bounds");
    }

    double nearest_land_sq = std::numeric_limits<double>::infinity();
    for (std::size_t row = 0; row < scene.height; ++row) {
        for (std::size_t col = 0; col < scene.width; ++col) {
            if (!scene.land[row * scene.width + col]) continue;
            double dx = scene.cell_center_x(col) - x;
            double dy = scene.cell_center_y(row) - y;
            nearest_land_sq = std::min(nearest_land_sq, dx * dx + dy * dy);
        }
    }
    if (nearest_land_sq < min_land_distance * min_land_distance) {
        return PointRejection{RejectReason::Adjacency};
    }

    Spectrum sum;
    std::size_t count = 0;
    const double radius_sq = buffer_radius * buffer_radius;
    for (std::size_t row = 0; row < scene.height; ++row) {
        for (std::size_t col = 0; col < scene.width; ++col) {
            std::size_t idx = row * scene.width + col;
            if (scene.land[idx]) continue;
            double dx = scene.cell_center_x(col) - x;
            double dy = scene.cell_center_y(row) - y;
            if (dx * dx + dy * dy > radius_sq) continue;
            double green = scene.bands[band_index(BandId::B3)][idx];
            double swir = scene.bands[band_index(BandId::B11)][idx];
            auto w = mndwi(green, swir);
            if (!w || *w <= kMndwiWaterThreshold) continue;
            for (BandId b : kAllBands) {
                sum[b] += scene.bands[band_index(b)][idx];
            }
            ++count;
        }
    }
    if (count == 0) {
        return PointRejection{RejectReason::NoWaterPixels};
    }
    for (BandId b : kAllBands) {
        sum[b] /= static_cast<double>(count);
    }
    return sum;
}

std::vector<TemporalPair> temporal_match(const std::vector<DatedSample>& samples,
                                         const std::vector<DatedSample>& scenes,
                                         std::vector<std::size_t>* unmatched) {
    std::vector<TemporalPair> pairs;
    for (const auto& sample : samples) {
        bool found = false;
        TemporalPair best{};
        long best_abs = 2;
        Date best_date{};
        for (const auto& scene : scenes) {
            long offset = days_between(sample.date, scene.date);
            long abs_off = std::labs(offset);
            if (abs_off > 1) continue;
            // Nearest date wins; ties broken toward the earlier scene.
            if (!found || abs_off < best_abs ||
                (abs_off == best_abs && scene.date < best_date)) {
                found = true;
                best = {sample.id, scene.id, offset};
                best_abs = abs_off;
                best_date = scene.date;
            }
        }
        if (found) {
            pairs.push_back(best);
        } else if (unmatched) {
            unmatched->push_back(sample.id);
        }
    }
    return pairs;
}

}  // namespace aqua
