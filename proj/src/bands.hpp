#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace aqua {

// The 10 retained Sentinel-2 bands. B8 (NIR), B9 (water vapor) and B10
// (cirrus) carry no usable water-surface signal and are unrepresentable
// here. Enumerator order defines "consecutive" semantics for the
// three-band features.
enum class BandId : int {
    B1 = 0,
    B2,
    B3,
    B4,
    B5,
    B6,
    B7,
    B8A,
    B11,
    B12,
};

inline constexpr std::size_t kBandCount = 10;

inline constexpr std::array<BandId, kBandCount> kAllBands = {
    BandId::B1, BandId::B2,  BandId::B3,  BandId::B4, BandId::B5,
    BandId::B6, BandId::B7,  BandId::B8A, BandId::B11, BandId::B12,
};

// Nominal central wavelengths, nanometers.
inline constexpr std::array<double, kBandCount> kCentralWavelengthNm = {
    443, 490, 560, 665, 705, 740, 783, 865, 1610, 2190,
};

inline constexpr double central_wavelength_nm(BandId b) {
    return kCentralWavelengthNm[static_cast<std::size_t>(b)];
}

inline constexpr std::size_t band_index(BandId b) {
    return static_cast<std::size_t>(b);
}

std::string band_name(BandId b);

// Recognizes the 10 retained names only; "B8", "B9", "B10" and anything
// else return nullopt.
std::optional<BandId> band_from_name(std::string_view name);

// Water quality target parameters.
enum class ParameterId : int {
    ChlA = 0,
    SS,
    Turbidity,
};

inline constexpr std::size_t kParameterCount = 3;

std::string parameter_name(ParameterId p);   // "chla", "ss", "turbidity"
std::string parameter_units(ParameterId p);  // "ug/L", "mg/L", "NTU"
std::optional<ParameterId> parameter_from_name(std::string_view name);

}  // namespace aqua
