#include "bands.hpp"

namespace aqua {

namespace {
const std::array<std::string, kBandCount> kBandNames = {
    "B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8A", "B11", "B12",
};
}

std::string band_name(BandId b) {
    return kBandNames[band_index(b)];
}

std::optional<BandId> band_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kBandCount; ++i) {
        if (name == kBandNames[i]) {
            return kAllBands[i];
        }
    }
    return std::nullopt;
}

std::string parameter_name(ParameterId p) {
    switch (p) {
        case ParameterId::ChlA: return "chla";
        case ParameterId::SS: return "ss";
        case ParameterId::Turbidity: return "turbidity";
    }
    return "";
}

std::string parameter_units(ParameterId p) {
    switch (p) {
        case ParameterId::ChlA: return "ug/L";
        case ParameterId::SS: return "mg/L";
        case ParameterId::Turbidity: return "NTU";
    }
    return "";
}

std::optional<ParameterId> parameter_from_name(std::string_view name) {
    if (name == "chla") return ParameterId::ChlA;
    if (name == "ss") return ParameterId::SS;
    if (name == "turbidity") return ParameterId::Turbidity;
    return std::nullopt;
}

}  // namespace aqua
