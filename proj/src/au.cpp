#include "facekey/au.hpp"
#include "facekey/au_frame.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace facekey {

std::string AuId::label() const {
    char buf[8];
    std::snprintf(buf, sizeof buf, "AU%02d", number());
    return buf;
}

void AUFrame::set_intensity(AuId au, float value) {
    if (std::isnan(value)) value = 0.0f;
    intensity_lanes[au.index()] = std::clamp(value, kIntensityMin, kIntensityMax);
}

}  // namespace facekey
