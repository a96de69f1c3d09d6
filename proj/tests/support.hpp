#pragma once

#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

#include "facekey/au_frame.hpp"

namespace facekey::test {

inline AUFrame make_frame(std::int64_t index, std::initializer_list<std::pair<int, float>> intensities,
                          float confidence = 0.99f, std::initializer_list<int> present = {}) {
    AUFrame f;
    f.frame_index = index;
    f.timestamp_ms = index * 33;
    f.confidence = confidence;
    for (const auto& [au, v] : intensities) f.set_intensity(*AuId::from_number(au), v);
    for (const int au : present) f.set_present(*AuId::from_number(au), true);
    return f;
}

inline AUFrame random_frame(std::mt19937_64& rng, std::int64_t index) {
    std::uniform_real_distribution<float> intensity(0.0f, 5.0f);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    AUFrame f;
    f.frame_index = index;
    f.timestamp_ms = index * 33;
    f.confidence = unit(rng);
    for (std::size_t i = 0; i < kAuCount; ++i) {
        const auto au = AuId::from_index(i);
        // Mix exact zeros and values across the scale.
        f.set_intensity(au, unit(rng) < 0.3f ? 0.0f : intensity(rng));
        f.set_present(au, unit(rng) < 0.5f);
    }
    return f;
}

}  // namespace facekey::test
