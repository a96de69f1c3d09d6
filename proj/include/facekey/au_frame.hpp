#pragma once

#include <array>
#include <cstdint>

#include "facekey/au.hpp"

namespace facekey {

// One tracker sample. Intensities live in a zero-padded lane array so the
// match kernels can load them directly; padding lanes are always 0.
struct AUFrame {
    std::int64_t frame_index = 0;
    std::int64_t timestamp_ms = 0;
    float confidence = 0.0f;
    std::uint32_t presence_bits = 0;  // bit i = presence of AU at lane i
    alignas(32) std::array<float, kAuLanes> intensity_lanes{};

    bool present(AuId au) const { return (presence_bits >> au.index()) & 1u; }
    float intensity(AuId au) const { return intensity_lanes[au.index()]; }

    void set_present(AuId au, bool on) {
        const auto bit = std::uint32_t{1} << au.index();
        presence_bits = on ? (presence_bits | bit) : (presence_bits & ~bit);
    }
    // Clamps into [0, 5].
    void set_intensity(AuId au, float value);

    friend bool operator==(const AUFrame&, const AUFrame&) = default;
};

}  // namespace facekey
