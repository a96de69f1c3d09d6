#include "facekey/kernels.hpp"

namespace facekey::kernels {

FrameColumns::FrameColumns(std::span<const AUFrame> frames) : size_(frames.size()) {
    const std::size_t padded = (frames.size() + 7) / 8 * 8;
    for (auto& col : intensity_) col.assign(padded, 0.0f);
    confidence_.assign(padded, 0.0f);
    presence_.assign(padded, 0u);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        for (std::size_t lane = 0; lane < kAuCount; ++lane) intensity_[lane][f] = frames[f].intensity_lanes[lane];
        confidence_[f] = frames[f].confidence;
        presence_[f] = frames[f].presence_bits;
    }
}

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
    }
    return "unknown";
}

namespace scalar {

void match_frame(const AUFrame& frame, std::span<const CompiledRule> rules, std::span<std::uint8_t> out) {
    for (std::size_t r = 0; r < rules.size(); ++r) {
        const CompiledRule& rule = rules[r];
        bool ok = frame.confidence >= rule.min_confidence &&
                  (frame.presence_bits & rule.required_presence) == rule.required_presence;
        for (std::size_t lane = 0; ok && lane < kAuLanes; ++lane)
            ok = frame.intensity_lanes[lane] > rule.thresholds[lane];
        out[r] = ok ? 1 : 0;
    }
}

void match_batch(const FrameColumns& frames, const CompiledRule& rule, std::span<std::uint8_t> out) {
    const float* conf = frames.confidence();
    const std::uint32_t* presence = frames.presence();
    for (std::size_t f = 0; f < frames.size(); ++f) {
        bool ok = conf[f] >= rule.min_confidence && (presence[f] & rule.required_presence) == rule.required_presence;
        for (std::size_t i = 0; ok && i < rule.lane_count; ++i) {
            const auto lane = rule.lanes[i];
            ok = frames.intensity(lane)[f] > rule.thresholds[lane];
        }
        out[f] = ok ? 1 : 0;
    }
}

}  // namespace scalar
}  // namespace facekey::kernels
