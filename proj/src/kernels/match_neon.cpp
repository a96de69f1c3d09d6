#if defined(__aarch64__)

#include <arm_neon.h>

#include "facekey/kernels.hpp"

namespace facekey::kernels::neon {

static_assert(kAuLanes % 4 == 0);

void match_frame(const AUFrame& frame, std::span<const CompiledRule> rules, std::span<std::uint8_t> out) {
    const float* v = frame.intensity_lanes.data();
    for (std::size_t r = 0; r < rules.size(); ++r) {
        const CompiledRule& rule = rules[r];
        const float* t = rule.thresholds.data();
        uint32x4_t m = vcgtq_f32(vld1q_f32(v), vld1q_f32(t));
        for (std::size_t lane = 4; lane < kAuLanes; lane += 4)
            m = vandq_u32(m, vcgtq_f32(vld1q_f32(v + lane), vld1q_f32(t + lane)));
        const bool lanes_ok = vminvq_u32(m) == 0xFFFFFFFFu;
        out[r] = (lanes_ok && frame.confidence >= rule.min_confidence &&
                  (frame.presence_bits & rule.required_presence) == rule.required_presence)
                     ? 1
                     : 0;
    }
}

void match_batch(const FrameColumns& frames, const CompiledRule& rule, std::span<std::uint8_t> out) {
    const std::size_t n = frames.size();
    const float* conf = frames.confidence();
    const std::uint32_t* presence = frames.presence();
    const float32x4_t min_conf = vdupq_n_f32(rule.min_confidence);
    const uint32x4_t required = vdupq_n_u32(rule.required_presence);

    std::size_t f = 0;
    for (; f + 4 <= n; f += 4) {
        uint32x4_t m = vcgeq_f32(vld1q_f32(conf + f), min_conf);
        m = vandq_u32(m, vceqq_u32(vandq_u32(vld1q_u32(presence + f), required), required));
        for (std::size_t i = 0; i < rule.lane_count; ++i) {
            const auto lane = rule.lanes[i];
            m = vandq_u32(m, vcgtq_f32(vld1q_f32(frames.intensity(lane) + f), vdupq_n_f32(rule.thresholds[lane])));
        }
        out[f + 0] = vgetq_lane_u32(m, 0) ? 1 : 0;
        out[f + 1] = vgetq_lane_u32(m, 1) ? 1 : 0;
        out[f + 2] = vgetq_lane_u32(m, 2) ? 1 : 0;
        out[f + 3] = vgetq_lane_u32(m, 3) ? 1 : 0;
    }
    for (; f < n; ++f) {
        bool ok = conf[f] >= rule.min_confidence && (presence[f] & rule.required_presence) == rule.required_presence;
        for (std::size_t i = 0; ok && i < rule.lane_count; ++i) {
            const auto lane = rule.lanes[i];
            ok = frames.intensity(lane)[f] > rule.thresholds[lane];
        }
        out[f] = ok ? 1 : 0;
    }
}

}  // namespace facekey::kernels::neon

#endif
