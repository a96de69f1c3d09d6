#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "facekey/kernels.hpp"

#define FACEKEY_AVX2 __attribute__((target("avx2")))

namespace facekey::kernels::avx2 {

static_assert(kAuLanes == 24, "frame kernel assumes three 8-float registers");

FACEKEY_AVX2 void match_frame(const AUFrame& frame, std::span<const CompiledRule> rules,
                              std::span<std::uint8_t> out) {
    const float* v = frame.intensity_lanes.data();
    const __m256 v0 = _mm256_load_ps(v);
    const __m256 v1 = _mm256_load_ps(v + 8);
    const __m256 v2 = _mm256_load_ps(v + 16);
    for (std::size_t r = 0; r < rules.size(); ++r) {
        const CompiledRule& rule = rules[r];
        const float* t = rule.thresholds.data();
        // _CMP_GT_OQ: strict, false on NaN.
        __m256 m = _mm256_cmp_ps(v0, _mm256_load_ps(t), _CMP_GT_OQ);
        m = _mm256_and_ps(m, _mm256_cmp_ps(v1, _mm256_load_ps(t + 8), _CMP_GT_OQ));
        m = _mm256_and_ps(m, _mm256_cmp_ps(v2, _mm256_load_ps(t + 16), _CMP_GT_OQ));
        const bool lanes_ok = _mm256_movemask_ps(m) == 0xFF;
        out[r] = (lanes_ok && frame.confidence >= rule.min_confidence &&
                  (frame.presence_bits & rule.required_presence) == rule.required_presence)
                     ? 1
                     : 0;
    }
}

FACEKEY_AVX2 void match_batch(const FrameColumns& frames, const CompiledRule& rule, std::span<std::uint8_t> out) {
    const std::size_t n = frames.size();
    const float* conf = frames.confidence();
    const std::uint32_t* presence = frames.presence();
    const __m256 min_conf = _mm256_set1_ps(rule.min_confidence);
    const __m256i required = _mm256_set1_epi32(static_cast<int>(rule.required_presence));

    std::size_t f = 0;
    for (; f + 8 <= n; f += 8) {
        __m256 m = _mm256_cmp_ps(_mm256_loadu_ps(conf + f), min_conf, _CMP_GE_OQ);
        const __m256i p = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(presence + f));
        const __m256i has = _mm256_cmpeq_epi32(_mm256_and_si256(p, required), required);
        m = _mm256_and_ps(m, _mm256_castsi256_ps(has));
        for (std::size_t i = 0; i < rule.lane_count; ++i) {
            const auto lane = rule.lanes[i];
            const __m256 x = _mm256_loadu_ps(frames.intensity(lane) + f);
            m = _mm256_and_ps(m, _mm256_cmp_ps(x, _mm256_set1_ps(rule.thresholds[lane]), _CMP_GT_OQ));
        }
        const int bits = _mm256_movemask_ps(m);
        for (int k = 0; k < 8; ++k) out[f + k] = static_cast<std::uint8_t>((bits >> k) & 1);
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

}  // namespace facekey::kernels::avx2

#endif
