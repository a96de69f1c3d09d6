#pragma once

// Condition-matching kernels. Every rule is lowered to a lane threshold
// vector over the padded AU lanes (unconstrained lanes hold -1, which any
// clamped intensity exceeds), a required-presence bitmask, and a confidence
// floor. Scalar reference implementations define the semantics; AVX2 and
// NEON variants must agree bit-for-bit and are selected at runtime.

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "facekey/au_frame.hpp"

namespace facekey::kernels {

inline constexpr float kUnconstrained = -1.0f;

struct CompiledRule {
    alignas(32) std::array<float, kAuLanes> thresholds;
    std::uint32_t required_presence = 0;
    float min_confidence = 0.0f;
    // Intensity-constrained lanes, for the frame-batched kernel.
    std::array<std::uint8_t, kAuCount> lanes{};
    std::uint8_t lane_count = 0;

    CompiledRule() { thresholds.fill(kUnconstrained); }
};

// Structure-of-arrays frame batch. Columns are padded to a multiple of 8
// with zero intensity, zero confidence.
class FrameColumns {
public:
    FrameColumns() = default;
    explicit FrameColumns(std::span<const AUFrame> frames);

    std::size_t size() const { return size_; }
    std::size_t padded_size() const { return confidence_.size(); }
    const float* intensity(std::size_t lane) const { return intensity_[lane].data(); }
    const float* confidence() const { return confidence_.data(); }
    const std::uint32_t* presence() const { return presence_.data(); }

private:
    std::size_t size_ = 0;
    std::array<std::vector<float>, kAuCount> intensity_;
    std::vector<float> confidence_;
    std::vector<std::uint32_t> presence_;
};

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

// out[r] = 1 iff rules[r] matches frame. out.size() >= rules.size().
using FrameMatchFn = void (*)(const AUFrame& frame, std::span<const CompiledRule> rules,
                              std::span<std::uint8_t> out);
// out[f] = 1 iff rule matches frame f. out.size() >= frames.size().
using BatchMatchFn = void (*)(const FrameColumns& frames, const CompiledRule& rule,
                              std::span<std::uint8_t> out);

namespace scalar {
void match_frame(const AUFrame& frame, std::span<const CompiledRule> rules, std::span<std::uint8_t> out);
void match_batch(const FrameColumns& frames, const CompiledRule& rule, std::span<std::uint8_t> out);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void match_frame(const AUFrame& frame, std::span<const CompiledRule> rules, std::span<std::uint8_t> out);
void match_batch(const FrameColumns& frames, const CompiledRule& rule, std::span<std::uint8_t> out);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
void match_frame(const AUFrame& frame, std::span<const CompiledRule> rules, std::span<std::uint8_t> out);
void match_batch(const FrameColumns& frames, const CompiledRule& rule, std::span<std::uint8_t> out);
}  // namespace neon
#endif

// ISAs compiled in and supported by the running CPU; Scalar always first.
std::vector<Isa> available_isas();
Isa best_isa();

struct KernelTable {
    Isa isa;
    FrameMatchFn match_frame;
    BatchMatchFn match_batch;
};

KernelTable kernels_for(Isa isa);
// Process-wide table, resolved once from best_isa(). FACEKEY_ISA=scalar
// forces the reference path.
const KernelTable& active_kernels();

}  // namespace facekey::kernels
