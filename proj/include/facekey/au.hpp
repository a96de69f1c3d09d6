#pragma once

// Fixed Action Unit id set reported by the face tracker, and the lane layout
// shared by AUFrame storage and the match kernels.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

namespace facekey {

inline constexpr std::size_t kAuCount = 18;
// Lane count padded to a multiple of 8 floats (three AVX registers).
inline constexpr std::size_t kAuLanes = 24;

inline constexpr std::array<int, kAuCount> kAuNumbers = {
    1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 28, 45};

inline constexpr float kIntensityMin = 0.0f;
inline constexpr float kIntensityMax = 5.0f;

class AuId {
public:
    static constexpr std::optional<AuId> from_number(int number) {
        for (std::size_t i = 0; i < kAuCount; ++i)
            if (kAuNumbers[i] == number) return AuId(static_cast<std::uint8_t>(i));
        return std::nullopt;
    }
    static constexpr AuId from_index(std::size_t index) { return AuId(static_cast<std::uint8_t>(index)); }

    constexpr int number() const { return kAuNumbers[index_]; }
    constexpr std::size_t index() const { return index_; }

    // "AU06" style two-digit label used by tracker column names.
    std::string label() const;

    friend constexpr bool operator==(AuId, AuId) = default;
    friend constexpr auto operator<=>(AuId a, AuId b) { return a.index_ <=> b.index_; }

private:
    constexpr explicit AuId(std::uint8_t index) : index_(index) {}
    std::uint8_t index_;
};

// AU45 (blink) cannot be used as a rule condition.
inline constexpr bool is_condition_forbidden(int au_number) { return au_number == 45; }
// AUs that were found redundant with others; usable but flagged.
inline constexpr bool is_condition_discouraged(int au_number) {
    return au_number == 14 || au_number == 17 || au_number == 20;
}

}  // namespace facekey
