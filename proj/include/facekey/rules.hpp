#pragma once

// Expression rules: conjunctions of AU conditions, debounced over
// consecutive frames, with at most one winning trigger per frame.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "facekey/au_frame.hpp"
#include "facekey/kernels.hpp"

namespace facekey {

struct Presence {
    friend bool operator==(const Presence&, const Presence&) = default;
};
struct IntensityAbove {
    float threshold = 0.0f;  // strictly inside (0, 5)
    friend bool operator==(const IntensityAbove&, const IntensityAbove&) = default;
};
using ConditionMode = std::variant<Presence, IntensityAbove>;

struct AUCondition {
    AuId au = AuId::from_index(0);
    ConditionMode mode = Presence{};
    friend bool operator==(const AUCondition&, const AUCondition&) = default;
};

struct ReleaseRequired {
    friend bool operator==(const ReleaseRequired&, const ReleaseRequired&) = default;
};
struct Refractory {
    int frames = 0;
    friend bool operator==(const Refractory&, const Refractory&) = default;
};
using RearmPolicy = std::variant<ReleaseRequired, Refractory>;

inline constexpr int kDefaultFrameThreshold = 5;
inline constexpr float kDefaultMinConfidence = 0.75f;

struct ExpressionRule {
    std::string rule_id;
    std::string display_name;
    std::vector<AUCondition> conditions;
    int frame_threshold = kDefaultFrameThreshold;
    RearmPolicy rearm = ReleaseRequired{};
    int priority = 0;
    float min_confidence = kDefaultMinConfidence;

    friend bool operator==(const ExpressionRule&, const ExpressionRule&) = default;
};

struct DebounceState {
    int consecutive_count = 0;
    bool armed = true;
    int refractory_remaining = 0;
    friend bool operator==(const DebounceState&, const DebounceState&) = default;
};

// Presence -> presence flag; IntensityAbove(t) -> intensity > t (strict).
bool eval_condition(const AUCondition& cond, const AUFrame& frame);
// Confidence gate plus conjunction of all conditions.
bool eval_rule(const ExpressionRule& rule, const AUFrame& frame);

struct DebounceStep {
    DebounceState state;
    bool fire = false;
};

DebounceStep debounce_step(DebounceState state, bool matched, const ExpressionRule& rule);

// Highest priority wins; ties go to the lexicographically smallest rule_id.
std::optional<std::size_t> arbitrate(std::span<const std::size_t> fired, std::span<const ExpressionRule> rules);

kernels::CompiledRule compile_rule(const ExpressionRule& rule);

struct RuleTelemetry {
    bool active = false;
    bool matched = false;
    int consecutive_count = 0;
};

// Incremental rule evaluator over a frame stream. Only rules flagged active
// (those bound in the current mode) are evaluated; inactive rules are held
// in the reset state.
class RuleEngine {
public:
    explicit RuleEngine(std::vector<ExpressionRule> rules);

    // Returns the index of the winning rule, if any fired this frame.
    std::optional<std::size_t> step(const AUFrame& frame);

    void set_active(std::vector<bool> active);
    void reset();

    const std::vector<ExpressionRule>& rules() const { return rules_; }
    const std::vector<DebounceState>& states() const { return states_; }
    std::vector<RuleTelemetry> telemetry() const;

private:
    std::vector<ExpressionRule> rules_;
    std::vector<kernels::CompiledRule> compiled_;
    std::vector<DebounceState> states_;
    std::vector<bool> active_;
    std::vector<std::uint8_t> matches_;
    std::vector<std::size_t> fired_;
    kernels::FrameMatchFn match_frame_;
};

}  // namespace facekey
