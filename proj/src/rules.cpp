#include "facekey/rules.hpp"

#include <algorithm>

namespace facekey {

bool eval_condition(const AUCondition& cond, const AUFrame& frame) {
    if (const auto* above = std::get_if<IntensityAbove>(&cond.mode)) return frame.intensity(cond.au) > above->threshold;
    return frame.present(cond.au);
}

bool eval_rule(const ExpressionRule& rule, const AUFrame& frame) {
    if (!(frame.confidence >= rule.min_confidence)) return false;
    return std::all_of(rule.conditions.begin(), rule.conditions.end(),
                       [&](const AUCondition& c) { return eval_condition(c, frame); });
}

DebounceStep debounce_step(DebounceState state, bool matched, const ExpressionRule& rule) {
    const int k = std::max(rule.frame_threshold, 1);
    const auto* refractory = std::get_if<Refractory>(&rule.rearm);

    if (refractory && state.refractory_remaining > 0) {
        --state.refractory_remaining;
        state.armed = state.refractory_remaining == 0;
    }

    if (matched) {
        state.consecutive_count = std::min(state.consecutive_count + 1, k);
    } else {
        state.consecutive_count = 0;
        if (!refractory) state.armed = true;
    }

    const bool fire = state.armed && state.consecutive_count == k;
    if (fire) {
        if (refractory) {
            state.consecutive_count = 0;
            state.refractory_remaining = std::max(refractory->frames, 0);
            state.armed = state.refractory_remaining == 0;
        } else {
            state.armed = false;
        }
    }
    return {state, fire};
}

std::optional<std::size_t> arbitrate(std::span<const std::size_t> fired, std::span<const ExpressionRule> rules) {
    std::optional<std::size_t> best;
    for (const auto idx : fired) {
        if (!best) {
            best = idx;
            continue;
        }
        const auto& a = rules[idx];
        const auto& b = rules[*best];
        if (a.priority > b.priority || (a.priority == b.priority && a.rule_id < b.rule_id)) best = idx;
    }
    return best;
}

kernels::CompiledRule compile_rule(const ExpressionRule& rule) {
    kernels::CompiledRule c;
    c.min_confidence = rule.min_confidence;
    for (const auto& cond : rule.conditions) {
        const auto lane = cond.au.index();
        if (const auto* above = std::get_if<IntensityAbove>(&cond.mode)) {
            // Two intensity conditions on one AU conjoin to the larger threshold.
            if (c.thresholds[lane] == kernels::kUnconstrained) c.lanes[c.lane_count++] = static_cast<std::uint8_t>(lane);
            c.thresholds[lane] = std::max(c.thresholds[lane], above->threshold);
        } else {
            c.required_presence |= std::uint32_t{1} << lane;
        }
    }
    return c;
}

RuleEngine::RuleEngine(std::vector<ExpressionRule> rules)
    : rules_(std::move(rules)),
      states_(rules_.size()),
      active_(rules_.size(), true),
      matches_(rules_.size(), 0),
      match_frame_(kernels::active_kernels().match_frame) {
    compiled_.reserve(rules_.size());
    for (const auto& r : rules_) compiled_.push_back(compile_rule(r));
    fired_.reserve(rules_.size());
}

void RuleEngine::set_active(std::vector<bool> active) {
    active.resize(rules_.size(), false);
    for (std::size_t i = 0; i < rules_.size(); ++i)
        if (!active[i]) states_[i] = DebounceState{};
    active_ = std::move(active);
}

void RuleEngine::reset() {
    std::fill(states_.begin(), states_.end(), DebounceState{});
    std::fill(matches_.begin(), matches_.end(), 0);
}

std::optional<std::size_t> RuleEngine::step(const AUFrame& frame) {
    match_frame_(frame, compiled_, matches_);
    fired_.clear();
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        if (!active_[i]) {
            matches_[i] = 0;
            continue;
        }
        auto [next, fire] = debounce_step(states_[i], matches_[i] != 0, rules_[i]);
        states_[i] = next;
        if (fire) fired_.push_back(i);
    }
    const auto winner = arbitrate(fired_, rules_);
    for (const auto i : fired_)
        if (i != *winner) states_[i] = DebounceState{};
    return winner;
}

std::vector<RuleTelemetry> RuleEngine::telemetry() const {
    std::vector<RuleTelemetry> t(rules_.size());
    for (std::size_t i = 0; i < rules_.size(); ++i)
        t[i] = {static_cast<bool>(active_[i]), matches_[i] != 0, states_[i].consecutive_count};
    return t;
}

}  // namespace facekey
