#pragma once

// Speech keyword channel: transcripts from an external recognizer are
// normalized, matched against single-word phrases, and gated on staleness.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facekey/actions.hpp"

namespace facekey {

inline constexpr std::int64_t kDefaultStalenessMs = 2000;

struct TranscriptEvent {
    std::string text;
    std::int64_t spoken_end_ms = 0;
    std::int64_t received_ms = 0;
};

struct KeywordBinding {
    std::string phrase;  // single lowercase word
    Action action;
    friend bool operator==(const KeywordBinding&, const KeywordBinding&) = default;
};

// Lowercase, strip punctuation, split on whitespace.
std::vector<std::string> normalize(std::string_view text);

// One action per token that exactly equals a bound phrase, in token order.
std::vector<Action> match_keywords(std::span<const std::string> tokens, std::span<const KeywordBinding> bindings);

// Inclusive bound: now - spoken_end <= staleness.
bool admit(const TranscriptEvent& event, std::int64_t now_ms, std::int64_t staleness_ms = kDefaultStalenessMs);

// Transcript wire line: `spoken_end_ms<TAB>text`.
std::optional<TranscriptEvent> parse_transcript_line(std::string_view line, std::int64_t received_ms);

bool is_valid_phrase(std::string_view phrase);

}  // namespace facekey
