#include "facekey/speech.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>

namespace facekey {

std::vector<std::string> normalize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!current.empty()) tokens.push_back(std::exchange(current, {}));
        } else if (!std::ispunct(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::vector<Action> match_keywords(std::span<const std::string> tokens, std::span<const KeywordBinding> bindings) {
    std::vector<Action> actions;
    for (const auto& token : tokens) {
        const auto it = std::find_if(bindings.begin(), bindings.end(),
                                     [&](const KeywordBinding& b) { return b.phrase == token; });
        if (it != bindings.end()) actions.push_back(it->action);
    }
    return actions;
}

bool admit(const TranscriptEvent& event, std::int64_t now_ms, std::int64_t staleness_ms) {
    return now_ms - event.spoken_end_ms <= staleness_ms;
}

std::optional<TranscriptEvent> parse_transcript_line(std::string_view line, std::int64_t received_ms) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) return std::nullopt;
    TranscriptEvent ev;
    const auto head = line.substr(0, tab);
    const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), ev.spoken_end_ms);
    if (ec != std::errc{} || ptr != head.data() + head.size()) return std::nullopt;
    ev.text = std::string(line.substr(tab + 1));
    ev.received_ms = received_ms;
    return ev;
}

bool is_valid_phrase(std::string_view phrase) {
    return !phrase.empty() && std::all_of(phrase.begin(), phrase.end(), [](char ch) {
        const auto c = static_cast<unsigned char>(ch);
        return !std::isspace(c) && !std::ispunct(c) && !std::isupper(c);
    });
}

}  // namespace facekey
