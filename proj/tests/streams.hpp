#pragma once

// Synthetic streams used by several suites.

#include <string>
#include <vector>

#include "facekey/profile.hpp"
#include "facekey/session.hpp"
#include "facekey/simcal.hpp"

namespace facekey::test {

inline const std::vector<std::string>& table_rule_order() {
    static const std::vector<std::string> order{"happiness", "sadness", "disgust", "wide-eyes", "pucker", "jaw-drop"};
    return order;
}

// Six episodes, one per default rule in key order, `duration` frames each,
// separated by `gap` neutral frames.
inline simcal::EpisodeScript table_script(std::int64_t duration = 8, std::int64_t gap = 10, float sigma = 0.0f,
                                          std::uint64_t seed = 0) {
    simcal::EpisodeScript s;
    std::int64_t t = gap;
    for (const auto& id : table_rule_order()) {
        s.episodes.push_back({id, {}, {}, t, duration, 2.5f});
        t += duration + gap;
    }
    s.total_frames = t;
    s.fps = 30.0;
    s.confidence = 0.99f;
    s.sigma = sigma;
    s.seed = seed;
    return s;
}

inline std::vector<AUFrame> table_stream(std::int64_t duration = 8, std::int64_t gap = 10) {
    return simcal::generate_stream(table_script(duration, gap), builtin_profiles().at("table1-default").rules);
}

struct SessionRun {
    std::vector<TriggerEvent> triggers;
    std::vector<KeyEvent> events;
};

inline SessionRun run_session(Session& session, std::span<const AUFrame> frames) {
    SessionRun run;
    for (const auto& f : frames) {
        auto out = session.step(f);
        run.triggers.insert(run.triggers.end(), out.triggers.begin(), out.triggers.end());
        run.events.insert(run.events.end(), out.events.begin(), out.events.end());
    }
    return run;
}

}  // namespace facekey::test
