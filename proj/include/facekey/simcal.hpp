#pragma once

// Synthetic AU streams, the brute-force debounce oracle, run metrics and
// offline threshold sweeps.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "facekey/au_frame.hpp"
#include "facekey/profile.hpp"
#include "facekey/rules.hpp"
#include "facekey/session.hpp"

namespace facekey::simcal {

struct Episode {
    std::string rule_id;             // rule template; empty when targets are explicit
    std::map<int, float> targets;    // AU number -> intensity (explicit episodes)
    std::vector<int> present;        // AU numbers flagged present (explicit episodes)
    std::int64_t start_frame = 0;
    std::int64_t duration_frames = 1;
    float intensity_level = 2.5f;
};

struct ConfidenceDip {
    std::int64_t start_frame = 0;
    std::int64_t duration_frames = 1;
    float level = 0.0f;
};

struct EpisodeScript {
    std::vector<Episode> episodes;
    std::int64_t total_frames = 0;
    double fps = 30.0;
    float sigma = 0.0f;                   // Gaussian noise on every AU
    std::map<int, float> sigma_per_au;    // overrides sigma for listed AUs
    float confidence = 0.99f;
    std::vector<ConfidenceDip> confidence_dips;
    std::uint64_t seed = 0;
};

// Script documents share the JSON conventions of profile files.
EpisodeScript parse_script(std::string_view document);  // throws std::invalid_argument
EpisodeScript load_script(const std::string& path);
nlohmann::json script_to_json(const EpisodeScript& script);

// Deterministic for a given seed. Rule-template episodes resolve against
// `rules`: intensity-conditioned AUs take intensity_level, presence-
// conditioned AUs are flagged present (and also take intensity_level).
// Throws std::invalid_argument on an unknown rule or out-of-range episode.
std::vector<AUFrame> generate_stream(const EpisodeScript& script, std::span<const ExpressionRule> rules);

// Brute-force fire indices (0-based), computed without the incremental
// debouncer. ReleaseRequired: one fire per maximal run of length >= K, at
// the run's Kth element. Refractory(n): re-fires after every K further
// matched frames, never closer than n frames to the previous fire.
std::vector<std::size_t> oracle_fires(std::span<const std::uint8_t> matches, int k, const RearmPolicy& rearm);

struct TriggerRecord {
    std::int64_t frame_index = 0;
    std::string rule_id;
};

struct RunMetrics {
    std::vector<std::optional<std::int64_t>> activation_latency_frames;  // per episode; nullopt = miss
    std::size_t false_positive_count = 0;
    std::size_t miss_count = 0;
    std::size_t repeat_fire_count = 0;  // extra fires inside an already-activated episode

    std::optional<double> mean_latency() const;
};

// Episodes are matched by frame window [start, start + duration). A fire
// inside a window activates it if the rule matches the episode's rule (any
// rule for explicit episodes); fires outside every window, or by the wrong
// rule, are false positives. Expects triggers sorted by frame_index.
RunMetrics measure(std::span<const TriggerRecord> triggers, const EpisodeScript& script);

// Runs a whole profile over frames through a Session.
std::vector<TriggerRecord> run_profile(const Profile& profile, std::span<const AUFrame> frames);

struct SweepRow {
    float threshold = 0.0f;
    int frame_threshold = 0;
    std::size_t false_positives = 0;
    std::size_t misses = 0;
    std::optional<double> mean_latency;
};

// Exhaustive grid replay of one rule: every condition on `au_ids` becomes
// IntensityAbove(threshold), and frame_threshold = K. Labels come from the
// script episodes that target this rule (or explicit episodes). Rows are
// ordered threshold-major. Throws std::invalid_argument on an empty grid.
std::vector<SweepRow> sweep(std::span<const AUFrame> frames, const EpisodeScript& labels, const ExpressionRule& rule,
                            std::span<const AuId> au_ids, std::span<const float> thresholds,
                            std::span<const int> frame_thresholds);

std::string metrics_csv(const RunMetrics& metrics, const EpisodeScript& script);
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace facekey::simcal
