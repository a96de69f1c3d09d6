#pragma once

// The engine context: one frame in, triggers and scheduled key events out.
// Profile swaps and transcripts are queued and take effect at the next frame
// boundary. Single-threaded; hosts serialize access.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "facekey/actions.hpp"
#include "facekey/au_frame.hpp"
#include "facekey/profile.hpp"
#include "facekey/rules.hpp"
#include "facekey/speech.hpp"

namespace facekey {

struct TriggerEvent {
    std::int64_t frame_index = 0;
    std::int64_t timestamp_ms = 0;
    std::string rule_id;  // empty for speech triggers
    std::string phrase;   // empty for face triggers
    Action action;
    EventSource source = EventSource::Face;
    friend bool operator==(const TriggerEvent&, const TriggerEvent&) = default;
};

struct SwapAck {
    std::int64_t frame_index = 0;  // first frame governed by the new profile
    std::uint64_t version = 0;
    std::string profile_name;
};

struct RuleStatus {
    std::string rule_id;
    bool active = false;
    bool matched = false;
    int consecutive_count = 0;
    std::uint64_t total_fires = 0;
};

struct StatusSnapshot {
    std::string active_profile;
    std::string active_mode;
    double fps_estimate = 0.0;
    std::optional<std::int64_t> frame_index;
    std::uint64_t frames_processed = 0;
    std::vector<RuleStatus> rules;
    std::vector<Key> held_keys;
    std::vector<std::string> last_errors;
    std::uint64_t version = 0;
};

class Session {
public:
    // Throws std::invalid_argument if the profile does not validate.
    explicit Session(Profile profile);

    struct StepOutput {
        std::vector<TriggerEvent> triggers;  // speech triggers first, then at most one face trigger
        std::vector<KeyEvent> events;        // unsorted; deliver through an EventScheduler
        std::optional<SwapAck> swap;
        std::vector<std::string> notes;
    };

    StepOutput step(const AUFrame& frame);

    // Queues a swap for the next frame boundary. Returns validation errors
    // (and queues nothing) if the profile is invalid. A later swap replaces
    // a still-pending one.
    std::vector<Diagnostic> hot_swap(Profile profile);
    bool swap_pending() const { return pending_swap_.has_value(); }

    void submit_transcript(TranscriptEvent event);

    // Releases every held key at the current clock.
    std::vector<KeyEvent> shutdown();

    void note_error(std::string message);

    StatusSnapshot status() const;
    const Profile& profile() const { return *profile_; }
    const ActionState& action_state() const { return actions_; }
    std::uint64_t version() const { return version_; }
    std::int64_t clock_ms() const { return clock_ms_; }

private:
    void install(std::shared_ptr<const Profile> profile);
    void refresh_active_rules();
    void run_action(const Action& action, EventSource source, StepOutput& out);

    std::shared_ptr<const Profile> profile_;
    std::unique_ptr<RuleEngine> engine_;
    std::set<std::string> mode_ids_;
    ActionState actions_;
    std::vector<std::uint64_t> total_fires_;
    std::optional<Profile> pending_swap_;
    std::deque<TranscriptEvent> transcripts_;
    std::deque<std::string> errors_;
    std::uint64_t version_ = 0;
    std::int64_t clock_ms_ = 0;
    std::optional<std::int64_t> last_frame_index_;
    std::optional<std::int64_t> last_timestamp_;
    std::uint64_t frames_processed_ = 0;
    double fps_estimate_ = 0.0;
    bool low_confidence_ = false;
};

}  // namespace facekey
