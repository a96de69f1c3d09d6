#include "facekey/session.hpp"

#include <stdexcept>

#include "facekey/errors.hpp"

namespace facekey {
namespace {

constexpr std::size_t kMaxErrors = 32;

std::string first_error(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        if (d.severity == Severity::Error) return d.message;
    return {};
}

bool has_error(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        if (d.severity == Severity::Error) return true;
    return false;
}

}  // namespace

Session::Session(Profile profile) {
    const auto diags = validate_profile(profile);
    if (has_error(diags)) throw std::invalid_argument("invalid profile: " + first_error(diags));
    install(std::make_shared<const Profile>(std::move(profile)));
}

void Session::install(std::shared_ptr<const Profile> profile) {
    profile_ = std::move(profile);
    engine_ = std::make_unique<RuleEngine>(profile_->rules);
    mode_ids_ = profile_->mode_ids();
    actions_.held_keys.clear();
    actions_.active_macro.reset();
    actions_.active_mode = profile_->initial_mode;
    total_fires_.assign(profile_->rules.size(), 0);
    refresh_active_rules();
}

void Session::refresh_active_rules() {
    const auto& bindings = profile_->modes.at(actions_.active_mode).bindings;
    std::vector<bool> active(profile_->rules.size());
    for (std::size_t i = 0; i < active.size(); ++i) active[i] = bindings.contains(profile_->rules[i].rule_id);
    engine_->set_active(std::move(active));
}

std::vector<Diagnostic> Session::hot_swap(Profile profile) {
    auto diags = validate_profile(profile);
    if (has_error(diags)) return diags;
    pending_swap_ = std::move(profile);
    return {};
}

void Session::submit_transcript(TranscriptEvent event) { transcripts_.push_back(std::move(event)); }

void Session::note_error(std::string message) {
    errors_.push_back(std::move(message));
    while (errors_.size() > kMaxErrors) errors_.pop_front();
}

void Session::run_action(const Action& action, EventSource source, StepOutput& out) {
    const ActionContext ctx{&profile_->macros, &mode_ids_, profile_->engine_params.tap_hold_ms};
    ExecuteResult r;
    try {
        r = execute(action, actions_, clock_ms_, ctx, source);
    } catch (const BindingResolutionError& e) {
        note_error(e.what());
        out.notes.push_back(e.what());
        return;
    }
    for (auto& ev : r.events) out.events.push_back(std::move(ev));
    for (auto& n : r.notes) {
        note_error(n);
        out.notes.push_back(std::move(n));
    }
    if (r.mode_changed) refresh_active_rules();
}

Session::StepOutput Session::step(const AUFrame& frame) {
    StepOutput out;
    clock_ms_ = frame.timestamp_ms;

    if (pending_swap_) {
        for (auto& ev : safety_release(actions_, clock_ms_)) out.events.push_back(std::move(ev));
        install(std::make_shared<const Profile>(std::move(*pending_swap_)));
        pending_swap_.reset();
        ++version_;
        out.swap = SwapAck{frame.frame_index, version_, profile_->name};
    }

    if (last_timestamp_ && frame.timestamp_ms > *last_timestamp_) {
        const double inst = 1000.0 / static_cast<double>(frame.timestamp_ms - *last_timestamp_);
        fps_estimate_ = fps_estimate_ == 0.0 ? inst : 0.9 * fps_estimate_ + 0.1 * inst;
    }
    last_timestamp_ = frame.timestamp_ms;
    const bool low = frame.confidence < profile_->engine_params.min_confidence;
    if (low && !low_confidence_) {
        auto note = "low tracking confidence " + std::to_string(frame.confidence).substr(0, 4) + " at frame " +
                    std::to_string(frame.frame_index);
        note_error(note);
        out.notes.push_back(std::move(note));
    }
    low_confidence_ = low;
    last_frame_index_ = frame.frame_index;
    ++frames_processed_;

    while (!transcripts_.empty()) {
        TranscriptEvent t = std::move(transcripts_.front());
        transcripts_.pop_front();
        if (!admit(t, clock_ms_, profile_->engine_params.staleness_ms)) {
            auto note = "stale transcript dropped (" + std::to_string(clock_ms_ - t.spoken_end_ms) + " ms): '" +
                        t.text + "'";
            note_error(note);
            out.notes.push_back(std::move(note));
            continue;
        }
        const auto tokens = normalize(t.text);
        for (const auto& token : tokens) {
            // Keywords resolve against the mode active when each token is reached.
            const auto& keywords = profile_->modes.at(actions_.active_mode).keywords;
            const auto actions = match_keywords(std::span(&token, 1), keywords);
            if (actions.empty()) continue;
            out.triggers.push_back({frame.frame_index, frame.timestamp_ms, "", token, actions.front(), EventSource::Speech});
            run_action(actions.front(), EventSource::Speech, out);
        }
    }

    if (const auto winner = engine_->step(frame)) {
        const auto& rule = profile_->rules[*winner];
        ++total_fires_[*winner];
        const auto& bindings = profile_->modes.at(actions_.active_mode).bindings;
        if (const auto it = bindings.find(rule.rule_id); it != bindings.end()) {
            out.triggers.push_back({frame.frame_index, frame.timestamp_ms, rule.rule_id, "", it->second, EventSource::Face});
            run_action(it->second, EventSource::Face, out);
        }
    }
    return out;
}

std::vector<KeyEvent> Session::shutdown() { return safety_release(actions_, clock_ms_); }

StatusSnapshot Session::status() const {
    StatusSnapshot s;
    s.active_profile = profile_->name;
    s.active_mode = actions_.active_mode;
    s.fps_estimate = fps_estimate_;
    s.frame_index = last_frame_index_;
    s.frames_processed = frames_processed_;
    const auto telemetry = engine_->telemetry();
    for (std::size_t i = 0; i < profile_->rules.size(); ++i)
        s.rules.push_back({profile_->rules[i].rule_id, telemetry[i].active, telemetry[i].matched,
                           telemetry[i].consecutive_count, total_fires_[i]});
    s.held_keys.assign(actions_.held_keys.begin(), actions_.held_keys.end());
    s.last_errors.assign(errors_.begin(), errors_.end());
    s.version = version_;
    return s;
}

}  // namespace facekey
