#include "facekey/actions.hpp"

#include <algorithm>

#include "facekey/errors.hpp"

namespace facekey {

std::string describe(const Action& action) {
    struct {
        std::string operator()(const Tap& a) const { return "tap " + a.key; }
        std::string operator()(const Toggle& a) const { return "toggle " + a.key; }
        std::string operator()(const RunMacro& a) const { return "macro " + a.macro_id; }
        std::string operator()(const SwitchMode& a) const { return "mode " + a.mode_id; }
    } visitor;
    return std::visit(visitor, action);
}

std::string_view to_string(Edge edge) { return edge == Edge::Down ? "down" : "up"; }

std::string_view to_string(EventSource source) {
    switch (source) {
        case EventSource::Face: return "face";
        case EventSource::Speech: return "speech";
        case EventSource::Macro: return "macro";
    }
    return "face";
}

namespace {

bool key_free_at(const ActionState& state, const Key& key, std::int64_t t) {
    if (state.held_keys.contains(key)) return false;
    const auto it = state.busy_until.find(key);
    return it == state.busy_until.end() || it->second <= t;
}

const MacroDefinition& find_macro(const ActionContext& ctx, const std::string& id) {
    if (ctx.macros) {
        const auto it = std::find_if(ctx.macros->begin(), ctx.macros->end(),
                                     [&](const MacroDefinition& m) { return m.macro_id == id; });
        if (it != ctx.macros->end()) return *it;
    }
    throw BindingResolutionError("unknown macro '" + id + "'");
}

}  // namespace

ExecuteResult execute(const Action& action, ActionState& state, std::int64_t now_ms, const ActionContext& ctx,
                      EventSource source) {
    ExecuteResult out;

    if (const auto* tap = std::get_if<Tap>(&action)) {
        if (!key_free_at(state, tap->key, now_ms)) {
            out.notes.push_back("tap " + tap->key + " ignored: key already down");
            return out;
        }
        const auto up = now_ms + std::max<std::int64_t>(ctx.tap_hold_ms, 0);
        out.events.push_back({tap->key, Edge::Down, now_ms, source});
        out.events.push_back({tap->key, Edge::Up, up, source});
        state.busy_until[tap->key] = up;
    } else if (const auto* toggle = std::get_if<Toggle>(&action)) {
        if (state.held_keys.erase(toggle->key) > 0) {
            out.events.push_back({toggle->key, Edge::Up, now_ms, source});
        } else if (key_free_at(state, toggle->key, now_ms)) {
            state.held_keys.insert(toggle->key);
            out.events.push_back({toggle->key, Edge::Down, now_ms, source});
        } else {
            out.notes.push_back("toggle " + toggle->key + " ignored: key pressed by a pending tap or macro");
        }
    } else if (const auto* run = std::get_if<RunMacro>(&action)) {
        const MacroDefinition& macro = find_macro(ctx, run->macro_id);
        if (state.active_macro && now_ms < state.active_macro->end_ms) {
            out.notes.push_back("macro " + run->macro_id + " ignored: macro " + state.active_macro->macro_id +
                                " in flight");
            return out;
        }
        std::vector<KeyEvent> events;
        std::map<Key, std::int64_t> busy;
        std::int64_t t = now_ms;
        for (const auto& step : macro.steps) {
            if (!key_free_at(state, step.key, t)) {
                out.notes.push_back("macro " + run->macro_id + " ignored: key " + step.key + " already down");
                return out;
            }
            events.push_back({step.key, Edge::Down, t, EventSource::Macro});
            events.push_back({step.key, Edge::Up, t + step.down_ms, EventSource::Macro});
            busy[step.key] = t + step.down_ms;
            t += step.down_ms + step.gap_ms;
        }
        for (const auto& [key, until] : busy) state.busy_until[key] = until;
        state.active_macro = InFlightMacro{run->macro_id, events.empty() ? now_ms : events.back().timestamp_ms};
        out.events = std::move(events);
    } else if (const auto* sw = std::get_if<SwitchMode>(&action)) {
        if (ctx.modes && !ctx.modes->contains(sw->mode_id))
            throw BindingResolutionError("unknown mode '" + sw->mode_id + "'");
        out.events = safety_release(state, now_ms, source);
        state.active_mode = sw->mode_id;
        out.mode_changed = true;
    }
    return out;
}

std::vector<KeyEvent> safety_release(ActionState& state, std::int64_t now_ms, EventSource source) {
    std::vector<KeyEvent> events;
    events.reserve(state.held_keys.size());
    for (const auto& key : state.held_keys) events.push_back({key, Edge::Up, now_ms, source});
    state.held_keys.clear();
    return events;
}

}  // namespace facekey
