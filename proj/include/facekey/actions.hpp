#pragma once

// Action semantics: Tap, Toggle, Macro and SwitchMode expanded into timed
// key edges against a logical key state.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace facekey {

using Key = std::string;

struct Tap {
    Key key;
    friend bool operator==(const Tap&, const Tap&) = default;
};
struct Toggle {
    Key key;
    friend bool operator==(const Toggle&, const Toggle&) = default;
};
struct RunMacro {
    std::string macro_id;
    friend bool operator==(const RunMacro&, const RunMacro&) = default;
};
struct SwitchMode {
    std::string mode_id;
    friend bool operator==(const SwitchMode&, const SwitchMode&) = default;
};
using Action = std::variant<Tap, Toggle, RunMacro, SwitchMode>;

std::string describe(const Action& action);

struct MacroStep {
    Key key;
    std::int64_t down_ms = 0;
    std::int64_t gap_ms = 0;
    friend bool operator==(const MacroStep&, const MacroStep&) = default;
};

struct MacroDefinition {
    std::string macro_id;
    std::vector<MacroStep> steps;
    friend bool operator==(const MacroDefinition&, const MacroDefinition&) = default;
};

enum class Edge { Down, Up };
enum class EventSource { Face, Speech, Macro };

std::string_view to_string(Edge edge);
std::string_view to_string(EventSource source);

struct KeyEvent {
    Key key;
    Edge edge = Edge::Down;
    std::int64_t timestamp_ms = 0;
    EventSource source = EventSource::Face;
    friend bool operator==(const KeyEvent&, const KeyEvent&) = default;
};

struct InFlightMacro {
    std::string macro_id;
    std::int64_t end_ms = 0;
};

struct ActionState {
    std::set<Key> held_keys;                 // held Down via Toggle
    std::optional<InFlightMacro> active_macro;
    std::string active_mode;
    std::map<Key, std::int64_t> busy_until;  // last scheduled Up of a momentary press
};

// Everything execute() needs from the profile.
struct ActionContext {
    const std::vector<MacroDefinition>* macros = nullptr;
    const std::set<std::string>* modes = nullptr;  // null: any mode accepted
    std::int64_t tap_hold_ms = 50;
};

struct ExecuteResult {
    std::vector<KeyEvent> events;
    std::vector<std::string> notes;  // ignored fires, key conflicts
    bool mode_changed = false;
};

// Expands one action at now_ms. Tap/Toggle edges carry `source`; macro
// steps are tagged Macro. Throws BindingResolutionError for unknown
// macro or mode ids. An action that would press a key already logically
// down is ignored with a note.
ExecuteResult execute(const Action& action, ActionState& state, std::int64_t now_ms, const ActionContext& ctx,
                      EventSource source = EventSource::Face);

// Releases every toggle-held key at now_ms.
std::vector<KeyEvent> safety_release(ActionState& state, std::int64_t now_ms,
                                     EventSource source = EventSource::Face);

}  // namespace facekey
