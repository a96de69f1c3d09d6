#pragma once

// Profiles: complete engine configurations, their JSON document form, and
// the builtin game profiles.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "facekey/actions.hpp"
#include "facekey/rules.hpp"
#include "facekey/speech.hpp"

namespace facekey {

struct EngineParams {
    int frame_threshold = kDefaultFrameThreshold;
    float min_confidence = kDefaultMinConfidence;
    std::int64_t tap_hold_ms = 50;
    std::int64_t staleness_ms = kDefaultStalenessMs;
    friend bool operator==(const EngineParams&, const EngineParams&) = default;
};

struct ModeBindings {
    std::map<std::string, Action> bindings;  // rule_id -> action
    std::vector<KeywordBinding> keywords;
    friend bool operator==(const ModeBindings&, const ModeBindings&) = default;
};

struct Profile {
    std::string name;
    std::vector<Key> key_space;
    std::vector<ExpressionRule> rules;
    std::map<std::string, ModeBindings> modes;
    std::vector<MacroDefinition> macros;
    EngineParams engine_params;
    std::string initial_mode;

    const ExpressionRule* find_rule(std::string_view rule_id) const;
    const MacroDefinition* find_macro(std::string_view macro_id) const;
    std::set<std::string> mode_ids() const;

    friend bool operator==(const Profile&, const Profile&) = default;
};

enum class Severity { Warning, Error };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string code;  // e.g. "dangling-reference", "range", "discouraged-au"
    std::string message;
    friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct ProfileParseResult {
    std::optional<Profile> profile;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return profile.has_value(); }
    std::vector<Diagnostic> errors() const;
    std::vector<Diagnostic> warnings() const;
};

// Parses and validates. On any error the profile is absent and every error
// and warning found is listed.
ProfileParseResult parse_profile(std::string_view document);
ProfileParseResult parse_profile_file(const std::string& path);

std::vector<Diagnostic> validate_profile(const Profile& profile);

// Sorts rules, conditions, macros, keywords and key space, and quantizes
// thresholds and confidence floors to two decimals.
void canonicalize(Profile& profile);

// Canonical document: sorted object keys, 2-space indent, trailing newline.
std::string serialize_profile(const Profile& profile);
nlohmann::json profile_to_json(const Profile& profile);

nlohmann::json action_to_json(const Action& action);
std::optional<Action> action_from_json(const nlohmann::json& j);

// "table1-default", "walking-adventure", "fps", "car-racing".
const std::map<std::string, Profile>& builtin_profiles();

float quantize_2dp(double value);

}  // namespace facekey
