#include "facekey/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace facekey {

using nlohmann::json;

float quantize_2dp(double value) { return static_cast<float>(std::round(value * 100.0) / 100.0); }

namespace {

double as_2dp(float value) { return std::round(static_cast<double>(value) * 100.0) / 100.0; }

bool valid_key_name(std::string_view key) {
    return !key.empty() && std::none_of(key.begin(), key.end(), [](char c) {
        return c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r';
    });
}

int condition_kind(const AUCondition& c) { return std::holds_alternative<Presence>(c.mode) ? 0 : 1; }
float condition_threshold(const AUCondition& c) {
    const auto* above = std::get_if<IntensityAbove>(&c.mode);
    return above ? above->threshold : 0.0f;
}

// Collects diagnostics while reading a JSON document leniently.
class Reader {
public:
    std::vector<Diagnostic> diags;

    void error(std::string code, std::string message) {
        diags.push_back({Severity::Error, std::move(code), std::move(message)});
    }

    template <typename T>
    std::optional<T> get(const json& obj, const char* field, const std::string& where, bool required) {
        const auto it = obj.find(field);
        if (it == obj.end()) {
            if (required) error("schema", where + ": missing field '" + field + "'");
            return std::nullopt;
        }
        try {
            if constexpr (std::is_same_v<T, std::string>) {
                if (!it->is_string()) throw std::invalid_argument("string");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw std::invalid_argument("boolean");
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer()) throw std::invalid_argument("integer");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!it->is_number()) throw std::invalid_argument("number");
            }
            return it->get<T>();
        } catch (const std::exception& e) {
            error("schema", where + ": field '" + field + "' has wrong type (expected " + e.what() + ")");
            return std::nullopt;
        }
    }

    std::optional<AUCondition> condition(const json& j, const std::string& where) {
        if (!j.is_object()) {
            error("schema", where + ": condition must be an object");
            return std::nullopt;
        }
        const auto au_number = get<int>(j, "au", where, true);
        if (!au_number) return std::nullopt;
        const auto au = AuId::from_number(*au_number);
        if (!au) {
            error("range", where + ": AU" + std::to_string(*au_number) + " is not a tracked action unit");
            return std::nullopt;
        }
        const bool has_above = j.contains("above");
        const bool has_present = j.contains("present");
        if (has_above == has_present) {
            error("schema", where + ": condition needs exactly one of 'above' or 'present'");
            return std::nullopt;
        }
        if (has_present) {
            const auto present = get<bool>(j, "present", where, true);
            if (present && !*present) {
                error("schema", where + ": 'present' must be true (absence conditions are not supported)");
                return std::nullopt;
            }
            if (!present) return std::nullopt;
            return AUCondition{*au, Presence{}};
        }
        const auto above = get<double>(j, "above", where, true);
        if (!above) return std::nullopt;
        return AUCondition{*au, IntensityAbove{quantize_2dp(*above)}};
    }

    std::optional<Action> action(const json& j, const std::string& where) {
        auto a = action_from_json(j);
        if (!a) error("schema", where + ": action must be one of {\"tap\":k}, {\"toggle\":k}, {\"macro\":id}, {\"mode\":id}");
        return a;
    }
};

}  // namespace

const ExpressionRule* Profile::find_rule(std::string_view rule_id) const {
    const auto it = std::find_if(rules.begin(), rules.end(), [&](const auto& r) { return r.rule_id == rule_id; });
    return it == rules.end() ? nullptr : &*it;
}

const MacroDefinition* Profile::find_macro(std::string_view macro_id) const {
    const auto it = std::find_if(macros.begin(), macros.end(), [&](const auto& m) { return m.macro_id == macro_id; });
    return it == macros.end() ? nullptr : &*it;
}

std::set<std::string> Profile::mode_ids() const {
    std::set<std::string> ids;
    for (const auto& [id, _] : modes) ids.insert(id);
    return ids;
}

std::vector<Diagnostic> ProfileParseResult::errors() const {
    std::vector<Diagnostic> out;
    for (const auto& d : diagnostics)
        if (d.severity == Severity::Error) out.push_back(d);
    return out;
}

std::vector<Diagnostic> ProfileParseResult::warnings() const {
    std::vector<Diagnostic> out;
    for (const auto& d : diagnostics)
        if (d.severity == Severity::Warning) out.push_back(d);
    return out;
}

json action_to_json(const Action& action) {
    struct {
        json operator()(const Tap& a) const { return {{"tap", a.key}}; }
        json operator()(const Toggle& a) const { return {{"toggle", a.key}}; }
        json operator()(const RunMacro& a) const { return {{"macro", a.macro_id}}; }
        json operator()(const SwitchMode& a) const { return {{"mode", a.mode_id}}; }
    } visitor;
    return std::visit(visitor, action);
}

std::optional<Action> action_from_json(const json& j) {
    if (!j.is_object() || j.size() != 1) return std::nullopt;
    const auto& [kind, value] = *j.items().begin();
    if (!value.is_string()) return std::nullopt;
    const auto arg = value.get<std::string>();
    if (kind == "tap") return Tap{arg};
    if (kind == "toggle") return Toggle{arg};
    if (kind == "macro") return RunMacro{arg};
    if (kind == "mode") return SwitchMode{arg};
    return std::nullopt;
}

std::vector<Diagnostic> validate_profile(const Profile& p) {
    std::vector<Diagnostic> d;
    const auto err = [&](std::string code, std::string msg) { d.push_back({Severity::Error, std::move(code), std::move(msg)}); };
    const auto warn = [&](std::string code, std::string msg) {
        d.push_back({Severity::Warning, std::move(code), std::move(msg)});
    };

    if (p.name.empty()) err("schema", "profile name is empty");

    std::set<Key> keys;
    for (const auto& k : p.key_space) {
        if (!valid_key_name(k)) err("schema", "key '" + k + "' is not a valid symbolic key");
        if (!keys.insert(k).second) err("duplicate-id", "key '" + k + "' declared twice in key_space");
    }

    const auto& ep = p.engine_params;
    if (ep.frame_threshold < 1) err("range", "engine_params.frame_threshold must be >= 1");
    if (!(ep.min_confidence >= 0.0f && ep.min_confidence <= 1.0f)) err("range", "engine_params.min_confidence outside [0, 1]");
    if (ep.tap_hold_ms < 1) err("range", "engine_params.tap_hold_ms must be >= 1");
    if (ep.staleness_ms < 0) err("range", "engine_params.staleness_ms must be >= 0");

    std::set<std::string> rule_ids;
    for (const auto& r : p.rules) {
        const std::string where = "rule '" + r.rule_id + "'";
        if (r.rule_id.empty()) err("schema", "rule with empty rule_id");
        if (!rule_ids.insert(r.rule_id).second) err("duplicate-id", "rule_id '" + r.rule_id + "' defined twice");
        if (r.conditions.empty()) err("schema", where + ": conditions must be non-empty");
        else if (r.conditions.size() < 2 || r.conditions.size() > 3)
            warn("condition-count", where + ": " + std::to_string(r.conditions.size()) +
                                        " conditions; expressions combining 2-3 AUs are the most reliable");
        for (const auto& c : r.conditions) {
            if (is_condition_forbidden(c.au.number()))
                err("forbidden-au", where + ": " + c.au.label() + " (blink) cannot be used as a condition");
            else if (is_condition_discouraged(c.au.number()))
                warn("discouraged-au", where + ": " + c.au.label() + " overlaps other AUs and detects unreliably");
            if (const auto* above = std::get_if<IntensityAbove>(&c.mode);
                above && !(above->threshold > kIntensityMin && above->threshold < kIntensityMax)) {
                std::ostringstream msg;
                msg << where << ": threshold " << above->threshold << " for " << c.au.label() << " outside (0, 5)";
                err("range", msg.str());
            }
        }
        if (r.frame_threshold < 1) err("range", where + ": frame_threshold must be >= 1");
        if (!(r.min_confidence >= 0.0f && r.min_confidence <= 1.0f)) err("range", where + ": min_confidence outside [0, 1]");
        if (const auto* rf = std::get_if<Refractory>(&r.rearm); rf && rf->frames < 0)
            err("range", where + ": refractory frames must be >= 0");
    }

    std::set<std::string> macro_ids;
    for (const auto& m : p.macros) {
        const std::string where = "macro '" + m.macro_id + "'";
        if (m.macro_id.empty()) err("schema", "macro with empty macro_id");
        if (!macro_ids.insert(m.macro_id).second) err("duplicate-id", "macro_id '" + m.macro_id + "' defined twice");
        if (m.steps.empty()) err("schema", where + ": steps must be non-empty");
        for (const auto& s : m.steps) {
            if (!keys.contains(s.key))
                err("dangling-reference", where + ": step key '" + s.key + "' not in key_space");
            if (s.down_ms < 0 || s.gap_ms < 0) err("range", where + ": down_ms and gap_ms must be >= 0");
        }
    }

    if (p.modes.empty()) err("schema", "profile defines no modes");
    if (!p.modes.contains(p.initial_mode)) err("dangling-reference", "initial_mode '" + p.initial_mode + "' is not a defined mode");

    const auto check_action = [&](const Action& a, const std::string& where) {
        if (const auto* t = std::get_if<Tap>(&a); t && !keys.contains(t->key))
            err("dangling-reference", where + " references unknown key '" + t->key + "'");
        if (const auto* t = std::get_if<Toggle>(&a); t && !keys.contains(t->key))
            err("dangling-reference", where + " references unknown key '" + t->key + "'");
        if (const auto* m = std::get_if<RunMacro>(&a); m && !macro_ids.contains(m->macro_id))
            err("dangling-reference", where + " references unknown macro '" + m->macro_id + "'");
        if (const auto* s = std::get_if<SwitchMode>(&a); s && !p.modes.contains(s->mode_id))
            err("dangling-reference", where + " references unknown mode '" + s->mode_id + "'");
    };

    for (const auto& [mode_id, mode] : p.modes) {
        if (mode_id.empty()) err("schema", "mode with empty id");
        for (const auto& [rule_id, action] : mode.bindings) {
            const std::string where = "mode '" + mode_id + "' binding for rule '" + rule_id + "'";
            if (!rule_ids.contains(rule_id)) err("dangling-reference", where + " names an unknown rule");
            check_action(action, where);
        }
        std::set<std::string> phrases;
        for (const auto& kw : mode.keywords) {
            const std::string where = "mode '" + mode_id + "' keyword '" + kw.phrase + "'";
            if (!is_valid_phrase(kw.phrase)) err("schema", where + ": phrase must be a single lowercase word");
            if (!phrases.insert(kw.phrase).second) err("duplicate-id", where + " bound twice");
            check_action(kw.action, where);
        }
    }
    return d;
}

void canonicalize(Profile& p) {
    std::sort(p.key_space.begin(), p.key_space.end());
    p.engine_params.min_confidence = quantize_2dp(p.engine_params.min_confidence);
    for (auto& r : p.rules) {
        r.min_confidence = quantize_2dp(r.min_confidence);
        for (auto& c : r.conditions)
            if (auto* above = std::get_if<IntensityAbove>(&c.mode)) above->threshold = quantize_2dp(above->threshold);
        std::sort(r.conditions.begin(), r.conditions.end(), [](const AUCondition& a, const AUCondition& b) {
            return std::tuple(a.au, condition_kind(a), condition_threshold(a)) <
                   std::tuple(b.au, condition_kind(b), condition_threshold(b));
        });
    }
    std::sort(p.rules.begin(), p.rules.end(), [](const auto& a, const auto& b) { return a.rule_id < b.rule_id; });
    std::sort(p.macros.begin(), p.macros.end(), [](const auto& a, const auto& b) { return a.macro_id < b.macro_id; });
    for (auto& [_, mode] : p.modes)
        std::sort(mode.keywords.begin(), mode.keywords.end(),
                  [](const auto& a, const auto& b) { return a.phrase < b.phrase; });
}

ProfileParseResult parse_profile(std::string_view document) {
    ProfileParseResult result;
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        result.diagnostics.push_back({Severity::Error, "syntax", e.what()});
        return result;
    }
    if (!doc.is_object()) {
        result.diagnostics.push_back({Severity::Error, "schema", "profile document must be a JSON object"});
        return result;
    }

    Reader rd;
    Profile p;
    p.name = rd.get<std::string>(doc, "name", "profile", true).value_or("");
    p.initial_mode = rd.get<std::string>(doc, "initial_mode", "profile", true).value_or("");

    if (const auto it = doc.find("engine_params"); it != doc.end()) {
        if (!it->is_object()) {
            rd.error("schema", "engine_params must be an object");
        } else {
            const std::string w = "engine_params";
            auto& ep = p.engine_params;
            ep.frame_threshold = rd.get<int>(*it, "frame_threshold", w, false).value_or(ep.frame_threshold);
            if (const auto v = rd.get<double>(*it, "min_confidence", w, false)) ep.min_confidence = quantize_2dp(*v);
            ep.tap_hold_ms = rd.get<std::int64_t>(*it, "tap_hold_ms", w, false).value_or(ep.tap_hold_ms);
            ep.staleness_ms = rd.get<std::int64_t>(*it, "staleness_ms", w, false).value_or(ep.staleness_ms);
        }
    }

    if (const auto ks = rd.get<std::vector<std::string>>(doc, "key_space", "profile", true)) p.key_space = *ks;

    if (const auto it = doc.find("rules"); it == doc.end() || !it->is_array()) {
        rd.error("schema", "profile: 'rules' must be an array");
    } else {
        for (std::size_t i = 0; i < it->size(); ++i) {
            const json& jr = (*it)[i];
            std::string where = "rules[" + std::to_string(i) + "]";
            if (!jr.is_object()) {
                rd.error("schema", where + " must be an object");
                continue;
            }
            ExpressionRule r;
            r.rule_id = rd.get<std::string>(jr, "rule_id", where, true).value_or("");
            if (!r.rule_id.empty()) where = "rule '" + r.rule_id + "'";
            r.display_name = rd.get<std::string>(jr, "display_name", where, false).value_or(r.rule_id);
            r.frame_threshold = rd.get<int>(jr, "frame_threshold", where, false).value_or(p.engine_params.frame_threshold);
            r.priority = rd.get<int>(jr, "priority", where, false).value_or(0);
            r.min_confidence = p.engine_params.min_confidence;
            if (const auto v = rd.get<double>(jr, "min_confidence", where, false)) r.min_confidence = quantize_2dp(*v);
            if (const auto rearm = jr.find("rearm"); rearm != jr.end()) {
                if (rearm->is_string() && *rearm == "release") {
                    r.rearm = ReleaseRequired{};
                } else if (rearm->is_object() && rearm->size() == 1 && rearm->contains("refractory") &&
                           (*rearm)["refractory"].is_number_integer()) {
                    r.rearm = Refractory{(*rearm)["refractory"].get<int>()};
                } else {
                    rd.error("schema", where + ": rearm must be \"release\" or {\"refractory\": n}");
                }
            }
            if (const auto conds = jr.find("conditions"); conds == jr.end() || !conds->is_array()) {
                rd.error("schema", where + ": 'conditions' must be an array");
            } else {
                for (const auto& jc : *conds)
                    if (auto c = rd.condition(jc, where)) r.conditions.push_back(*c);
                if (conds->empty()) r.conditions.clear();
            }
            p.rules.push_back(std::move(r));
        }
    }

    if (const auto it = doc.find("macros"); it != doc.end()) {
        if (!it->is_array()) {
            rd.error("schema", "profile: 'macros' must be an array");
        } else {
            for (std::size_t i = 0; i < it->size(); ++i) {
                const json& jm = (*it)[i];
                std::string where = "macros[" + std::to_string(i) + "]";
                if (!jm.is_object()) {
                    rd.error("schema", where + " must be an object");
                    continue;
                }
                MacroDefinition m;
                m.macro_id = rd.get<std::string>(jm, "macro_id", where, true).value_or("");
                if (const auto steps = jm.find("steps"); steps == jm.end() || !steps->is_array()) {
                    rd.error("schema", where + ": 'steps' must be an array");
                } else {
                    for (const auto& js : *steps) {
                        if (!js.is_object()) {
                            rd.error("schema", where + ": step must be an object");
                            continue;
                        }
                        MacroStep s;
                        s.key = rd.get<std::string>(js, "key", where, true).value_or("");
                        s.down_ms = rd.get<std::int64_t>(js, "down_ms", where, true).value_or(0);
                        s.gap_ms = rd.get<std::int64_t>(js, "gap_ms", where, false).value_or(0);
                        m.steps.push_back(std::move(s));
                    }
                }
                p.macros.push_back(std::move(m));
            }
        }
    }

    if (const auto it = doc.find("modes"); it == doc.end() || !it->is_object()) {
        rd.error("schema", "profile: 'modes' must be an object");
    } else {
        for (const auto& [mode_id, jm] : it->items()) {
            const std::string where = "mode '" + mode_id + "'";
            ModeBindings mode;
            if (!jm.is_object()) {
                rd.error("schema", where + " must be an object");
                continue;
            }
            if (const auto b = jm.find("bindings"); b != jm.end()) {
                if (!b->is_object()) rd.error("schema", where + ": 'bindings' must be an object");
                else
                    for (const auto& [rule_id, ja] : b->items())
                        if (auto a = rd.action(ja, where + " binding for rule '" + rule_id + "'"))
                            mode.bindings.emplace(rule_id, *a);
            }
            if (const auto k = jm.find("keywords"); k != jm.end()) {
                if (!k->is_array()) {
                    rd.error("schema", where + ": 'keywords' must be an array");
                } else {
                    for (const auto& jk : *k) {
                        if (!jk.is_object() || !jk.contains("phrase") || !jk.contains("action") ||
                            !jk["phrase"].is_string()) {
                            rd.error("schema", where + ": keyword needs 'phrase' and 'action'");
                            continue;
                        }
                        const auto phrase = jk["phrase"].get<std::string>();
                        if (auto a = rd.action(jk["action"], where + " keyword '" + phrase + "'"))
                            mode.keywords.push_back({phrase, *a});
                    }
                }
            }
            p.modes.emplace(mode_id, std::move(mode));
        }
    }

    result.diagnostics = std::move(rd.diags);
    auto semantic = validate_profile(p);
    for (auto& diag : semantic) result.diagnostics.push_back(std::move(diag));

    const bool has_error = std::any_of(result.diagnostics.begin(), result.diagnostics.end(),
                                       [](const Diagnostic& x) { return x.severity == Severity::Error; });
    if (!has_error) {
        canonicalize(p);
        result.profile = std::move(p);
    }
    return result;
}

ProfileParseResult parse_profile_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        ProfileParseResult r;
        r.diagnostics.push_back({Severity::Error, "io", "cannot read profile '" + path + "'"});
        return r;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_profile(ss.str());
}

json profile_to_json(const Profile& original) {
    Profile p = original;
    canonicalize(p);

    json rules = json::array();
    for (const auto& r : p.rules) {
        json conds = json::array();
        for (const auto& c : r.conditions) {
            if (const auto* above = std::get_if<IntensityAbove>(&c.mode))
                conds.push_back({{"au", c.au.number()}, {"above", as_2dp(above->threshold)}});
            else
                conds.push_back({{"au", c.au.number()}, {"present", true}});
        }
        json rearm = "release";
        if (const auto* rf = std::get_if<Refractory>(&r.rearm)) rearm = {{"refractory", rf->frames}};
        rules.push_back({{"rule_id", r.rule_id},
                         {"display_name", r.display_name},
                         {"conditions", std::move(conds)},
                         {"frame_threshold", r.frame_threshold},
                         {"rearm", std::move(rearm)},
                         {"priority", r.priority},
                         {"min_confidence", as_2dp(r.min_confidence)}});
    }

    json macros = json::array();
    for (const auto& m : p.macros) {
        json steps = json::array();
        for (const auto& s : m.steps) steps.push_back({{"key", s.key}, {"down_ms", s.down_ms}, {"gap_ms", s.gap_ms}});
        macros.push_back({{"macro_id", m.macro_id}, {"steps", std::move(steps)}});
    }

    json modes = json::object();
    for (const auto& [id, mode] : p.modes) {
        json bindings = json::object();
        for (const auto& [rule_id, action] : mode.bindings) bindings[rule_id] = action_to_json(action);
        json keywords = json::array();
        for (const auto& kw : mode.keywords) keywords.push_back({{"phrase", kw.phrase}, {"action", action_to_json(kw.action)}});
        modes[id] = {{"bindings", std::move(bindings)}, {"keywords", std::move(keywords)}};
    }

    return {{"name", p.name},
            {"initial_mode", p.initial_mode},
            {"key_space", p.key_space},
            {"engine_params",
             {{"frame_threshold", p.engine_params.frame_threshold},
              {"min_confidence", as_2dp(p.engine_params.min_confidence)},
              {"tap_hold_ms", p.engine_params.tap_hold_ms},
              {"staleness_ms", p.engine_params.staleness_ms}}},
            {"rules", std::move(rules)},
            {"macros", std::move(macros)},
            {"modes", std::move(modes)}};
}

std::string serialize_profile(const Profile& profile) { return profile_to_json(profile).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Builtin profiles. Rules follow the six AU combinations of the default
// mapping table; game profiles bind them to each game's key actions.

namespace {

AUCondition above(int au, float threshold) { return {*AuId::from_number(au), IntensityAbove{threshold}}; }
AUCondition present(int au) { return {*AuId::from_number(au), Presence{}}; }

ExpressionRule rule(std::string id, std::string name, std::vector<AUCondition> conds) {
    ExpressionRule r;
    r.rule_id = std::move(id);
    r.display_name = std::move(name);
    r.conditions = std::move(conds);
    return r;
}

// Row order = key 1..6.
std::vector<ExpressionRule> default_rules() {
    return {
        rule("happiness", "Happiness", {above(6, 2.0f), above(12, 2.0f)}),
        rule("sadness", "Sadness", {present(1), present(4), present(15)}),
        rule("disgust", "Disgust", {above(9, 1.4f), above(10, 2.0f)}),
        rule("wide-eyes", "Wide Eyes", {above(2, 0.5f), above(5, 1.5f)}),
        rule("pucker", "Pucker", {above(7, 1.4f), above(23, 1.0f)}),
        rule("jaw-drop", "Jaw Drop", {present(4), present(25), present(26)}),
    };
}

Profile make_profile(std::string name, std::vector<Action> per_key, std::vector<KeywordBinding> keywords = {}) {
    Profile p;
    p.name = std::move(name);
    p.initial_mode = "default";
    auto rules = default_rules();
    ModeBindings mode;
    for (std::size_t i = 0; i < per_key.size(); ++i) {
        p.key_space.push_back(std::to_string(i + 1));
        mode.bindings.emplace(rules[i].rule_id, per_key[i]);
        p.rules.push_back(rules[i]);
    }
    mode.keywords = std::move(keywords);
    p.modes.emplace("default", std::move(mode));
    canonicalize(p);
    return p;
}

}  // namespace

const std::map<std::string, Profile>& builtin_profiles() {
    static const std::map<std::string, Profile> builtins = [] {
        std::map<std::string, Profile> m;
        m.emplace("table1-default",
                  make_profile("table1-default", {Tap{"1"}, Tap{"2"}, Tap{"3"}, Tap{"4"}, Tap{"5"}, Tap{"6"}}));
        // Start walking, stop walking, pick up, sprint, turn yes, turn no.
        m.emplace("walking-adventure",
                  make_profile("walking-adventure", {Tap{"1"}, Tap{"2"}, Tap{"3"}, Tap{"4"}, Tap{"5"}, Tap{"6"}},
                               {{"yes", Tap{"5"}}, {"no", Tap{"6"}}}));
        // Walk fwd, aim+shoot, turn left, turn right, jump, pause.
        m.emplace("fps", make_profile("fps", {Toggle{"1"}, Tap{"2"}, Toggle{"3"}, Toggle{"4"}, Tap{"5"}, Tap{"6"}},
                                      {{"pause", Tap{"6"}}}));
        // Drive forward, drive backward, turn left, turn right.
        m.emplace("car-racing", make_profile("car-racing", {Toggle{"1"}, Toggle{"2"}, Toggle{"3"}, Toggle{"4"}}));
        return m;
    }();
    return builtins;
}

}  // namespace facekey
