#pragma once

// Golden rows for the builtin profiles and a generator of valid profiles.

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "facekey/profile.hpp"

namespace facekey::test {

struct ConditionRow {
    int au;
    float above;  // 0 means a presence condition
};

struct DefaultRow {
    std::string rule_id;
    std::vector<ConditionRow> conditions;
    std::string key;
};

// Six AU combinations and their default keys.
inline const std::vector<DefaultRow>& default_rows() {
    static const std::vector<DefaultRow> rows{
        {"happiness", {{6, 2.0f}, {12, 2.0f}}, "1"},
        {"sadness", {{1, 0}, {4, 0}, {15, 0}}, "2"},
        {"disgust", {{9, 1.4f}, {10, 2.0f}}, "3"},
        {"wide-eyes", {{2, 0.5f}, {5, 1.5f}}, "4"},
        {"pucker", {{7, 1.4f}, {23, 1.0f}}, "5"},
        {"jaw-drop", {{4, 0}, {25, 0}, {26, 0}}, "6"},
    };
    return rows;
}

struct GameRow {
    std::string key;
    Action action;
    std::string phrase;  // speech keyword, if the row accepts speech
};

inline const std::map<std::string, std::vector<GameRow>>& game_rows() {
    static const std::map<std::string, std::vector<GameRow>> rows{
        {"walking-adventure",
         {{"1", Tap{"1"}, ""}, {"2", Tap{"2"}, ""}, {"3", Tap{"3"}, ""}, {"4", Tap{"4"}, ""},
          {"5", Tap{"5"}, "yes"}, {"6", Tap{"6"}, "no"}}},
        {"fps",
         {{"1", Toggle{"1"}, ""}, {"2", Tap{"2"}, ""}, {"3", Toggle{"3"}, ""}, {"4", Toggle{"4"}, ""},
          {"5", Tap{"5"}, ""}, {"6", Tap{"6"}, "pause"}}},
        {"car-racing", {{"1", Toggle{"1"}, ""}, {"2", Toggle{"2"}, ""}, {"3", Toggle{"3"}, ""}, {"4", Toggle{"4"}, ""}}},
    };
    return rows;
}

// Every mismatch between the builtins and the golden rows, as text.
inline std::vector<std::string> builtin_mismatches() {
    std::vector<std::string> out;
    const auto& builtins = builtin_profiles();
    const auto expect = [&](bool ok, const std::string& what) {
        if (!ok) out.push_back(what);
    };
    expect(builtins.size() == 4, "expected exactly four builtins");
    for (const auto& name : {"table1-default", "walking-adventure", "fps", "car-racing"})
        expect(builtins.contains(name), std::string("missing builtin ") + name);
    if (!out.empty()) return out;

    const auto check_rule = [&](const Profile& p, const DefaultRow& row) {
        const auto* r = p.find_rule(row.rule_id);
        if (!r) {
            out.push_back(p.name + ": missing rule " + row.rule_id);
            return;
        }
        expect(r->frame_threshold == 5, p.name + "/" + row.rule_id + ": frame threshold");
        expect(r->conditions.size() == row.conditions.size(), p.name + "/" + row.rule_id + ": condition count");
        for (const auto& c : row.conditions) {
            const bool found = std::any_of(r->conditions.begin(), r->conditions.end(), [&](const AUCondition& rc) {
                if (rc.au.number() != c.au) return false;
                if (c.above == 0) return std::holds_alternative<Presence>(rc.mode);
                const auto* a = std::get_if<IntensityAbove>(&rc.mode);
                return a && a->threshold == c.above;
            });
            expect(found, p.name + "/" + row.rule_id + ": AU" + std::to_string(c.au) + " condition");
        }
    };

    const auto& def = builtins.at("table1-default");
    expect(def.modes.size() == 1, "table1-default: one mode");
    for (const auto& row : default_rows()) {
        check_rule(def, row);
        const auto& b = def.modes.at(def.initial_mode).bindings;
        const auto it = b.find(row.rule_id);
        expect(it != b.end() && it->second == Action{Tap{row.key}}, "table1-default: " + row.rule_id + " -> tap " + row.key);
    }

    for (const auto& [name, rows] : game_rows()) {
        const auto& p = builtins.at(name);
        const auto& mode = p.modes.at(p.initial_mode);
        expect(mode.bindings.size() == rows.size(), name + ": binding count");
        std::size_t phrases = 0;
        for (const auto& row : rows) {
            // The rule bound to a key is the default rule for that key.
            const auto& drow = *std::find_if(default_rows().begin(), default_rows().end(),
                                             [&](const DefaultRow& d) { return d.key == row.key; });
            check_rule(p, drow);
            const auto it = mode.bindings.find(drow.rule_id);
            expect(it != mode.bindings.end() && it->second == row.action,
                   name + ": key " + row.key + " -> " + describe(row.action));
            if (!row.phrase.empty()) {
                ++phrases;
                const auto kw = std::find_if(mode.keywords.begin(), mode.keywords.end(),
                                             [&](const KeywordBinding& k) { return k.phrase == row.phrase; });
                expect(kw != mode.keywords.end() && kw->action == row.action,
                       name + ": speech '" + row.phrase + "' -> " + describe(row.action));
            }
        }
        expect(mode.keywords.size() == phrases, name + ": keyword count");
    }
    for (const auto& [name, p] : builtins)
        for (const auto& d : validate_profile(p))
            expect(d.severity != Severity::Error, name + ": " + d.message);
    return out;
}

// Random valid profile in canonical form.
inline Profile random_profile(std::mt19937_64& rng, int serial) {
    std::uniform_int_distribution<int> small(0, 1000);
    const auto pick = [&](std::size_t n) { return static_cast<std::size_t>(small(rng)) % n; };
    const auto q = [&](int lo, int hi) { return quantize_2dp((lo + static_cast<int>(pick(static_cast<std::size_t>(hi - lo + 1)))) / 100.0); };

    Profile p;
    p.name = "gen-" + std::to_string(serial);
    static const std::vector<std::string> key_pool{"1", "2", "3", "4", "5", "6", "a", "d", "w", "space", "shift", "f1"};
    for (const auto& k : key_pool)
        if (pick(2) || p.key_space.size() < 2) p.key_space.push_back(k);

    p.engine_params.frame_threshold = 1 + static_cast<int>(pick(8));
    p.engine_params.min_confidence = q(0, 100);
    p.engine_params.tap_hold_ms = 1 + static_cast<std::int64_t>(pick(200));
    p.engine_params.staleness_ms = static_cast<std::int64_t>(pick(5000));

    std::vector<int> usable;
    for (const int n : kAuNumbers)
        if (!is_condition_forbidden(n)) usable.push_back(n);
    const auto rule_count = 1 + pick(7);
    for (std::size_t i = 0; i < rule_count; ++i) {
        ExpressionRule r;
        r.rule_id = "rule-" + std::to_string(i);
        r.display_name = "Rule " + std::to_string(i);
        auto pool = usable;
        std::shuffle(pool.begin(), pool.end(), rng);
        const auto n = 1 + pick(4);
        for (std::size_t c = 0; c < n; ++c) {
            AUCondition cond{*AuId::from_number(pool[c]), Presence{}};
            if (pick(3)) cond.mode = IntensityAbove{q(1, 499)};
            r.conditions.push_back(cond);
        }
        r.frame_threshold = 1 + static_cast<int>(pick(10));
        if (pick(2)) r.rearm = Refractory{static_cast<int>(pick(30))};
        r.priority = static_cast<int>(pick(5)) - 2;
        r.min_confidence = q(0, 100);
        p.rules.push_back(std::move(r));
    }

    const auto macro_count = pick(3);
    for (std::size_t i = 0; i < macro_count; ++i) {
        MacroDefinition m{"macro-" + std::to_string(i), {}};
        for (std::size_t s = 0, n = 1 + pick(4); s < n; ++s)
            m.steps.push_back({p.key_space[pick(p.key_space.size())], static_cast<std::int64_t>(pick(100)),
                               static_cast<std::int64_t>(pick(100))});
        p.macros.push_back(std::move(m));
    }

    std::vector<std::string> mode_ids{"default"};
    for (std::size_t i = 0, n = pick(3); i < n; ++i) mode_ids.push_back("mode-" + std::to_string(i));
    const auto random_action = [&]() -> Action {
        switch (pick(4)) {
            case 0: return Tap{p.key_space[pick(p.key_space.size())]};
            case 1: return Toggle{p.key_space[pick(p.key_space.size())]};
            case 2:
                if (!p.macros.empty()) return RunMacro{p.macros[pick(p.macros.size())].macro_id};
                return Tap{p.key_space[0]};
            default: return SwitchMode{mode_ids[pick(mode_ids.size())]};
        }
    };
    static const std::vector<std::string> words{"yes", "no", "pause", "walk", "stop", "jump", "fire", "left"};
    for (const auto& id : mode_ids) {
        ModeBindings mb;
        for (const auto& r : p.rules)
            if (pick(4)) mb.bindings.emplace(r.rule_id, random_action());
        for (const auto& w : words)
            if (pick(4) == 0) mb.keywords.push_back({w, random_action()});
        p.modes.emplace(id, std::move(mb));
    }
    p.initial_mode = mode_ids[pick(mode_ids.size())];
    canonicalize(p);
    return p;
}

}  // namespace facekey::test
