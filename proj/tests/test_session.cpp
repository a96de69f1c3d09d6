#include "doctest.h"
#include "facekey/session.hpp"
#include "streams.hpp"
#include "support.hpp"

using namespace facekey;

namespace {

const Profile& builtin(const std::string& name) { return builtin_profiles().at(name); }

std::vector<std::string> trigger_rules(const std::vector<TriggerEvent>& t) {
    std::vector<std::string> out;
    for (const auto& e : t) out.push_back(e.rule_id);
    return out;
}

}  // namespace

TEST_CASE("default profile fires each rule once on the fifth matched frame") {
    const auto frames = test::table_stream();
    Session s(builtin("table1-default"));
    const auto run = test::run_session(s, frames);
    REQUIRE(run.triggers.size() == 6);
    const auto script = test::table_script();
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(run.triggers[i].rule_id == test::table_rule_order()[i]);
        CHECK(run.triggers[i].frame_index == script.episodes[i].start_frame + 4);
        CHECK(run.triggers[i].action == Action{Tap{std::to_string(i + 1)}});
    }
    CHECK(run.events.size() == 12);
}

TEST_CASE("invalid profile is rejected at construction") {
    auto p = builtin("table1-default");
    p.initial_mode = "missing";
    CHECK_THROWS_AS(Session{p}, std::invalid_argument);
}

TEST_CASE("status counts fires and exposes held keys") {
    Session s(builtin("fps"));
    auto status = s.status();
    CHECK(status.frames_processed == 0);
    CHECK(status.held_keys.empty());
    for (const auto& r : status.rules) CHECK(r.total_fires == 0);

    // Happiness toggles key 1 in the fps profile.
    for (int i = 0; i < 5; ++i) s.step(test::make_frame(i, {{6, 2.5f}, {12, 2.5f}}));
    status = s.status();
    CHECK(status.frames_processed == 5);
    CHECK(status.held_keys == std::vector<Key>{"1"});
    for (const auto& r : status.rules) CHECK(r.total_fires == (r.rule_id == "happiness" ? 1u : 0u));
    CHECK(status.fps_estimate == doctest::Approx(1000.0 / 33.0));
    CHECK(s.shutdown() == std::vector<KeyEvent>{{"1", Edge::Up, 4 * 33, EventSource::Face}});
}

TEST_CASE("low confidence is noted once on entry") {
    Session s(builtin("table1-default"));
    CHECK(s.step(test::make_frame(0, {}, 0.2f)).notes.size() == 1);
    CHECK(s.step(test::make_frame(1, {}, 0.2f)).notes.empty());
    s.step(test::make_frame(2, {}, 0.9f));
    CHECK(s.step(test::make_frame(3, {}, 0.2f)).notes.size() == 1);
    CHECK(s.status().last_errors.size() == 2);
}

TEST_CASE("hot swap equals the spliced runs of two single-profile sessions") {
    const auto frames = test::table_stream();
    for (const std::size_t boundary : {std::size_t{0}, std::size_t{14}, std::size_t{33}, std::size_t{60}, frames.size()}) {
        CAPTURE(boundary);
        const std::span<const AUFrame> all(frames);

        Session a(builtin("table1-default"));
        auto expected = test::run_session(a, all.first(boundary)).triggers;
        Session b(builtin("car-racing"));
        const auto tail = test::run_session(b, all.subspan(boundary)).triggers;
        expected.insert(expected.end(), tail.begin(), tail.end());

        Session s(builtin("table1-default"));
        auto got = test::run_session(s, all.first(boundary)).triggers;
        CHECK(s.hot_swap(builtin("car-racing")).empty());
        if (boundary < frames.size()) {
            const auto out = s.step(frames[boundary]);
            REQUIRE(out.swap.has_value());
            CHECK(out.swap->frame_index == frames[boundary].frame_index);
            CHECK(out.swap->version == 1);
            CHECK(out.swap->profile_name == "car-racing");
            got.insert(got.end(), out.triggers.begin(), out.triggers.end());
            const auto rest = test::run_session(s, all.subspan(boundary + 1)).triggers;
            got.insert(got.end(), rest.begin(), rest.end());
        }
        CHECK(got == expected);
    }
}

TEST_CASE("swap releases held keys at the boundary") {
    Session s(builtin("fps"));
    for (int i = 0; i < 5; ++i) s.step(test::make_frame(i, {{6, 2.5f}, {12, 2.5f}}));
    REQUIRE(s.action_state().held_keys.size() == 1);
    s.hot_swap(builtin("table1-default"));
    const auto out = s.step(test::make_frame(5, {}));
    CHECK(out.events == std::vector<KeyEvent>{{"1", Edge::Up, 5 * 33, EventSource::Face}});
    CHECK(s.action_state().held_keys.empty());
}

TEST_CASE("swap to the identical profile only resets state") {
    const auto frames = test::table_stream();
    Session plain(builtin("table1-default"));
    const auto expected = test::run_session(plain, frames).triggers;

    // Swap inside a neutral gap: no debounce state to lose.
    Session s(builtin("table1-default"));
    auto got = test::run_session(s, std::span(frames).first(25)).triggers;
    s.hot_swap(builtin("table1-default"));
    const auto rest = test::run_session(s, std::span(frames).subspan(25)).triggers;
    got.insert(got.end(), rest.begin(), rest.end());
    CHECK(got == expected);
    CHECK(s.version() == 1);
}

TEST_CASE("rejected swap leaves the engine unchanged") {
    const auto frames = test::table_stream();
    Session plain(builtin("table1-default"));
    const auto expected = test::run_session(plain, frames);

    Session s(builtin("table1-default"));
    auto first = test::run_session(s, std::span(frames).first(30));
    auto bad = builtin("car-racing");
    bad.rules[0].conditions.clear();
    CHECK_FALSE(s.hot_swap(bad).empty());
    CHECK_FALSE(s.swap_pending());
    const auto rest = test::run_session(s, std::span(frames).subspan(30));
    first.triggers.insert(first.triggers.end(), rest.triggers.begin(), rest.triggers.end());
    first.events.insert(first.events.end(), rest.events.begin(), rest.events.end());
    CHECK(first.triggers == expected.triggers);
    CHECK(first.events == expected.events);
    CHECK(s.version() == 0);
}

TEST_CASE("speech keywords run through the same action path") {
    Session s(builtin("walking-adventure"));
    s.submit_transcript({"Yes!", 0, 0});
    auto out = s.step(test::make_frame(0, {}));
    REQUIRE(out.triggers.size() == 1);
    CHECK(out.triggers[0].source == EventSource::Speech);
    CHECK(out.triggers[0].phrase == "yes");
    CHECK(out.events == std::vector<KeyEvent>{{"5", Edge::Down, 0, EventSource::Speech},
                                              {"5", Edge::Up, 50, EventSource::Speech}});

    s.submit_transcript({"no", 0, 0});
    out = s.step(test::make_frame(100, {}));  // 3300 ms after speech ended
    CHECK(out.triggers.empty());
    CHECK(out.events.empty());
    CHECK(out.notes.size() == 1);

    s.submit_transcript({"walk", 3300, 3300});
    CHECK(s.step(test::make_frame(101, {})).triggers.empty());
}

TEST_CASE("mode switch changes the active rule set") {
    auto p = builtin("table1-default");
    p.modes["alt"].bindings.emplace("sadness", Tap{"2"});
    p.modes["default"].bindings["happiness"] = SwitchMode{"alt"};
    canonicalize(p);
    Session s(p);
    test::run_session(s, std::vector<AUFrame>(5, test::make_frame(0, {{6, 2.5f}, {12, 2.5f}})));
    CHECK(s.action_state().active_mode == "alt");
    const auto status = s.status();
    for (const auto& r : status.rules) CHECK(r.active == (r.rule_id == "sadness"));
    std::vector<AUFrame> sad;
    for (int i = 0; i < 5; ++i) sad.push_back(test::make_frame(10 + i, {}, 0.99f, {1, 4, 15}));
    const auto run = test::run_session(s, sad);
    REQUIRE(run.triggers.size() == 1);
    CHECK(run.triggers[0].action == Action{Tap{"2"}});
}
