#include <filesystem>
#include <sstream>

#include <unistd.h>

#include "action_properties.hpp"
#include "doctest.h"
#include "facekey/errors.hpp"
#include "facekey/sinks.hpp"

using namespace facekey;

namespace {

ActionContext context() {
    static const std::set<std::string> modes{"default", "macro"};
    return {&test::sample_macros(), &modes, 50};
}

}  // namespace

TEST_CASE("tap expands to down and up") {
    ActionState s;
    const auto r = execute(Tap{"1"}, s, 1000, context());
    CHECK(r.events == std::vector<KeyEvent>{{"1", Edge::Down, 1000, EventSource::Face},
                                            {"1", Edge::Up, 1050, EventSource::Face}});
    CHECK(s.held_keys.empty());
}

TEST_CASE("tap on a key still down is ignored with a note") {
    ActionState s;
    execute(Tap{"1"}, s, 0, context());
    const auto r = execute(Tap{"1"}, s, 20, context());
    CHECK(r.events.empty());
    CHECK(r.notes.size() == 1);
    CHECK(execute(Tap{"1"}, s, 50, context()).events.size() == 2);
}

TEST_CASE("toggle twice returns to empty") {
    ActionState s;
    auto r = execute(Toggle{"3"}, s, 0, context());
    CHECK(r.events == std::vector<KeyEvent>{{"3", Edge::Down, 0, EventSource::Face}});
    CHECK(s.held_keys == std::set<Key>{"3"});
    r = execute(Toggle{"3"}, s, 10, context());
    CHECK(r.events == std::vector<KeyEvent>{{"3", Edge::Up, 10, EventSource::Face}});
    CHECK(s.held_keys.empty());
}

TEST_CASE("macro expands by prefix sums") {
    ActionState s;
    const auto r = execute(RunMacro{"combo"}, s, 100, context());
    CHECK(r.events == std::vector<KeyEvent>{{"a", Edge::Down, 100, EventSource::Macro},
                                            {"a", Edge::Up, 130, EventSource::Macro},
                                            {"d", Edge::Down, 150, EventSource::Macro},
                                            {"d", Edge::Up, 180, EventSource::Macro}});
}

TEST_CASE("macro fire while one is in flight is ignored") {
    ActionState s;
    execute(RunMacro{"combo"}, s, 0, context());
    const auto r = execute(RunMacro{"burst"}, s, 50, context());
    CHECK(r.events.empty());
    CHECK(r.notes.size() == 1);
    CHECK(execute(RunMacro{"burst"}, s, 80, context()).events.size() == 6);
}

TEST_CASE("mode switch releases held keys") {
    ActionState s;
    execute(Toggle{"w"}, s, 0, context());
    execute(Toggle{"d"}, s, 0, context());
    const auto r = execute(SwitchMode{"macro"}, s, 40, context());
    CHECK(r.mode_changed);
    CHECK(s.active_mode == "macro");
    CHECK(s.held_keys.empty());
    CHECK(r.events == std::vector<KeyEvent>{{"d", Edge::Up, 40, EventSource::Face},
                                            {"w", Edge::Up, 40, EventSource::Face}});
}

TEST_CASE("unknown macro or mode is a binding resolution error") {
    ActionState s;
    CHECK_THROWS_AS(execute(RunMacro{"nope"}, s, 0, context()), BindingResolutionError);
    CHECK_THROWS_AS(execute(SwitchMode{"nope"}, s, 0, context()), BindingResolutionError);
}

TEST_CASE("safety release of nothing emits nothing") {
    ActionState s;
    CHECK(safety_release(s, 0).empty());
}

TEST_CASE("property: action engine invariants over random sequences") {
    std::mt19937_64 rng(17);
    test::ActionViolations v;
    for (int i = 0; i < 1000; ++i) {
        test::check_action_sequence(rng, v);
        test::check_toggle_parity(rng, v);
    }
    CHECK(v.alternation == 0);
    CHECK(v.toggle_parity == 0);
    CHECK(v.macro_interleave == 0);
    CHECK(v.schedule_fidelity == 0);
    CHECK(v.mode_switch == 0);
    CHECK(v.balance == 0);
    CHECK(v.held_consistency == 0);
}

TEST_CASE("collecting sink preserves order") {
    CollectingSink sink;
    const std::vector<KeyEvent> events{{"1", Edge::Down, 0, EventSource::Face},
                                       {"1", Edge::Up, 50, EventSource::Face},
                                       {"2", Edge::Down, 60, EventSource::Speech}};
    const auto r = sink_deliver(events, sink);
    CHECK(r.delivered == 3);
    CHECK(sink.events() == events);
}

TEST_CASE("interleaved schedules merge sorted and stable") {
    EventScheduler sched;
    ActionState s;
    sched.schedule(execute(RunMacro{"combo"}, s, 0, context()).events);
    sched.schedule(execute(Tap{"x"}, s, 30, context()).events);
    const auto out = sched.take_all();
    REQUIRE(out.size() == 6);
    CHECK(std::is_sorted(out.begin(), out.end(),
                         [](const KeyEvent& a, const KeyEvent& b) { return a.timestamp_ms < b.timestamp_ms; }));
    // Equal stamps keep arrival order: the macro's Up a@30 precedes the tap's Down x@30.
    CHECK(out[1].key == "a");
    CHECK(out[2].key == "x");
}

TEST_CASE("scheduler releases only due events") {
    EventScheduler sched;
    sched.schedule({{"1", Edge::Down, 10, EventSource::Face}, {"1", Edge::Up, 60, EventSource::Face}});
    CHECK(sched.take_due(9).empty());
    CHECK(sched.take_due(10).size() == 1);
    CHECK(sched.next_due() == 60);
    CHECK(sched.take_due(100).size() == 1);
    CHECK(sched.empty());
}

TEST_CASE("event log file round-trips") {
    const auto path = std::filesystem::temp_directory_path() / ("facekey_events_" + std::to_string(::getpid()));
    const std::vector<KeyEvent> events{{"1", Edge::Down, 0, EventSource::Face},
                                       {"space", Edge::Up, 1234, EventSource::Macro},
                                       {"5", Edge::Down, 99, EventSource::Speech}};
    {
        EventLogSink sink(path.string());
        for (const auto& e : events) sink.deliver(e);
    }
    CHECK(read_event_log(path.string()) == events);
    CHECK(format_event(events[1]) == "1234,space,up,macro");
    CHECK_FALSE(parse_event_line("12,a,sideways,face").has_value());
    std::filesystem::remove(path);
}

TEST_CASE("unwritable event log is a sink error") {
    CHECK_THROWS_AS(EventLogSink("/nonexistent/dir/events.csv"), SinkError);
}

TEST_CASE("timed dispatcher delivers everything by shutdown") {
    CollectingSink sink;
    {
        TimedDispatcher d(sink, [](const std::string&) {});
        d.anchor(0);
        d.schedule({{"1", Edge::Down, 0, EventSource::Face}, {"1", Edge::Up, 20, EventSource::Face}});
        std::this_thread::sleep_for(std::chrono::milliseconds(60));
        CHECK(sink.events().size() == 2);
        d.schedule({{"2", Edge::Down, 100000, EventSource::Face}});
        d.shutdown();
    }
    CHECK(sink.events().size() == 3);
}
