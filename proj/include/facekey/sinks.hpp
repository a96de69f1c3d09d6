#pragma once

// Key sinks and ordered delivery of scheduled key events.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "facekey/actions.hpp"

namespace facekey {

// Event log line: `timestamp_ms,key,edge,source`.
std::string format_event(const KeyEvent& event);
std::optional<KeyEvent> parse_event_line(std::string_view line);
std::vector<KeyEvent> read_event_log(const std::string& path);

class KeySink {
public:
    virtual ~KeySink() = default;
    // Throws SinkError when the underlying device rejects the event.
    virtual void deliver(const KeyEvent& event) = 0;
    virtual void flush() {}
};

class CollectingSink final : public KeySink {
public:
    void deliver(const KeyEvent& event) override;
    std::vector<KeyEvent> events() const;
    void clear();

private:
    mutable std::mutex mutex_;
    std::vector<KeyEvent> events_;
};

class EventLogSink final : public KeySink {
public:
    // Throws SinkError if the file cannot be opened.
    explicit EventLogSink(const std::string& path);
    void deliver(const KeyEvent& event) override;
    void flush() override;

private:
    std::ofstream out_;
};

// OS key injection (Linux uinput). Throws SinkError from the constructor
// when the device is unavailable.
class PlatformSink final : public KeySink {
public:
    PlatformSink();
    ~PlatformSink() override;
    void deliver(const KeyEvent& event) override;

    // Linux input-event key code for a symbolic key, if known.
    static std::optional<int> key_code(std::string_view key);

private:
    int fd_ = -1;
};

struct DeliveryResult {
    std::size_t delivered = 0;
    std::optional<std::string> error;
};

// Stable-sorts by timestamp and delivers. Stops at the first sink error.
DeliveryResult sink_deliver(std::vector<KeyEvent> events, KeySink& sink);

// Min-heap of pending events keyed by (timestamp, arrival order), so merged
// schedules come out sorted and stable for equal stamps.
class EventScheduler {
public:
    void schedule(std::vector<KeyEvent> events);
    // Pops every event with timestamp <= now_ms, in order.
    std::vector<KeyEvent> take_due(std::int64_t now_ms);
    std::vector<KeyEvent> take_all();
    std::optional<std::int64_t> next_due() const;
    bool empty() const { return heap_.empty(); }

private:
    struct Entry {
        KeyEvent event;
        std::uint64_t seq;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            return a.event.timestamp_ms != b.event.timestamp_ms ? a.event.timestamp_ms > b.event.timestamp_ms
                                                                 : a.seq > b.seq;
        }
    };
    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    std::uint64_t seq_ = 0;
};

// Timer context that owns a sink and delivers events when the wall clock
// reaches their stream timestamp. Stream time is anchored to wall time at
// the first anchor() call.
class TimedDispatcher {
public:
    using ErrorHandler = std::function<void(const std::string&)>;

    TimedDispatcher(KeySink& sink, ErrorHandler on_error);
    ~TimedDispatcher();

    void anchor(std::int64_t stream_ms);
    void schedule(std::vector<KeyEvent> events);
    // Delivers everything still pending immediately and stops the thread.
    void shutdown();

private:
    void run();

    KeySink& sink_;
    ErrorHandler on_error_;
    std::mutex mutex_;
    std::condition_variable cv_;
    EventScheduler scheduler_;
    std::optional<std::pair<std::int64_t, std::chrono::steady_clock::time_point>> anchor_;
    bool stop_ = false;
    std::thread thread_;
};

}  // namespace facekey
