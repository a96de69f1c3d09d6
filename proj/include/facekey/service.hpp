#pragma once

// Engine host (runs the Session in its own thread, fed by a FrameStream)
// and the local HTTP control service in front of it.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <future>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"

#include "facekey/ingest.hpp"
#include "facekey/session.hpp"
#include "facekey/sinks.hpp"

namespace httplib {
class Server;
}

namespace facekey {

class LineListener;

enum class Channel { Frames, Triggers, KeyEvents };
std::optional<Channel> channel_from_string(std::string_view name);

nlohmann::json frame_to_json(const AUFrame& frame);
nlohmann::json trigger_to_json(const TriggerEvent& trigger);
nlohmann::json key_event_to_json(const KeyEvent& event);
nlohmann::json status_to_json(const StatusSnapshot& status);

// One subscriber's queue of JSON payloads.
class Subscription {
public:
    Subscription(Channel channel, std::size_t capacity) : channel_(channel), capacity_(capacity) {}

    Channel channel() const { return channel_; }
    std::optional<std::string> pop(std::chrono::milliseconds timeout);
    void close();
    bool closed() const;
    std::uint64_t dropped() const;

private:
    friend class Broadcaster;
    // Lossy push (frames): drops the payload when full.
    bool try_push(std::string payload);
    // Lossless push: waits for room up to `wait`; false means the subscriber
    // is stalled or closed.
    bool push_wait(std::string payload, std::chrono::milliseconds wait);

    Channel channel_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::string> queue_;
    std::uint64_t dropped_ = 0;
    bool closed_ = false;
};

class Broadcaster {
public:
    static constexpr std::size_t kFrameQueue = 64;
    static constexpr std::size_t kEventQueue = 4096;

    std::shared_ptr<Subscription> subscribe(Channel channel);
    void publish(Channel channel, const std::string& payload);
    void close_all();
    std::uint64_t frames_dropped() const { return frames_dropped_; }
    std::size_t subscriber_count() const;

private:
    mutable std::mutex mutex_;
    std::list<std::shared_ptr<Subscription>> subs_;
    std::atomic<std::uint64_t> frames_dropped_{0};
};

struct HostOptions {
    bool realtime = true;        // deliver key events on the wall clock
    double ui_frame_rate = 15.0; // frames channel downsample rate
    std::chrono::milliseconds poll{20};
    std::string transcript_endpoint;  // optional local socket for transcripts
};

struct PutProfileResult {
    enum class Status { Applied, Pending, Invalid, Conflict } status = Status::Invalid;
    std::optional<SwapAck> ack;
    std::vector<Diagnostic> diagnostics;
    std::uint64_t current_version = 0;
};

class EngineHost {
public:
    EngineHost(Profile profile, std::unique_ptr<FrameStream> stream, std::shared_ptr<KeySink> sink,
               HostOptions options = {});
    ~EngineHost();

    EngineHost(const EngineHost&) = delete;
    EngineHost& operator=(const EngineHost&) = delete;

    void start();
    void stop();
    // Blocks until the stream ends or stop() is called.
    void wait();
    bool started() const { return started_; }
    bool finished() const { return finished_; }

    StatusSnapshot status() const;
    std::string profile_document() const;
    std::uint64_t version() const;

    // Parses, validates and queues a swap; waits up to `wait` for the next
    // frame boundary. `expected_version` enables optimistic concurrency.
    PutProfileResult put_profile(std::string_view document, std::optional<std::uint64_t> expected_version,
                                 std::chrono::milliseconds wait = std::chrono::seconds(2));
    PutProfileResult put_profile(Profile profile, std::optional<std::uint64_t> expected_version,
                                 std::chrono::milliseconds wait = std::chrono::seconds(2));

    // Wraps text as a transcript spoken now (engine clock).
    TranscriptEvent inject_transcript(std::string text);
    void submit_transcript(TranscriptEvent event);

    // Tees frames to `<path>.frames.csv` and key events to `<path>.events.csv`.
    // Returns an error message on failure (recording stays off).
    std::optional<std::string> record_session(const std::string& path, bool on);

    Broadcaster& broadcaster() { return broadcaster_; }
    int transcript_port() const;

private:
    class TeeSink;
    struct Recorder;

    void run();
    void process(const AUFrame& frame);
    void publish_status();
    void deliver(std::vector<KeyEvent> events, std::int64_t now_ms);

    mutable std::mutex state_mutex_;   // guards session_ between threads
    Session session_;
    StatusSnapshot snapshot_;
    std::string profile_doc_;
    std::uint64_t version_ = 0;

    std::mutex pending_mutex_;
    std::optional<Profile> pending_profile_;
    std::vector<std::promise<SwapAck>> swap_waiters_;
    std::vector<TranscriptEvent> pending_transcripts_;

    std::unique_ptr<FrameStream> stream_;
    std::shared_ptr<KeySink> sink_;
    std::unique_ptr<TeeSink> tee_;
    std::unique_ptr<TimedDispatcher> dispatcher_;
    EventScheduler scheduler_;
    HostOptions options_;
    Broadcaster broadcaster_;
    std::unique_ptr<Recorder> recorder_;
    std::unique_ptr<LineListener> transcript_listener_;

    std::optional<double> next_ui_frame_ms_;
    std::atomic<std::int64_t> clock_ms_{0};
    std::atomic<bool> stop_{false};
    std::atomic<bool> started_{false};
    std::atomic<bool> finished_{false};
    std::mutex finished_mutex_;
    std::condition_variable finished_cv_;
    std::thread thread_;
};

// Loopback HTTP API:
//   GET  /v1/status
//   GET  /v1/profile              (ETag: version)
//   PUT  /v1/profile              (If-Match: version, optional)
//   POST /v1/transcript           ({"text": ...} or plain text)
//   POST /v1/record               ({"path": ..., "on": bool})
//   GET  /v1/events?channel=frames|triggers|keyevents   (text/event-stream)
class ControlService {
public:
    explicit ControlService(EngineHost& host);
    ~ControlService();

    // Binds and serves on a background thread. Port 0 picks a free port.
    // Returns the bound port; throws std::runtime_error on bind failure.
    int start(const std::string& host, int port);
    void stop();

    // "HOST:PORT"; FACEKEY_LISTEN overrides the default when no explicit
    // address is given.
    static std::pair<std::string, int> resolve_listen(const std::optional<std::string>& explicit_addr);

private:
    EngineHost& host_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::atomic<bool> stopping_{false};
};

}  // namespace facekey
