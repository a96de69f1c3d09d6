#include "facekey/service.hpp"

#include <cstdlib>

#include "httplib.h"

#include "facekey/errors.hpp"
#include "facekey/line_listener.hpp"

namespace facekey {

using nlohmann::json;

std::optional<Channel> channel_from_string(std::string_view name) {
    if (name == "frames") return Channel::Frames;
    if (name == "triggers") return Channel::Triggers;
    if (name == "keyevents") return Channel::KeyEvents;
    return std::nullopt;
}

json frame_to_json(const AUFrame& frame) {
    json intensity = json::object();
    json presence = json::object();
    for (std::size_t i = 0; i < kAuCount; ++i) {
        const auto au = AuId::from_index(i);
        const auto key = std::to_string(au.number());
        intensity[key] = std::round(static_cast<double>(frame.intensity(au)) * 1e4) / 1e4;
        presence[key] = frame.present(au);
    }
    return {{"frame_index", frame.frame_index},
            {"timestamp_ms", frame.timestamp_ms},
            {"confidence", std::round(static_cast<double>(frame.confidence) * 1e4) / 1e4},
            {"intensity", std::move(intensity)},
            {"presence", std::move(presence)}};
}

json trigger_to_json(const TriggerEvent& t) {
    return {{"frame_index", t.frame_index}, {"timestamp_ms", t.timestamp_ms},
            {"rule_id", t.rule_id},         {"phrase", t.phrase},
            {"source", to_string(t.source)}, {"action", action_to_json(t.action)}};
}

json key_event_to_json(const KeyEvent& e) {
    return {{"timestamp_ms", e.timestamp_ms}, {"key", e.key}, {"edge", to_string(e.edge)}, {"source", to_string(e.source)}};
}

json status_to_json(const StatusSnapshot& s) {
    json rules = json::array();
    for (const auto& r : s.rules)
        rules.push_back({{"rule_id", r.rule_id},
                         {"active", r.active},
                         {"matched", r.matched},
                         {"consecutive_count", r.consecutive_count},
                         {"total_fires", r.total_fires}});
    return {{"active_profile", s.active_profile},
            {"active_mode", s.active_mode},
            {"fps_estimate", s.fps_estimate},
            {"frame_index", s.frame_index ? json(*s.frame_index) : json(nullptr)},
            {"frames_processed", s.frames_processed},
            {"rules", std::move(rules)},
            {"held_keys", s.held_keys},
            {"last_errors", s.last_errors},
            {"version", s.version}};
}

// ---------------------------------------------------------------------------

std::optional<std::string> Subscription::pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    if (!cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; })) return std::nullopt;
    if (queue_.empty()) return std::nullopt;
    auto payload = std::move(queue_.front());
    queue_.pop_front();
    cv_.notify_all();
    return payload;
}

void Subscription::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool Subscription::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

std::uint64_t Subscription::dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
}

bool Subscription::try_push(std::string payload) {
    {
        std::lock_guard lock(mutex_);
        if (closed_) return false;
        if (queue_.size() >= capacity_) {
            ++dropped_;
            return false;
        }
        queue_.push_back(std::move(payload));
    }
    cv_.notify_all();
    return true;
}

bool Subscription::push_wait(std::string payload, std::chrono::milliseconds wait) {
    {
        std::unique_lock lock(mutex_);
        if (!cv_.wait_for(lock, wait, [&] { return queue_.size() < capacity_ || closed_; }) || closed_) return false;
        queue_.push_back(std::move(payload));
    }
    cv_.notify_all();
    return true;
}

std::shared_ptr<Subscription> Broadcaster::subscribe(Channel channel) {
    auto sub = std::make_shared<Subscription>(channel, channel == Channel::Frames ? kFrameQueue : kEventQueue);
    std::lock_guard lock(mutex_);
    subs_.push_back(sub);
    return sub;
}

void Broadcaster::publish(Channel channel, const std::string& payload) {
    std::vector<std::shared_ptr<Subscription>> targets;
    {
        std::lock_guard lock(mutex_);
        subs_.remove_if([](const auto& s) { return s->closed(); });
        for (const auto& s : subs_)
            if (s->channel() == channel) targets.push_back(s);
    }
    for (const auto& s : targets) {
        if (channel == Channel::Frames) {
            if (!s->try_push(payload)) ++frames_dropped_;
        } else if (!s->push_wait(payload, std::chrono::seconds(1))) {
            // Stalled subscriber: disconnect rather than lose events silently.
            s->close();
        }
    }
}

void Broadcaster::close_all() {
    std::lock_guard lock(mutex_);
    for (const auto& s : subs_) s->close();
    subs_.clear();
}

std::size_t Broadcaster::subscriber_count() const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& s : subs_)
        if (!s->closed()) ++n;
    return n;
}

// ---------------------------------------------------------------------------

struct EngineHost::Recorder {
    std::mutex mutex;
    std::ofstream frames;
    std::ofstream events;
    bool on = false;
};

// Sink wrapper: delivers to the real sink, then tees to subscribers and the
// session recording.
class EngineHost::TeeSink final : public KeySink {
public:
    TeeSink(EngineHost& host) : host_(host) {}

    void deliver(const KeyEvent& event) override {
        std::optional<std::string> error;
        try {
            host_.sink_->deliver(event);
        } catch (const SinkError& e) {
            error = e.what();
        }
        host_.broadcaster_.publish(Channel::KeyEvents, key_event_to_json(event).dump());
        {
            std::lock_guard lock(host_.recorder_->mutex);
            if (host_.recorder_->on) host_.recorder_->events << format_event(event) << '\n';
        }
        if (error) throw SinkError(*error);
    }
    void flush() override { host_.sink_->flush(); }

private:
    EngineHost& host_;
};

EngineHost::EngineHost(Profile profile, std::unique_ptr<FrameStream> stream, std::shared_ptr<KeySink> sink,
                       HostOptions options)
    : session_(std::move(profile)),
      stream_(std::move(stream)),
      sink_(std::move(sink)),
      options_(std::move(options)),
      recorder_(std::make_unique<Recorder>()) {
    snapshot_ = session_.status();
    profile_doc_ = serialize_profile(session_.profile());
    tee_ = std::make_unique<TeeSink>(*this);
    if (!options_.transcript_endpoint.empty()) {
        transcript_listener_ = std::make_unique<LineListener>(options_.transcript_endpoint, [this](std::string_view line) {
            if (auto ev = parse_transcript_line(line, clock_ms_.load())) submit_transcript(std::move(*ev));
        });
    }
}

EngineHost::~EngineHost() {
    stop();
    if (transcript_listener_) transcript_listener_->stop();
}

int EngineHost::transcript_port() const { return transcript_listener_ ? transcript_listener_->port() : 0; }

void EngineHost::start() {
    if (started_.exchange(true)) return;
    if (options_.realtime)
        dispatcher_ = std::make_unique<TimedDispatcher>(*tee_, [this](const std::string& err) {
            std::lock_guard lock(state_mutex_);
            snapshot_.last_errors.push_back("delivery: " + err);
        });
    thread_ = std::thread([this] { run(); });
}

void EngineHost::stop() {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
    broadcaster_.close_all();
}

void EngineHost::wait() {
    std::unique_lock lock(finished_mutex_);
    finished_cv_.wait(lock, [&] { return finished_.load(); });
}

StatusSnapshot EngineHost::status() const {
    std::lock_guard lock(state_mutex_);
    return snapshot_;
}

std::string EngineHost::profile_document() const {
    std::lock_guard lock(state_mutex_);
    return profile_doc_;
}

std::uint64_t EngineHost::version() const {
    std::lock_guard lock(state_mutex_);
    return version_;
}

PutProfileResult EngineHost::put_profile(std::string_view document, std::optional<std::uint64_t> expected_version,
                                         std::chrono::milliseconds wait) {
    auto parsed = parse_profile(document);
    if (!parsed.ok()) {
        PutProfileResult r;
        r.status = PutProfileResult::Status::Invalid;
        r.diagnostics = std::move(parsed.diagnostics);
        r.current_version = version();
        return r;
    }
    auto r = put_profile(std::move(*parsed.profile), expected_version, wait);
    for (auto& d : parsed.diagnostics) r.diagnostics.push_back(std::move(d));
    return r;
}

PutProfileResult EngineHost::put_profile(Profile profile, std::optional<std::uint64_t> expected_version,
                                         std::chrono::milliseconds wait) {
    PutProfileResult r;
    r.current_version = version();
    auto diags = validate_profile(profile);
    for (const auto& d : diags)
        if (d.severity == Severity::Error) {
            r.status = PutProfileResult::Status::Invalid;
            r.diagnostics = std::move(diags);
            return r;
        }
    std::future<SwapAck> applied;
    {
        std::lock_guard lock(pending_mutex_);
        if (expected_version && *expected_version != r.current_version) {
            r.status = PutProfileResult::Status::Conflict;
            return r;
        }
        pending_profile_ = std::move(profile);
        swap_waiters_.emplace_back();
        applied = swap_waiters_.back().get_future();
    }
    if (applied.wait_for(wait) == std::future_status::ready) {
        r.status = PutProfileResult::Status::Applied;
        r.ack = applied.get();
        r.current_version = r.ack->version;
    } else {
        r.status = PutProfileResult::Status::Pending;
    }
    return r;
}

TranscriptEvent EngineHost::inject_transcript(std::string text) {
    const auto now = clock_ms_.load();
    TranscriptEvent ev{std::move(text), now, now};
    submit_transcript(ev);
    return ev;
}

void EngineHost::submit_transcript(TranscriptEvent event) {
    std::lock_guard lock(pending_mutex_);
    pending_transcripts_.push_back(std::move(event));
}

std::optional<std::string> EngineHost::record_session(const std::string& path, bool on) {
    std::lock_guard lock(recorder_->mutex);
    if (!on) {
        recorder_->on = false;
        recorder_->frames.close();
        recorder_->events.close();
        return std::nullopt;
    }
    std::ofstream frames(path + ".frames.csv");
    std::ofstream events(path + ".events.csv");
    if (!frames || !events) {
        recorder_->on = false;
        return "cannot write recording at '" + path + "'";
    }
    frames << tracker_header_line() << '\n';
    recorder_->frames = std::move(frames);
    recorder_->events = std::move(events);
    recorder_->on = true;
    return std::nullopt;
}

void EngineHost::deliver(std::vector<KeyEvent> events, std::int64_t now_ms) {
    if (dispatcher_) {
        dispatcher_->schedule(std::move(events));
        return;
    }
    scheduler_.schedule(std::move(events));
    if (auto r = sink_deliver(scheduler_.take_due(now_ms), *tee_); r.error) session_.note_error("delivery: " + *r.error);
}

void EngineHost::process(const AUFrame& frame) {
    {
        std::lock_guard lock(pending_mutex_);
        if (pending_profile_) {
            session_.hot_swap(std::move(*pending_profile_));
            pending_profile_.reset();
        }
        for (auto& t : pending_transcripts_) session_.submit_transcript(std::move(t));
        pending_transcripts_.clear();
    }

    if (dispatcher_) dispatcher_->anchor(frame.timestamp_ms);
    auto out = session_.step(frame);
    clock_ms_ = frame.timestamp_ms;

    {
        std::lock_guard lock(recorder_->mutex);
        if (recorder_->on) recorder_->frames << serialize_tracker_record(frame) << '\n';
    }

    const double period = 1000.0 / std::max(options_.ui_frame_rate, 0.001);
    const auto ts = static_cast<double>(frame.timestamp_ms);
    if (!next_ui_frame_ms_ || ts >= *next_ui_frame_ms_) {
        broadcaster_.publish(Channel::Frames, frame_to_json(frame).dump());
        next_ui_frame_ms_ = (!next_ui_frame_ms_ || ts >= *next_ui_frame_ms_ + period) ? ts + period
                                                                                      : *next_ui_frame_ms_ + period;
    }
    for (const auto& t : out.triggers) broadcaster_.publish(Channel::Triggers, trigger_to_json(t).dump());
    deliver(std::move(out.events), frame.timestamp_ms);

    for (const auto& e : stream_->drain_errors()) session_.note_error(e.message);

    if (out.swap) {
        std::vector<std::promise<SwapAck>> waiters;
        {
            std::lock_guard lock(pending_mutex_);
            if (!pending_profile_) waiters = std::exchange(swap_waiters_, {});
        }
        {
            std::lock_guard lock(state_mutex_);
            version_ = out.swap->version;
            profile_doc_ = serialize_profile(session_.profile());
        }
        for (auto& w : waiters) w.set_value(*out.swap);
    }
    publish_status();
}

void EngineHost::publish_status() {
    auto s = session_.status();
    std::lock_guard lock(state_mutex_);
    snapshot_ = std::move(s);
}

void EngineHost::run() {
    while (!stop_) {
        const auto next = stream_->next_frame(options_.poll);
        if (const auto* frame = std::get_if<AUFrame>(&next)) {
            process(*frame);
        } else if (std::holds_alternative<EndOfStream>(next)) {
            break;
        } else {
            for (const auto& e : stream_->drain_errors()) session_.note_error(e.message);
            publish_status();
        }
    }
    auto released = session_.shutdown();
    if (dispatcher_) {
        dispatcher_->schedule(std::move(released));
        dispatcher_->shutdown();
    } else {
        scheduler_.schedule(std::move(released));
        if (auto r = sink_deliver(scheduler_.take_all(), *tee_); r.error) session_.note_error("delivery: " + *r.error);
    }
    publish_status();
    {
        std::lock_guard lock(recorder_->mutex);
        recorder_->frames.flush();
        recorder_->events.flush();
    }
    {
        std::lock_guard lock(finished_mutex_);
        finished_ = true;
    }
    finished_cv_.notify_all();
}

// ---------------------------------------------------------------------------

namespace {

json diagnostics_json(const std::vector<Diagnostic>& diags, Severity severity) {
    json out = json::array();
    for (const auto& d : diags)
        if (d.severity == severity) out.push_back({{"code", d.code}, {"message", d.message}});
    return out;
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

ControlService::ControlService(EngineHost& host) : host_(host), server_(std::make_unique<httplib::Server>()) {
    auto& srv = *server_;

    srv.Get("/v1/status", [this](const httplib::Request&, httplib::Response& res) {
        if (!host_.started()) return reply(res, 503, {{"error", "engine not started"}});
        reply(res, 200, status_to_json(host_.status()));
    });

    srv.Get("/v1/profile", [this](const httplib::Request&, httplib::Response& res) {
        res.set_header("ETag", std::to_string(host_.version()));
        res.set_content(host_.profile_document(), "application/json");
    });

    srv.Put("/v1/profile", [this](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::uint64_t> expected;
        if (req.has_header("If-Match")) {
            try {
                expected = std::stoull(req.get_header_value("If-Match"));
            } catch (const std::exception&) {
                return reply(res, 400, {{"error", "If-Match must be a version number"}});
            }
        }
        const auto r = host_.put_profile(req.body, expected);
        using S = PutProfileResult::Status;
        switch (r.status) {
            case S::Invalid:
                return reply(res, 422, {{"errors", diagnostics_json(r.diagnostics, Severity::Error)},
                                        {"warnings", diagnostics_json(r.diagnostics, Severity::Warning)}});
            case S::Conflict:
                return reply(res, 409, {{"error", "version conflict"}, {"version", r.current_version}});
            case S::Pending:
                return reply(res, 202, {{"applied", false},
                                        {"pending", true},
                                        {"warnings", diagnostics_json(r.diagnostics, Severity::Warning)}});
            case S::Applied:
                return reply(res, 200, {{"applied", true},
                                        {"frame_index", r.ack->frame_index},
                                        {"version", r.ack->version},
                                        {"warnings", diagnostics_json(r.diagnostics, Severity::Warning)}});
        }
    });

    srv.Post("/v1/transcript", [this](const httplib::Request& req, httplib::Response& res) {
        std::string text = req.body;
        if (const auto j = json::parse(req.body, nullptr, false); !j.is_discarded() && j.is_object()) {
            if (!j.contains("text") || !j["text"].is_string()) return reply(res, 400, {{"error", "missing 'text'"}});
            text = j["text"].get<std::string>();
        }
        const auto ev = host_.inject_transcript(std::move(text));
        reply(res, 200, {{"accepted", true}, {"spoken_end_ms", ev.spoken_end_ms}});
    });

    srv.Post("/v1/record", [this](const httplib::Request& req, httplib::Response& res) {
        const auto j = json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("on") || !j["on"].is_boolean())
            return reply(res, 400, {{"error", "body must be {\"path\": string, \"on\": bool}"}});
        const bool on = j["on"].get<bool>();
        const std::string path = j.value("path", std::string{});
        if (on && path.empty()) return reply(res, 400, {{"error", "missing 'path'"}});
        if (const auto err = host_.record_session(path, on)) return reply(res, 500, {{"error", *err}, {"recording", false}});
        reply(res, 200, {{"recording", on}, {"path", path}});
    });

    srv.Get("/v1/events", [this](const httplib::Request& req, httplib::Response& res) {
        const auto channel = channel_from_string(req.get_param_value("channel"));
        if (!channel) return reply(res, 400, {{"error", "channel must be frames, triggers or keyevents"}});
        auto sub = host_.broadcaster().subscribe(*channel);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream",
            [this, sub](std::size_t, httplib::DataSink& sink) {
                if (stopping_) return false;
                auto payload = sub->pop(std::chrono::milliseconds(200));
                if (!payload && sub->closed()) return false;
                if (payload) {
                    const std::string chunk = "data: " + *payload + "\n\n";
                    if (!sink.write(chunk.data(), chunk.size())) {
                        sub->close();
                        return false;
                    }
                } else {
                    static const std::string keepalive = ": keepalive\n\n";
                    if (!sink.write(keepalive.data(), keepalive.size())) {
                        sub->close();
                        return false;
                    }
                }
                return true;
            },
            [sub](bool) { sub->close(); });
    });
}

ControlService::~ControlService() { stop(); }

int ControlService::start(const std::string& host, int port) {
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw std::runtime_error("cannot bind control service to " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void ControlService::stop() {
    stopping_ = true;
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

std::pair<std::string, int> ControlService::resolve_listen(const std::optional<std::string>& explicit_addr) {
    std::string addr = "127.0.0.1:8765";
    if (const char* env = std::getenv("FACEKEY_LISTEN"); env && *env) addr = env;
    if (explicit_addr) addr = *explicit_addr;
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("listen address must be HOST:PORT");
    return {addr.substr(0, colon), std::stoi(addr.substr(colon + 1))};
}

}  // namespace facekey
