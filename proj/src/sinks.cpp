#include "facekey/sinks.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fcntl.h>
#include <sys/ioctl.h>
#include <unistd.h>

#if __has_include(<linux/uinput.h>)
#include <linux/uinput.h>
#define FACEKEY_HAVE_UINPUT 1
#endif

#include "facekey/errors.hpp"

namespace facekey {

std::string format_event(const KeyEvent& event) {
    std::string line = std::to_string(event.timestamp_ms);
    line += ',';
    line += event.key;
    line += ',';
    line += to_string(event.edge);
    line += ',';
    line += to_string(event.source);
    return line;
}

std::optional<KeyEvent> parse_event_line(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
    std::vector<std::string_view> parts;
    for (std::size_t start = 0;;) {
        const auto comma = line.find(',', start);
        parts.push_back(line.substr(start, comma == line.npos ? line.npos : comma - start));
        if (comma == line.npos) break;
        start = comma + 1;
    }
    if (parts.size() != 4 || parts[1].empty()) return std::nullopt;

    KeyEvent ev;
    const auto [ptr, ec] = std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), ev.timestamp_ms);
    if (ec != std::errc{} || ptr != parts[0].data() + parts[0].size()) return std::nullopt;
    ev.key = std::string(parts[1]);
    if (parts[2] == "down") ev.edge = Edge::Down;
    else if (parts[2] == "up") ev.edge = Edge::Up;
    else return std::nullopt;
    if (parts[3] == "face") ev.source = EventSource::Face;
    else if (parts[3] == "speech") ev.source = EventSource::Speech;
    else if (parts[3] == "macro") ev.source = EventSource::Macro;
    else return std::nullopt;
    return ev;
}

std::vector<KeyEvent> read_event_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SinkError("cannot read event log '" + path + "'");
    std::vector<KeyEvent> events;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        auto ev = parse_event_line(line);
        if (!ev) throw SinkError(path + ":" + std::to_string(n) + ": malformed event line");
        events.push_back(std::move(*ev));
    }
    return events;
}

void CollectingSink::deliver(const KeyEvent& event) {
    std::lock_guard lock(mutex_);
    events_.push_back(event);
}

std::vector<KeyEvent> CollectingSink::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

void CollectingSink::clear() {
    std::lock_guard lock(mutex_);
    events_.clear();
}

EventLogSink::EventLogSink(const std::string& path) : out_(path) {
    if (!out_) throw SinkError("cannot open event log '" + path + "' for writing");
}

void EventLogSink::deliver(const KeyEvent& event) {
    out_ << format_event(event) << '\n';
    if (!out_) throw SinkError("event log write failed");
}

void EventLogSink::flush() { out_.flush(); }

std::optional<int> PlatformSink::key_code(std::string_view key) {
#ifdef FACEKEY_HAVE_UINPUT
    static constexpr int digits[] = {KEY_0, KEY_1, KEY_2, KEY_3, KEY_4, KEY_5, KEY_6, KEY_7, KEY_8, KEY_9};
    static constexpr int letters[] = {KEY_A, KEY_B, KEY_C, KEY_D, KEY_E, KEY_F, KEY_G, KEY_H, KEY_I,
                                      KEY_J, KEY_K, KEY_L, KEY_M, KEY_N, KEY_O, KEY_P, KEY_Q, KEY_R,
                                      KEY_S, KEY_T, KEY_U, KEY_V, KEY_W, KEY_X, KEY_Y, KEY_Z};
    if (key.size() == 1) {
        const char c = key[0];
        if (c >= '0' && c <= '9') return digits[c - '0'];
        if (c >= 'a' && c <= 'z') return letters[c - 'a'];
    }
    static const std::pair<std::string_view, int> named[] = {
        {"space", KEY_SPACE}, {"enter", KEY_ENTER}, {"esc", KEY_ESC},     {"tab", KEY_TAB},
        {"left", KEY_LEFT},   {"right", KEY_RIGHT}, {"up", KEY_UP},       {"down", KEY_DOWN},
        {"shift", KEY_LEFTSHIFT}, {"ctrl", KEY_LEFTCTRL}, {"alt", KEY_LEFTALT}, {"backspace", KEY_BACKSPACE}};
    for (const auto& [name, code] : named)
        if (name == key) return code;
#else
    (void)key;
#endif
    return std::nullopt;
}

PlatformSink::PlatformSink() {
#ifdef FACEKEY_HAVE_UINPUT
    fd_ = ::open("/dev/uinput", O_WRONLY | O_NONBLOCK);
    if (fd_ < 0) throw SinkError(std::string("platform key injection unavailable: /dev/uinput: ") + std::strerror(errno));
    ::ioctl(fd_, UI_SET_EVBIT, EV_KEY);
    for (int code = KEY_ESC; code <= KEY_DOWN; ++code) ::ioctl(fd_, UI_SET_KEYBIT, code);
    uinput_setup setup{};
    setup.id.bustype = BUS_USB;
    setup.id.vendor = 0x1209;
    setup.id.product = 0xFACE;
    std::strncpy(setup.name, "facekey virtual keyboard", UINPUT_MAX_NAME_SIZE - 1);
    if (::ioctl(fd_, UI_DEV_SETUP, &setup) < 0 || ::ioctl(fd_, UI_DEV_CREATE) < 0) {
        ::close(fd_);
        fd_ = -1;
        throw SinkError("platform key injection unavailable: uinput device creation failed");
    }
#else
    throw SinkError("platform key injection not supported on this system");
#endif
}

PlatformSink::~PlatformSink() {
#ifdef FACEKEY_HAVE_UINPUT
    if (fd_ >= 0) {
        ::ioctl(fd_, UI_DEV_DESTROY);
        ::close(fd_);
    }
#endif
}

void PlatformSink::deliver(const KeyEvent& event) {
#ifdef FACEKEY_HAVE_UINPUT
    const auto code = key_code(event.key);
    if (!code) throw SinkError("no platform key code for '" + event.key + "'");
    input_event ev[2]{};
    ev[0].type = EV_KEY;
    ev[0].code = static_cast<unsigned short>(*code);
    ev[0].value = event.edge == Edge::Down ? 1 : 0;
    ev[1].type = EV_SYN;
    ev[1].code = SYN_REPORT;
    if (::write(fd_, ev, sizeof ev) != static_cast<ssize_t>(sizeof ev)) throw SinkError("uinput write failed");
#else
    (void)event;
#endif
}

DeliveryResult sink_deliver(std::vector<KeyEvent> events, KeySink& sink) {
    std::stable_sort(events.begin(), events.end(),
                     [](const KeyEvent& a, const KeyEvent& b) { return a.timestamp_ms < b.timestamp_ms; });
    DeliveryResult result;
    try {
        for (const auto& ev : events) {
            sink.deliver(ev);
            ++result.delivered;
        }
        sink.flush();
    } catch (const SinkError& e) {
        result.error = e.what();
    }
    return result;
}

void EventScheduler::schedule(std::vector<KeyEvent> events) {
    for (auto& ev : events) heap_.push({std::move(ev), seq_++});
}

std::vector<KeyEvent> EventScheduler::take_due(std::int64_t now_ms) {
    std::vector<KeyEvent> due;
    while (!heap_.empty() && heap_.top().event.timestamp_ms <= now_ms) {
        due.push_back(heap_.top().event);
        heap_.pop();
    }
    return due;
}

std::vector<KeyEvent> EventScheduler::take_all() {
    std::vector<KeyEvent> all;
    while (!heap_.empty()) {
        all.push_back(heap_.top().event);
        heap_.pop();
    }
    return all;
}

std::optional<std::int64_t> EventScheduler::next_due() const {
    if (heap_.empty()) return std::nullopt;
    return heap_.top().event.timestamp_ms;
}

TimedDispatcher::TimedDispatcher(KeySink& sink, ErrorHandler on_error)
    : sink_(sink), on_error_(std::move(on_error)), thread_([this] { run(); }) {}

TimedDispatcher::~TimedDispatcher() { shutdown(); }

void TimedDispatcher::anchor(std::int64_t stream_ms) {
    std::lock_guard lock(mutex_);
    if (!anchor_) anchor_.emplace(stream_ms, std::chrono::steady_clock::now());
}

void TimedDispatcher::schedule(std::vector<KeyEvent> events) {
    {
        std::lock_guard lock(mutex_);
        scheduler_.schedule(std::move(events));
    }
    cv_.notify_one();
}

void TimedDispatcher::shutdown() {
    {
        std::lock_guard lock(mutex_);
        if (stop_ && !thread_.joinable()) return;
        stop_ = true;
    }
    cv_.notify_one();
    if (thread_.joinable()) thread_.join();
}

void TimedDispatcher::run() {
    std::unique_lock lock(mutex_);
    while (true) {
        if (stop_) {
            auto rest = scheduler_.take_all();
            lock.unlock();
            if (auto r = sink_deliver(std::move(rest), sink_); r.error && on_error_) on_error_(*r.error);
            return;
        }
        const auto next = scheduler_.next_due();
        if (!next || !anchor_) {
            cv_.wait(lock);
            continue;
        }
        const auto due_at = anchor_->second + std::chrono::milliseconds(*next - anchor_->first);
        if (std::chrono::steady_clock::now() < due_at) {
            cv_.wait_until(lock, due_at);
            continue;
        }
        const auto now_stream =
            anchor_->first + std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - anchor_->second)
                                 .count();
        auto due = scheduler_.take_due(now_stream);
        lock.unlock();
        if (auto r = sink_deliver(std::move(due), sink_); r.error && on_error_) on_error_(*r.error);
        lock.lock();
    }
}

}  // namespace facekey
