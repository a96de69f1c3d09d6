#include "facekey/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "facekey/errors.hpp"
#include "facekey/line_listener.hpp"

namespace facekey {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view text, const std::string& column, std::int64_t row) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw RecordParseError(column, row, "malformed number '" + std::string(text) + "'");
    if (!std::isfinite(value)) throw RecordParseError(column, row, "non-finite value");
    return value;
}

}  // namespace

std::vector<std::string> split_record(std::string_view line) {
    std::vector<std::string> fields;
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

TrackerHeader TrackerHeader::resolve(std::span<const std::string> columns) {
    TrackerHeader h;
    h.width = columns.size();
    std::optional<std::size_t> frame, timestamp, confidence;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        const std::string_view name = trim(columns[i]);
        h.names.emplace_back(name);
        if (name == "frame") {
            frame = i;
        } else if (name == "timestamp") {
            timestamp = i;
        } else if (name == "confidence") {
            confidence = i;
        } else if (name.size() == 6 && name.substr(0, 2) == "AU" && name[4] == '_') {
            int number = 0;
            const auto [ptr, ec] = std::from_chars(name.data() + 2, name.data() + 4, number);
            if (ec != std::errc{} || ptr != name.data() + 4) continue;
            const auto au = AuId::from_number(number);
            if (!au) continue;
            if (name[5] == 'r') h.intensity_col[au->index()] = i;
            if (name[5] == 'c') h.presence_col[au->index()] = i;
        }
    }
    std::string missing;
    if (!frame) missing += " frame";
    if (!timestamp) missing += " timestamp";
    if (!confidence) missing += " confidence";
    if (!missing.empty()) throw HeaderError("tracker header missing mandatory column(s):" + missing);
    h.frame_col = *frame;
    h.timestamp_col = *timestamp;
    h.confidence_col = *confidence;
    return h;
}

AUFrame parse_tracker_record(const TrackerHeader& header, std::span<const std::string> row,
                             std::int64_t row_index) {
    if (row.size() != header.width)
        throw RecordParseError("*", row_index,
                               "expected " + std::to_string(header.width) + " fields, got " +
                                   std::to_string(row.size()));
    AUFrame frame;
    const double index = parse_number(row[header.frame_col], "frame", row_index);
    if (index < 0 || index != std::floor(index))
        throw RecordParseError("frame", row_index, "frame must be a non-negative integer");
    frame.frame_index = static_cast<std::int64_t>(index);

    const double seconds = parse_number(row[header.timestamp_col], "timestamp", row_index);
    if (seconds < 0) throw RecordParseError("timestamp", row_index, "negative timestamp");
    frame.timestamp_ms = std::llround(seconds * 1000.0);

    const double confidence = parse_number(row[header.confidence_col], "confidence", row_index);
    frame.confidence = static_cast<float>(std::clamp(confidence, 0.0, 1.0));

    for (std::size_t i = 0; i < kAuCount; ++i) {
        const auto au = AuId::from_index(i);
        if (const auto col = header.intensity_col[i]) {
            const double v = parse_number(row[*col], header.names[*col], row_index);
            frame.set_intensity(au, static_cast<float>(std::clamp(v, 0.0, 5.0)));
        }
        if (const auto col = header.presence_col[i]) {
            frame.set_present(au, parse_number(row[*col], header.names[*col], row_index) >= 0.5);
        }
    }
    return frame;
}

AUFrame parse_tracker_record(std::span<const std::string> header, std::span<const std::string> row,
                             std::int64_t row_index) {
    if (header.size() != row.size())
        throw RecordParseError("*", row_index, "header and row lengths differ");
    return parse_tracker_record(TrackerHeader::resolve(header), row, row_index);
}

std::string tracker_header_line() {
    std::string line = "frame,timestamp,confidence";
    for (std::size_t i = 0; i < kAuCount; ++i) line += "," + AuId::from_index(i).label() + "_r";
    for (std::size_t i = 0; i < kAuCount; ++i) line += "," + AuId::from_index(i).label() + "_c";
    return line;
}

std::string serialize_tracker_record(const AUFrame& frame) {
    std::string line;
    line.reserve(256);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%lld,%lld.%03lld,%.6f", static_cast<long long>(frame.frame_index),
                  static_cast<long long>(frame.timestamp_ms / 1000),
                  static_cast<long long>(frame.timestamp_ms % 1000), static_cast<double>(frame.confidence));
    line += buf;
    for (std::size_t i = 0; i < kAuCount; ++i) {
        std::snprintf(buf, sizeof buf, ",%.6f", static_cast<double>(frame.intensity_lanes[i]));
        line += buf;
    }
    for (std::size_t i = 0; i < kAuCount; ++i) line += frame.present(AuId::from_index(i)) ? ",1" : ",0";
    return line;
}

// ---------------------------------------------------------------------------

NextFrame FrameStream::next_frame(std::optional<std::chrono::milliseconds> timeout) {
    while (true) {
        NextFrame raw = read_raw(timeout);
        auto* frame = std::get_if<AUFrame>(&raw);
        if (!frame) return raw;
        if (last_index_ && frame->frame_index <= *last_index_) {
            report(StreamErrorKind::StreamOrder, "frame " + std::to_string(frame->frame_index) +
                                                     " not after " + std::to_string(*last_index_) +
                                                     "; dropped");
            continue;
        }
        last_index_ = frame->frame_index;
        return raw;
    }
}

void FrameStream::report(StreamErrorKind kind, std::string message) {
    std::lock_guard lock(errors_mutex_);
    ++error_count_;
    errors_.push_back({kind, std::move(message)});
}

std::vector<StreamError> FrameStream::drain_errors() {
    std::lock_guard lock(errors_mutex_);
    return std::exchange(errors_, {});
}

std::optional<AUFrame> RecordStream::read_record() {
    std::string line;
    while (std::getline(in_, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_record(line);
        if (!header_) {
            try {
                header_ = TrackerHeader::resolve(fields);
            } catch (const HeaderError& e) {
                throw SourceOpenError(e.what());
            }
            continue;
        }
        const auto row = row_++;
        try {
            return parse_tracker_record(*header_, fields, row);
        } catch (const RecordParseError& e) {
            report(StreamErrorKind::RecordParse, e.what());
        }
    }
    return std::nullopt;
}

NextFrame RecordStream::read_raw(std::optional<std::chrono::milliseconds>) {
    if (auto frame = read_record()) return *frame;
    return EndOfStream{};
}

NextFrame VectorStream::read_raw(std::optional<std::chrono::milliseconds>) {
    if (pos_ >= frames_.size()) return EndOfStream{};
    return frames_[pos_++];
}

// ---------------------------------------------------------------------------

bool FrameQueue::push(const AUFrame& frame) {
    bool kept_all = true;
    {
        std::lock_guard lock(mutex_);
        if (closed_) return false;
        if (frames_.size() >= capacity_) {
            frames_.pop_front();
            ++dropped_;
            kept_all = false;
        }
        frames_.push_back(frame);
    }
    cv_.notify_one();
    return kept_all;
}

std::optional<AUFrame> FrameQueue::pop(std::optional<std::chrono::milliseconds> timeout) {
    std::unique_lock lock(mutex_);
    const auto ready = [&] { return !frames_.empty() || closed_; };
    if (timeout) {
        if (!cv_.wait_for(lock, *timeout, ready)) return std::nullopt;
    } else {
        cv_.wait(lock, ready);
    }
    if (frames_.empty()) return std::nullopt;
    AUFrame f = frames_.front();
    frames_.pop_front();
    return f;
}

void FrameQueue::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool FrameQueue::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

std::uint64_t FrameQueue::dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
}

namespace {

class ReplayFileStream final : public RecordStream {
public:
    ReplayFileStream(std::unique_ptr<std::ifstream> file, const StreamSource& source)
        : RecordStream(*file), file_(std::move(file)), fps_(source.fps_override), paced_(source.paced) {}

protected:
    NextFrame read_raw(std::optional<std::chrono::milliseconds>) override {
        auto frame = read_record();
        if (!frame) return EndOfStream{};
        if (paced_) {
            const auto now = std::chrono::steady_clock::now();
            if (!start_) {
                start_ = now;
                first_ts_ = frame->timestamp_ms;
            }
            std::chrono::steady_clock::time_point due;
            if (fps_) {
                due = *start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(static_cast<double>(delivered_) / *fps_));
            } else {
                due = *start_ + std::chrono::milliseconds(frame->timestamp_ms - first_ts_);
            }
            std::this_thread::sleep_until(due);
        }
        ++delivered_;
        return *frame;
    }

private:
    std::unique_ptr<std::ifstream> file_;
    std::optional<double> fps_;
    bool paced_;
    std::optional<std::chrono::steady_clock::time_point> start_;
    std::int64_t first_ts_ = 0;
    std::uint64_t delivered_ = 0;
};

class StdinStream final : public RecordStream {
public:
    StdinStream() : RecordStream(std::cin) {}
};

}  // namespace

SocketStream::SocketStream(const std::string& endpoint)
    : listener_(std::make_unique<LineListener>(
          endpoint, [this](std::string_view line) { on_line(line); }, [this] { header_.reset(); })) {}

SocketStream::~SocketStream() {
    listener_->stop();
    queue_.close();
}

int SocketStream::port() const { return listener_->port(); }

NextFrame SocketStream::read_raw(std::optional<std::chrono::milliseconds> timeout) {
    if (auto f = queue_.pop(timeout)) return *f;
    if (queue_.closed()) return EndOfStream{};
    return Timeout{};
}

void SocketStream::on_line(std::string_view line) {
    if (trim(line).empty()) return;
    const auto fields = split_record(line);
    if (!header_) {
        try {
            header_ = TrackerHeader::resolve(fields);
        } catch (const HeaderError& e) {
            report(StreamErrorKind::RecordParse, e.what());
        }
        return;
    }
    try {
        if (!queue_.push(parse_tracker_record(*header_, fields, row_++)))
            report(StreamErrorKind::Overflow, "live queue full; oldest frame dropped");
    } catch (const RecordParseError& e) {
        report(StreamErrorKind::RecordParse, e.what());
    }
}

std::unique_ptr<FrameStream> open_stream(const StreamSource& source) {
    switch (source.kind) {
        case SourceKind::ReplayFile: {
            auto file = std::make_unique<std::ifstream>(source.locator);
            if (!*file) throw SourceOpenError("cannot open replay file '" + source.locator + "'");
            if (source.fps_override && !(*source.fps_override > 0))
                throw SourceOpenError("fps override must be positive");
            return std::make_unique<ReplayFileStream>(std::move(file), source);
        }
        case SourceKind::StandardInput:
            return std::make_unique<StdinStream>();
        case SourceKind::LiveSocket:
            return std::make_unique<SocketStream>(source.locator);
    }
    throw SourceOpenError("unknown source kind");
}

}  // namespace facekey
