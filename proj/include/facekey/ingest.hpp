#pragma once

// Tracker record parsing and AU frame streams (replay file, live socket,
// standard input). Record layout follows OpenFace 2.0 CSV output: a header
// row naming `frame`, `timestamp` (seconds), `confidence`, `AUxx_r`
// (intensity) and `AUxx_c` (presence) columns.

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <cstdint>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "facekey/au_frame.hpp"

namespace facekey {

std::vector<std::string> split_record(std::string_view line);

// Column positions resolved once per header.
struct TrackerHeader {
    std::size_t width = 0;
    std::size_t frame_col = 0;
    std::size_t timestamp_col = 0;
    std::size_t confidence_col = 0;
    std::array<std::optional<std::size_t>, kAuCount> intensity_col{};
    std::array<std::optional<std::size_t>, kAuCount> presence_col{};
    std::vector<std::string> names;

    // Throws HeaderError when frame/timestamp/confidence are missing.
    static TrackerHeader resolve(std::span<const std::string> columns);
};

AUFrame parse_tracker_record(const TrackerHeader& header, std::span<const std::string> row,
                             std::int64_t row_index = 0);
AUFrame parse_tracker_record(std::span<const std::string> header, std::span<const std::string> row,
                             std::int64_t row_index = 0);

// Full-width header written by serialize_tracker_record (all 18 AUs, _r and _c).
std::string tracker_header_line();
std::string serialize_tracker_record(const AUFrame& frame);

enum class SourceKind { ReplayFile, LiveSocket, StandardInput };

struct StreamSource {
    SourceKind kind = SourceKind::ReplayFile;
    std::string locator;                 // file path, "tcp:host:port" / "unix:path", or empty for stdin
    std::optional<double> fps_override;  // replay pacing in frames per second
    bool paced = true;                   // replay only; false streams as fast as possible
};

enum class StreamErrorKind { StreamOrder, RecordParse, Overflow };

struct StreamError {
    StreamErrorKind kind;
    std::string message;
};

struct EndOfStream {};
struct Timeout {};
using NextFrame = std::variant<AUFrame, EndOfStream, Timeout>;

// Single-consumer frame source. Enforces strictly increasing frame_index:
// duplicates and regressions are dropped and reported through drain_errors().
class FrameStream {
public:
    virtual ~FrameStream() = default;

    NextFrame next_frame(std::optional<std::chrono::milliseconds> timeout = std::nullopt);
    std::vector<StreamError> drain_errors();
    std::uint64_t error_count() const { return error_count_; }

protected:
    virtual NextFrame read_raw(std::optional<std::chrono::milliseconds> timeout) = 0;
    void report(StreamErrorKind kind, std::string message);

private:
    std::optional<std::int64_t> last_index_;
    std::mutex errors_mutex_;
    std::vector<StreamError> errors_;
    std::atomic<std::uint64_t> error_count_{0};
};

// Parses newline-delimited records from an istream; first line is the header.
class RecordStream : public FrameStream {
public:
    explicit RecordStream(std::istream& in) : in_(in) {}

protected:
    NextFrame read_raw(std::optional<std::chrono::milliseconds> timeout) override;
    std::optional<AUFrame> read_record();

private:
    std::istream& in_;
    std::optional<TrackerHeader> header_;
    std::int64_t row_ = 0;
};

// In-memory frames, mainly for simulation and tests.
class VectorStream : public FrameStream {
public:
    explicit VectorStream(std::vector<AUFrame> frames) : frames_(std::move(frames)) {}

protected:
    NextFrame read_raw(std::optional<std::chrono::milliseconds>) override;

private:
    std::vector<AUFrame> frames_;
    std::size_t pos_ = 0;
};

// Bounded hand-off queue for live sources: drop-oldest on overflow.
class FrameQueue {
public:
    explicit FrameQueue(std::size_t capacity = 64) : capacity_(capacity) {}

    // Returns false when an older frame had to be dropped.
    bool push(const AUFrame& frame);
    std::optional<AUFrame> pop(std::optional<std::chrono::milliseconds> timeout);
    void close();
    bool closed() const;
    std::uint64_t dropped() const;

private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<AUFrame> frames_;
    std::uint64_t dropped_ = 0;
    bool closed_ = false;
};

class LineListener;

// Live source: listens on a local endpoint; each writer connection sends a
// header line followed by records. A listener thread parses lines and hands
// frames over through a 64-frame drop-oldest queue.
class SocketStream final : public FrameStream {
public:
    explicit SocketStream(const std::string& endpoint);
    ~SocketStream() override;

    int port() const;
    std::uint64_t dropped() const { return queue_.dropped(); }

protected:
    NextFrame read_raw(std::optional<std::chrono::milliseconds> timeout) override;

private:
    void on_line(std::string_view line);

    FrameQueue queue_{64};
    std::optional<TrackerHeader> header_;
    std::int64_t row_ = 0;
    std::unique_ptr<LineListener> listener_;
};

// Throws SourceOpenError.
std::unique_ptr<FrameStream> open_stream(const StreamSource& source);

}  // namespace facekey
