#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include "doctest.h"
#include "facekey/errors.hpp"
#include "facekey/ingest.hpp"
#include "support.hpp"

using namespace facekey;

namespace {

AuId au(int n) { return *AuId::from_number(n); }

std::vector<std::string> header_cols(const std::string& line) { return split_record(line); }

// Strictly-increasing filter: keep an index only if it exceeds the last kept.
std::vector<std::int64_t> increasing_filter(const std::vector<std::int64_t>& in) {
    std::vector<std::int64_t> out;
    for (const auto x : in)
        if (out.empty() || x > out.back()) out.push_back(x);
    return out;
}

std::vector<std::int64_t> drain_indices(FrameStream& s) {
    std::vector<std::int64_t> out;
    while (true) {
        auto n = s.next_frame();
        if (auto* f = std::get_if<AUFrame>(&n)) out.push_back(f->frame_index);
        else break;
    }
    return out;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("facekey_test_" + std::to_string(::getpid()) + "_" + name);
}

void write_records(const std::filesystem::path& path, int count) {
    std::ofstream out(path);
    out << tracker_header_line() << '\n';
    for (int i = 0; i < count; ++i) out << serialize_tracker_record(test::make_frame(i, {{6, 1.0f}})) << '\n';
}

int connect_tcp(int port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    return fd;
}

void send_all(int fd, const std::string& data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const auto n = ::send(fd, data.data() + sent, data.size() - sent, 0);
        REQUIRE(n > 0);
        sent += static_cast<std::size_t>(n);
    }
}

}  // namespace

TEST_CASE("happiness-like row parses intensities") {
    const auto header = header_cols("frame,timestamp,confidence,AU06_r,AU12_r,AU06_c,AU12_c");
    const auto row = header_cols("3,0.100,0.98,2.5,2.4,1,1");
    const auto f = parse_tracker_record(header, row);
    CHECK(f.frame_index == 3);
    CHECK(f.timestamp_ms == 100);
    CHECK(f.confidence == doctest::Approx(0.98));
    CHECK(f.intensity(au(6)) == doctest::Approx(2.5));
    CHECK(f.intensity(au(12)) == doctest::Approx(2.4));
    CHECK(f.present(au(6)));
    CHECK(f.intensity(au(1)) == 0.0f);
    CHECK_FALSE(f.present(au(1)));
}

TEST_CASE("all-zero row is neutral") {
    const auto header = split_record(tracker_header_line());
    std::vector<std::string> row(header.size(), "0");
    const auto f = parse_tracker_record(header, row);
    CHECK(f.presence_bits == 0u);
    for (std::size_t i = 0; i < kAuCount; ++i) CHECK(f.intensity(AuId::from_index(i)) == 0.0f);
}

TEST_CASE("intensity and confidence are clamped") {
    const auto header = header_cols("frame,timestamp,confidence,AU01_r,AU02_r");
    const auto f = parse_tracker_record(header, header_cols("0,0,1.7,5.7,-0.3"));
    CHECK(f.intensity(au(1)) == 5.0f);
    CHECK(f.intensity(au(2)) == 0.0f);
    CHECK(f.confidence == 1.0f);
}

TEST_CASE("presence threshold is 0.5 inclusive") {
    const auto header = header_cols("frame,timestamp,confidence,AU04_c,AU15_c");
    const auto f = parse_tracker_record(header, header_cols("0,0,1,0.5,0.49"));
    CHECK(f.present(au(4)));
    CHECK_FALSE(f.present(au(15)));
}

TEST_CASE("OpenFace header with spaces and unused columns") {
    const std::string header =
        "frame, face_id, timestamp, confidence, success, AU01_r, AU45_r, AU28_c, AU45_c, gaze_0_x";
    const std::string row = "12, 0, 0.367, 0.975, 1, 0.81, 1.20, 1.00, 0.00, 0.1";
    const auto f = parse_tracker_record(split_record(header), split_record(row));
    CHECK(f.frame_index == 12);
    CHECK(f.timestamp_ms == 367);
    CHECK(f.intensity(au(1)) == doctest::Approx(0.81));
    CHECK(f.intensity(au(45)) == doctest::Approx(1.2));
    CHECK(f.present(au(28)));
    CHECK_FALSE(f.present(au(45)));
    CHECK(f.intensity(au(28)) == 0.0f);
}

TEST_CASE("malformed numeric field names column and row") {
    const auto header = header_cols("frame,timestamp,confidence,AU06_r");
    try {
        parse_tracker_record(header, header_cols("1,0.1,0.9,abc"), 41);
        FAIL("expected RecordParseError");
    } catch (const RecordParseError& e) {
        CHECK(e.column() == "AU06_r");
        CHECK(e.row_index() == 41);
    }
    CHECK_THROWS_AS(parse_tracker_record(header, header_cols("1,0.1,0.9,nan"), 0), RecordParseError);
    CHECK_THROWS_AS(parse_tracker_record(header, header_cols("1,0.1,0.9"), 0), RecordParseError);
    CHECK_THROWS_AS(parse_tracker_record(header, header_cols("-1,0.1,0.9,1"), 0), RecordParseError);
}

TEST_CASE("missing mandatory column is a header error") {
    CHECK_THROWS_AS(TrackerHeader::resolve(header_cols("frame,confidence,AU06_r")), HeaderError);
    CHECK_THROWS_AS(TrackerHeader::resolve(header_cols("timestamp,confidence")), HeaderError);
}

TEST_CASE("property: parse of serialize reproduces the frame") {
    std::mt19937_64 rng(7);
    const auto header = split_record(tracker_header_line());
    for (int i = 0; i < 1000; ++i) {
        const auto f = test::random_frame(rng, i);
        const auto g = parse_tracker_record(header, split_record(serialize_tracker_record(f)));
        REQUIRE(g.frame_index == f.frame_index);
        REQUIRE(g.timestamp_ms == f.timestamp_ms);
        REQUIRE(g.presence_bits == f.presence_bits);
        REQUIRE(std::fabs(g.confidence - f.confidence) <= 1e-6f);
        for (std::size_t a = 0; a < kAuLanes; ++a)
            REQUIRE(std::fabs(g.intensity_lanes[a] - f.intensity_lanes[a]) <= 1e-6f);
        // A second round trip is exact.
        REQUIRE(parse_tracker_record(header, split_record(serialize_tracker_record(g))) == g);
    }
}

TEST_CASE("property: clamping totality for finite inputs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> wide(-1e6, 1e6);
    std::uniform_real_distribution<double> near(-2.0, 7.0);
    const auto header = split_record(tracker_header_line());
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::string> row{std::to_string(i), "1.5", std::to_string(i % 2 ? wide(rng) : near(rng))};
        for (std::size_t a = 0; a < kAuCount; ++a) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.9g", i % 3 ? near(rng) : wide(rng));
            row.emplace_back(buf);
        }
        for (std::size_t a = 0; a < kAuCount; ++a) row.emplace_back(std::to_string(near(rng)));
        const auto f = parse_tracker_record(header, row);
        REQUIRE(f.confidence >= 0.0f);
        REQUIRE(f.confidence <= 1.0f);
        for (const float v : f.intensity_lanes) {
            REQUIRE(v >= 0.0f);
            REQUIRE(v <= 5.0f);
        }
    }
}

TEST_CASE("stream ordering drops duplicates and regressions") {
    SUBCASE("5,5,6") {
        VectorStream s({test::make_frame(5, {}), test::make_frame(5, {}), test::make_frame(6, {})});
        CHECK(drain_indices(s) == std::vector<std::int64_t>{5, 6});
        const auto errors = s.drain_errors();
        REQUIRE(errors.size() == 1);
        CHECK(errors[0].kind == StreamErrorKind::StreamOrder);
    }
    SUBCASE("5,4,6") {
        VectorStream s({test::make_frame(5, {}), test::make_frame(4, {}), test::make_frame(6, {})});
        CHECK(drain_indices(s) == std::vector<std::int64_t>{5, 6});
        CHECK(s.drain_errors().size() == 1);
    }
    SUBCASE("after the last record the stream ends") {
        VectorStream s({test::make_frame(0, {})});
        CHECK(std::holds_alternative<AUFrame>(s.next_frame()));
        CHECK(std::holds_alternative<EndOfStream>(s.next_frame()));
        CHECK(std::holds_alternative<EndOfStream>(s.next_frame()));
    }
}

TEST_CASE("property: delivered indices equal the increasing-filter oracle") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> len(0, 40);
    std::uniform_int_distribution<std::int64_t> idx(0, 30);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::int64_t> input(static_cast<std::size_t>(len(rng)));
        for (auto& x : input) x = idx(rng);
        std::vector<AUFrame> frames;
        for (const auto x : input) frames.push_back(test::make_frame(x, {}));
        VectorStream s(frames);
        const auto got = drain_indices(s);
        const auto expected = increasing_filter(input);
        REQUIRE(got == expected);
        REQUIRE(s.drain_errors().size() == input.size() - expected.size());
    }
}

TEST_CASE("replay file yields every record then end-of-stream") {
    const auto path = temp_path("replay300.csv");
    write_records(path, 300);
    auto s = open_stream({SourceKind::ReplayFile, path.string(), std::nullopt, false});
    CHECK(drain_indices(*s).size() == 300);
    std::filesystem::remove(path);
}

TEST_CASE("replay with fps override paces playback") {
    const auto path = temp_path("replay_fps.csv");
    write_records(path, 30);
    auto s = open_stream({SourceKind::ReplayFile, path.string(), 30.0, true});
    const auto start = std::chrono::steady_clock::now();
    CHECK(drain_indices(*s).size() == 30);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // 30 frames at 30 fps: 1 s, within one frame period.
    CHECK(elapsed == doctest::Approx(1.0).epsilon(1.0 / 30.0 + 0.01));
    std::filesystem::remove(path);
}

TEST_CASE("replay of an unreadable file is a source-open error") {
    CHECK_THROWS_AS(open_stream({SourceKind::ReplayFile, "/nonexistent/frames.csv", std::nullopt, true}),
                    SourceOpenError);
}

TEST_CASE("malformed rows in a record stream are reported and skipped") {
    std::istringstream in("frame,timestamp,confidence,AU06_r\n0,0,1,1\n1,0.033,1,bad\n2,0.066,1,2\n");
    RecordStream s(in);
    CHECK(drain_indices(s) == std::vector<std::int64_t>{0, 2});
    const auto errors = s.drain_errors();
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].kind == StreamErrorKind::RecordParse);
}

TEST_CASE("frame queue drops oldest on overflow") {
    FrameQueue q(64);
    for (int i = 0; i < 70; ++i) q.push(test::make_frame(i, {}));
    CHECK(q.dropped() == 6);
    const auto first = q.pop(std::chrono::milliseconds(0));
    REQUIRE(first);
    CHECK(first->frame_index == 6);
}

TEST_CASE("live socket blocks until data or timeout, then delivers records") {
    SocketStream s("tcp:127.0.0.1:0");
    REQUIRE(s.port() > 0);
    CHECK(std::holds_alternative<Timeout>(s.next_frame(std::chrono::milliseconds(100))));

    const int fd = connect_tcp(s.port());
    std::string payload = tracker_header_line() + "\n";
    for (int i = 0; i < 3; ++i) payload += serialize_tracker_record(test::make_frame(i, {{12, 3.0f}})) + "\n";
    send_all(fd, payload);

    std::vector<AUFrame> got;
    for (int tries = 0; tries < 50 && got.size() < 3; ++tries)
        if (auto n = s.next_frame(std::chrono::milliseconds(100)); std::holds_alternative<AUFrame>(n))
            got.push_back(std::get<AUFrame>(n));
    ::close(fd);
    REQUIRE(got.size() == 3);
    CHECK(got[2].frame_index == 2);
    CHECK(got[0].intensity(au(12)) == doctest::Approx(3.0));
}

TEST_CASE("live unix socket") {
    const auto path = temp_path("live.sock");
    SocketStream s("unix:" + path.string());
    const int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    std::strncpy(addr.sun_path, path.c_str(), sizeof addr.sun_path - 1);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    send_all(fd, tracker_header_line() + "\n" + serialize_tracker_record(test::make_frame(9, {})) + "\n");
    NextFrame n = Timeout{};
    for (int tries = 0; tries < 50 && std::holds_alternative<Timeout>(n); ++tries)
        n = s.next_frame(std::chrono::milliseconds(100));
    ::close(fd);
    REQUIRE(std::holds_alternative<AUFrame>(n));
    CHECK(std::get<AUFrame>(n).frame_index == 9);
}

TEST_CASE("unbindable live endpoint is a source-open error") {
    CHECK_THROWS_AS(SocketStream("tcp:256.1.1.1:1"), SourceOpenError);
}
