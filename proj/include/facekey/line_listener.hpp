#pragma once

#include <atomic>
#include <functional>
#include <string>
#include <string_view>
#include <thread>

namespace facekey {

// Listens on a local endpoint and hands every received text line to a
// callback. One writer connection is served at a time; on_connect fires for
// each new connection so line parsers can reset per-connection state.
//
// Endpoint syntax: "tcp:HOST:PORT", "HOST:PORT", or "unix:/path/to.sock".
// Port 0 binds an ephemeral port; see port().
class LineListener {
public:
    using LineHandler = std::function<void(std::string_view)>;
    using ConnectHandler = std::function<void()>;

    LineListener(const std::string& endpoint, LineHandler on_line, ConnectHandler on_connect = {});
    ~LineListener();

    LineListener(const LineListener&) = delete;
    LineListener& operator=(const LineListener&) = delete;

    int port() const { return port_; }
    void stop();

private:
    void run();

    int listen_fd_ = -1;
    int port_ = 0;
    std::string unix_path_;
    LineHandler on_line_;
    ConnectHandler on_connect_;
    std::atomic<bool> stop_{false};
    std::thread thread_;
};

}  // namespace facekey
