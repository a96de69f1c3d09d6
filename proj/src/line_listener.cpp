#include "facekey/line_listener.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "facekey/errors.hpp"

namespace facekey {
namespace {

constexpr int kPollMs = 50;

int open_tcp(const std::string& host_port, int& bound_port) {
    const auto colon = host_port.rfind(':');
    if (colon == std::string::npos) throw SourceOpenError("endpoint '" + host_port + "' lacks a port");
    const std::string host = host_port.substr(0, colon);
    const std::string port = host_port.substr(colon + 1);

    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.empty() ? "127.0.0.1" : host.c_str(), port.c_str(), &hints, &res) != 0 || !res)
        throw SourceOpenError("cannot resolve endpoint '" + host_port + "'");

    const int fd = ::socket(res->ai_family, res->ai_socktype, 0);
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const bool ok = fd >= 0 && ::bind(fd, res->ai_addr, res->ai_addrlen) == 0 && ::listen(fd, 4) == 0;
    freeaddrinfo(res);
    if (!ok) {
        const std::string why = std::strerror(errno);
        if (fd >= 0) ::close(fd);
        throw SourceOpenError("cannot listen on '" + host_port + "': " + why);
    }
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    bound_port = ntohs(addr.sin_port);
    return fd;
}

int open_unix(const std::string& path) {
    sockaddr_un addr{};
    if (path.size() >= sizeof addr.sun_path) throw SourceOpenError("socket path too long: " + path);
    addr.sun_family = AF_UNIX;
    std::strncpy(addr.sun_path, path.c_str(), sizeof addr.sun_path - 1);
    ::unlink(path.c_str());
    const int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd < 0 || ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 4) != 0) {
        const std::string why = std::strerror(errno);
        if (fd >= 0) ::close(fd);
        throw SourceOpenError("cannot listen on unix socket '" + path + "': " + why);
    }
    return fd;
}

}  // namespace

LineListener::LineListener(const std::string& endpoint, LineHandler on_line, ConnectHandler on_connect)
    : on_line_(std::move(on_line)), on_connect_(std::move(on_connect)) {
    if (endpoint.rfind("unix:", 0) == 0) {
        unix_path_ = endpoint.substr(5);
        listen_fd_ = open_unix(unix_path_);
    } else {
        listen_fd_ = open_tcp(endpoint.rfind("tcp:", 0) == 0 ? endpoint.substr(4) : endpoint, port_);
    }
    thread_ = std::thread([this] { run(); });
}

LineListener::~LineListener() { stop(); }

void LineListener::stop() {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        if (!unix_path_.empty()) ::unlink(unix_path_.c_str());
    }
}

void LineListener::run() {
    while (!stop_) {
        pollfd lp{listen_fd_, POLLIN, 0};
        if (::poll(&lp, 1, kPollMs) <= 0) continue;
        const int conn = ::accept(listen_fd_, nullptr, nullptr);
        if (conn < 0) continue;
        if (on_connect_) on_connect_();

        std::string pending;
        char buf[4096];
        while (!stop_) {
            pollfd cp{conn, POLLIN, 0};
            const int r = ::poll(&cp, 1, kPollMs);
            if (r < 0) break;
            if (r == 0) continue;
            const ssize_t n = ::recv(conn, buf, sizeof buf, 0);
            if (n <= 0) break;
            pending.append(buf, static_cast<std::size_t>(n));
            std::size_t start = 0;
            for (auto nl = pending.find('\n', start); nl != std::string::npos; nl = pending.find('\n', start)) {
                on_line_(std::string_view(pending).substr(start, nl - start));
                start = nl + 1;
            }
            pending.erase(0, start);
        }
        if (!pending.empty()) on_line_(pending);
        ::close(conn);
    }
}

}  // namespace facekey
