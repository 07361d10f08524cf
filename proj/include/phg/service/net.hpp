// Minimal blocking TCP transport carrying LF-delimited lines.
#pragma once

#include "phg/service/wire.hpp"

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace phg::service {

class NetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Direction { Sent, Received };

/// Observer of every line crossing a channel (including its LF).
using TranscriptSink = std::function<void(Direction, std::string_view)>;

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    /// "host:port"; throws std::invalid_argument.
    static Endpoint parse(std::string_view text);
    std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// Owning file descriptor.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket();

    int fd() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    /// Unblocks any thread waiting on this socket; safe to call concurrently.
    void shutdown() noexcept;

private:
    int fd_ = -1;
};

/// Throws NetError when the connection cannot be established.
Socket connect_tcp(const Endpoint& ep);

class Listener {
public:
    /// Binds and listens; port 0 picks an ephemeral port.
    explicit Listener(const Endpoint& ep);

    std::uint16_t port() const noexcept { return port_; }
    /// Blocks until a connection arrives; returns nullopt after close().
    std::optional<Socket> accept();
    void close() noexcept;

private:
    Socket socket_;
    std::uint16_t port_ = 0;
};

/// A connected socket with line framing. Reads are single-consumer; writes
/// may come from any thread.
class LineChannel {
public:
    explicit LineChannel(Socket socket, TranscriptSink transcript = {});

    /// Next line without its LF, or nullopt on orderly EOF. Throws
    /// WireError(Oversize) for lines over kMaxLineBytes and NetError on I/O
    /// failure.
    std::optional<std::string> read_line();
    /// Decoded next message, or nullopt on EOF.
    std::optional<WireMessage> receive();

    void write_line(std::string_view line);
    void send(const WireMessage& m) { write_line(encode_message(m)); }

    void shutdown() noexcept { socket_.shutdown(); }

private:
    Socket socket_;
    TranscriptSink transcript_;
    std::string buffer_;
    std::size_t scanned_ = 0;
    std::mutex write_mutex_;
};

}  // namespace phg::service
