#include "phg/service/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

namespace phg::service {

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
        throw std::invalid_argument("expected host:port, got '" + std::string(text) + "'");
    }
    unsigned port = 0;
    const auto digits = text.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || port > 65535) {
        throw std::invalid_argument("invalid port in '" + std::string(text) + "'");
    }
    return Endpoint{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

Socket::~Socket() {
    if (fd_ >= 0) ::close(fd_);
}

void Socket::shutdown() noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Socket connect_tcp(const Endpoint& ep) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const auto port = std::to_string(ep.port);
    if (const int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw NetError("resolve " + ep.to_string() + ": " + ::gai_strerror(rc));
    }
    std::string last_error = "no addresses";
    for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
        Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
        if (!s.valid()) {
            last_error = errno_text("socket");
            continue;
        }
        if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
            const int one = 1;
            ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            ::freeaddrinfo(res);
            return s;
        }
        last_error = errno_text("connect");
    }
    ::freeaddrinfo(res);
    throw NetError("connect " + ep.to_string() + ": " + last_error);
}

Listener::Listener(const Endpoint& ep) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const auto port = std::to_string(ep.port);
    const char* host = ep.host.empty() ? nullptr : ep.host.c_str();
    if (const int rc = ::getaddrinfo(host, port.c_str(), &hints, &res); rc != 0) {
        throw NetError("resolve " + ep.to_string() + ": " + ::gai_strerror(rc));
    }
    std::string last_error = "no addresses";
    for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
        Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
        if (!s.valid()) continue;
        const int one = 1;
        ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(s.fd(), ai->ai_addr, ai->ai_addrlen) != 0 || ::listen(s.fd(), 64) != 0) {
            last_error = errno_text("bind/listen");
            continue;
        }
        sockaddr_storage bound{};
        socklen_t len = sizeof bound;
        ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
        port_ = bound.ss_family == AF_INET6
                    ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
                    : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
        socket_ = std::move(s);
        break;
    }
    ::freeaddrinfo(res);
    if (!socket_.valid()) throw NetError("listen " + ep.to_string() + ": " + last_error);
}

std::optional<Socket> Listener::accept() {
    while (true) {
        const int fd = ::accept(socket_.fd(), nullptr, nullptr);
        if (fd >= 0) {
            const int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return Socket(fd);
        }
        if (errno == EINTR || errno == ECONNABORTED) continue;
        return std::nullopt;
    }
}

void Listener::close() noexcept { socket_.shutdown(); }

LineChannel::LineChannel(Socket socket, TranscriptSink transcript)
    : socket_(std::move(socket)), transcript_(std::move(transcript)) {}

std::optional<std::string> LineChannel::read_line() {
    while (true) {
        const auto nl = buffer_.find('\n', scanned_);
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            if (transcript_) transcript_(Direction::Received, std::string_view(buffer_).substr(0, nl + 1));
            buffer_.erase(0, nl + 1);
            scanned_ = 0;
            if (line.size() > kMaxLineBytes) {
                throw WireError(WireError::Kind::Oversize, "incoming line exceeds 1 MiB");
            }
            return line;
        }
        scanned_ = buffer_.size();
        if (buffer_.size() > kMaxLineBytes) {
            throw WireError(WireError::Kind::Oversize, "incoming line exceeds 1 MiB");
        }
        char chunk[16384];
        const auto n = ::recv(socket_.fd(), chunk, sizeof chunk, 0);
        if (n == 0) return std::nullopt;
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == ECONNRESET || errno == ENOTCONN || errno == EBADF) return std::nullopt;
            throw NetError(errno_text("recv"));
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::optional<WireMessage> LineChannel::receive() {
    auto line = read_line();
    if (!line) return std::nullopt;
    return decode_message(*line);
}

void LineChannel::write_line(std::string_view line) {
    std::lock_guard lock(write_mutex_);
    if (transcript_) transcript_(Direction::Sent, line);
    while (!line.empty()) {
        const auto n = ::send(socket_.fd(), line.data(), line.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw NetError(errno_text("send"));
        }
        line.remove_prefix(static_cast<std::size_t>(n));
    }
}

}  // namespace phg::service
