#include "ringlm/net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <thread>
#include <unistd.h>

#include "ringlm/error.hpp"

namespace ringlm {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw NetError(what + ": " + std::strerror(errno));
}

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        // Not a dotted quad; resolve it.
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* result = nullptr;
        if (::getaddrinfo(host.c_str(), nullptr, &hints, &result) != 0 || result == nullptr) {
            throw NetError("cannot resolve host " + host);
        }
        addr.sin_addr = reinterpret_cast<sockaddr_in*>(result->ai_addr)->sin_addr;
        ::freeaddrinfo(result);
    }
    return addr;
}

} // namespace

TcpStream::TcpStream(TcpStream&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

TcpStream& TcpStream::operator=(TcpStream&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

TcpStream::~TcpStream() { close(); }

std::size_t TcpStream::read_some(std::uint8_t* buf, std::size_t max) {
    if (fd_ < 0) throw NetError("read on closed socket");
    while (true) {
        const ssize_t n = ::recv(fd_, buf, max, 0);
        if (n >= 0) return static_cast<std::size_t>(n);
        if (errno == EINTR) continue;
        // A reset or local shutdown mid-read reads as end-of-stream; the
        // framing layer decides whether that is clean or truncation.
        if (errno == ECONNRESET || errno == EBADF || errno == EPIPE) return 0;
        throw_errno("recv");
    }
}

void TcpStream::write_all(const std::uint8_t* data, std::size_t len) {
    if (fd_ < 0) throw NetError("write on closed socket");
    std::size_t sent = 0;
    while (sent < len) {
        const ssize_t n = ::send(fd_, data + sent, len - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_errno("send");
        }
        sent += static_cast<std::size_t>(n);
    }
}

void TcpStream::shutdown() noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void TcpStream::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

TcpListener TcpListener::bind(const std::string& host, std::uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr = make_addr(host, port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        const int err = errno;
        ::close(fd);
        errno = err;
        throw_errno("bind " + host + ":" + std::to_string(port));
    }
    if (::listen(fd, 8) < 0) {
        const int err = errno;
        ::close(fd);
        errno = err;
        throw_errno("listen");
    }

    TcpListener listener;
    listener.fd_ = fd;
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len) == 0) {
        listener.port_ = ntohs(bound.sin_port);
    } else {
        listener.port_ = port;
    }
    return listener;
}

TcpListener::TcpListener(TcpListener&& other) noexcept
    : fd_(other.fd_), port_(other.port_) {
    other.fd_ = -1;
}

TcpListener& TcpListener::operator=(TcpListener&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        port_ = other.port_;
        other.fd_ = -1;
    }
    return *this;
}

TcpListener::~TcpListener() { close(); }

TcpStream TcpListener::accept(std::chrono::milliseconds timeout) {
    if (fd_ < 0) throw NetError("accept on closed listener");
    pollfd pfd{fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc < 0) throw_errno("poll");
    if (rc == 0) {
        throw NetError("no inbound connection within " + std::to_string(timeout.count()) +
                       " ms");
    }
    const int client = ::accept(fd_, nullptr, nullptr);
    if (client < 0) throw_errno("accept");
    set_nodelay(client);
    return TcpStream(client);
}

void TcpListener::shutdown() noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void TcpListener::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

TcpStream connect_with_retry(const std::string& host, std::uint16_t port,
                             std::chrono::milliseconds deadline) {
    const auto give_up = std::chrono::steady_clock::now() + deadline;
    std::string last_error = "connect never attempted";
    while (true) {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw_errno("socket");
        sockaddr_in addr = make_addr(host, port);
        if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
            set_nodelay(fd);
            return TcpStream(fd);
        }
        last_error = std::strerror(errno);
        ::close(fd);
        if (std::chrono::steady_clock::now() >= give_up) {
            throw NetError("cannot connect to " + host + ":" + std::to_string(port) +
                           " within " + std::to_string(deadline.count()) +
                           " ms: " + last_error);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(25));
    }
}

} // namespace ringlm
