#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include "ringlm/wire.hpp"

namespace ringlm {

// Thin RAII wrappers over POSIX TCP sockets. TCP_NODELAY is always set on
// data connections; the pipeline ships one small frame per step and must
// not sit behind Nagle.

class TcpStream {
public:
    TcpStream() = default;
    explicit TcpStream(int fd) : fd_(fd) {}
    ~TcpStream();

    TcpStream(TcpStream&& other) noexcept;
    TcpStream& operator=(TcpStream&& other) noexcept;
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    bool valid() const { return fd_ >= 0; }

    // Returns bytes read (0 on orderly peer close). Throws NetError on failure.
    std::size_t read_some(std::uint8_t* buf, std::size_t max);

    // Writes the whole buffer. Throws NetError on failure.
    void write_all(const std::uint8_t* buf, std::size_t len);

    // Unblocks any reader/writer on this socket from another thread.
    void shutdown() noexcept;
    void close() noexcept;

private:
    int fd_ = -1;
};

class TcpListener {
public:
    TcpListener() = default;
    ~TcpListener();

    TcpListener(TcpListener&& other) noexcept;
    TcpListener& operator=(TcpListener&& other) noexcept;
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    // Binds and listens; port 0 picks an ephemeral port. Throws NetError.
    static TcpListener bind(const std::string& host, std::uint16_t port);

    bool valid() const { return fd_ >= 0; }
    std::uint16_t port() const { return port_; }

    // Blocks until a connection arrives or the deadline passes (NetError on
    // timeout or closed listener).
    TcpStream accept(std::chrono::milliseconds timeout);

    // Wakes a blocked accept from another thread without releasing the fd
    // (safe against fd reuse); accept then fails with NetError.
    void shutdown() noexcept;
    void close() noexcept;

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

// Connects with retries until the deadline (covers a peer that is still
// starting up). Throws NetError after the deadline.
TcpStream connect_with_retry(const std::string& host, std::uint16_t port,
                             std::chrono::milliseconds deadline);

// Adapts a TcpStream to the frame reader.
class SocketSource : public ByteSource {
public:
    explicit SocketSource(TcpStream& stream) : stream_(stream) {}
    std::size_t read_some(std::uint8_t* buf, std::size_t max) override {
        return stream_.read_some(buf, max);
    }

private:
    TcpStream& stream_;
};

} // namespace ringlm
