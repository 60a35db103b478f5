#pragma once

// Thin RAII wrappers over POSIX TCP sockets on the loopback interface.

#include <chrono>
#include <cstdint>
#include <span>
#include <string>

namespace bee::net {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release();
  void close();

 private:
  int fd_ = -1;
};

Socket listen_tcp(std::uint16_t port);
Socket accept_tcp(const Socket& listener);
/// Retries until the peer accepts or the timeout expires.
Socket connect_tcp(std::uint16_t port, std::chrono::milliseconds timeout);
std::uint16_t pick_free_port();

/// Returns false if the peer is gone.
bool write_all(int fd, std::span<const std::uint8_t> data);
bool write_all(int fd, const std::string& text);

/// Reads one '\n'-terminated line (without the newline); false on EOF.
bool read_line(int fd, std::string& buffer, std::string& line);

}  // namespace bee::net
