#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

namespace noisecoder::bridge {

using Clock = std::chrono::steady_clock;

/// Full-duplex byte stream to a score server. Reads are buffered; every
/// blocking call honours a deadline and reports failures as BridgeError.
class Connection {
 public:
  /// Takes ownership of the descriptors (they may be the same socket).
  /// `child` is a spawned server process to reap on close, or -1.
  Connection(int read_fd, int write_fd, pid_t child = -1);
  ~Connection();

  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  void write_all(std::span<const uint8_t> bytes, Clock::time_point deadline);
  /// Line without its '\n'. Throws malformed_frame past `max_bytes`.
  std::string read_line(size_t max_bytes, Clock::time_point deadline);
  void read_exact(std::span<uint8_t> out, Clock::time_point deadline);

  /// Closes the descriptors and reaps the child, killing it if it lingers.
  void close();

 private:
  size_t fill(Clock::time_point deadline);

  int read_fd_;
  int write_fd_;
  pid_t child_;
  std::vector<uint8_t> buffer_;
  size_t buffer_pos_ = 0;
};

/// "cmd:<shell command>" spawns the server with its stdin/stdout as the
/// stream; "tcp:<host>:<port>" connects a socket.
std::unique_ptr<Connection> open_endpoint(std::string_view endpoint, std::chrono::milliseconds timeout);

}  // namespace noisecoder::bridge
