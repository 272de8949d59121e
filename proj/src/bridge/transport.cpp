#include "noisecoder/bridge/transport.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <mutex>
#include <netdb.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "noisecoder/bridge/frame.hpp"

extern char** environ;

namespace noisecoder::bridge {

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  if (left <= 0) return 0;
  return left > 1'000'000'000 ? 1'000'000'000 : static_cast<int>(left);
}

// Waits until fd is ready for `events`; throws timeout / connection_lost.
void wait_ready(int fd, short events, Clock::time_point deadline) {
  for (;;) {
    pollfd p{fd, events, 0};
    const int rc = ::poll(&p, 1, remaining_ms(deadline));
    if (rc > 0) {
      if (p.revents & (events | POLLHUP | POLLERR)) return;
      continue;
    }
    if (rc == 0) throw BridgeError(Errc::timeout, "bridge: timeout");
    if (errno != EINTR) throw BridgeError(Errc::connection_lost, "bridge: connection lost");
  }
}

std::unique_ptr<Connection> spawn_command(const std::string& command) {
  int to_child[2], from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw BridgeError(Errc::transport, "bridge: pipe failed");
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw BridgeError(Errc::transport, "bridge: pipe failed");
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

  const std::string script = "exec " + command;
  char sh[] = "/bin/sh";
  char dash_c[] = "-c";
  std::vector<char> script_buf(script.begin(), script.end());
  script_buf.push_back('\0');
  char* argv[] = {sh, dash_c, script_buf.data(), nullptr};

  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw BridgeError(Errc::transport, std::string("bridge: cannot spawn server: ") + std::strerror(rc));
  }
  return std::make_unique<Connection>(from_child[0], to_child[1], pid);
}

std::unique_ptr<Connection> connect_tcp(std::string_view target, std::chrono::milliseconds timeout) {
  const auto colon = target.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == target.size()) {
    throw BridgeError(Errc::transport, "bridge: tcp endpoint must be tcp:<host>:<port>");
  }
  const std::string host(target.substr(0, colon));
  const std::string port(target.substr(colon + 1));

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &found) != 0 || found == nullptr) {
    throw BridgeError(Errc::transport, "bridge: cannot resolve " + host);
  }
  const auto deadline = Clock::now() + timeout;
  int fd = -1;
  for (addrinfo* ai = found; ai != nullptr && fd < 0; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol);
    if (fd < 0) continue;
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd p{fd, POLLOUT, 0};
      if (::poll(&p, 1, remaining_ms(deadline)) == 1) {
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
      }
    }
    if (rc != 0) {
      ::close(fd);
      fd = -1;
    }
  }
  ::freeaddrinfo(found);
  if (fd < 0) throw BridgeError(Errc::transport, "bridge: cannot connect to " + std::string(target));
  // Back to blocking mode; all waits go through poll().
  ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) & ~O_NONBLOCK);
  const int dup_fd = ::fcntl(fd, F_DUPFD_CLOEXEC, 0);
  if (dup_fd < 0) {
    ::close(fd);
    throw BridgeError(Errc::transport, "bridge: dup failed");
  }
  return std::make_unique<Connection>(fd, dup_fd);
}

}  // namespace

Connection::Connection(int read_fd, int write_fd, pid_t child)
    : read_fd_(read_fd), write_fd_(write_fd), child_(child) {
  ignore_sigpipe();
}

Connection::~Connection() { close(); }

void Connection::close() {
  if (write_fd_ >= 0) ::close(write_fd_);
  if (read_fd_ >= 0 && read_fd_ != write_fd_) ::close(read_fd_);
  read_fd_ = write_fd_ = -1;
  if (child_ > 0) {
    // Closing stdin normally ends the server; give it a moment, then insist.
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(child_, &status, WNOHANG) != 0) {
        child_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(child_, SIGKILL);
    ::waitpid(child_, &status, 0);
    child_ = -1;
  }
}

void Connection::write_all(std::span<const uint8_t> bytes, Clock::time_point deadline) {
  if (write_fd_ < 0) throw BridgeError(Errc::connection_lost, "bridge: connection lost");
  size_t done = 0;
  while (done < bytes.size()) {
    wait_ready(write_fd_, POLLOUT, deadline);
    const ssize_t n = ::write(write_fd_, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw BridgeError(Errc::connection_lost, "bridge: connection lost");
    }
    done += static_cast<size_t>(n);
  }
}

size_t Connection::fill(Clock::time_point deadline) {
  if (read_fd_ < 0) throw BridgeError(Errc::connection_lost, "bridge: connection lost");
  if (buffer_pos_ > 0) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(buffer_pos_));
    buffer_pos_ = 0;
  }
  uint8_t chunk[65536];
  for (;;) {
    wait_ready(read_fd_, POLLIN, deadline);
    const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
    if (n > 0) {
      buffer_.insert(buffer_.end(), chunk, chunk + n);
      return static_cast<size_t>(n);
    }
    if (n == 0) throw BridgeError(Errc::connection_lost, "bridge: connection lost");
    if (errno != EINTR && errno != EAGAIN) throw BridgeError(Errc::connection_lost, "bridge: connection lost");
  }
}

std::string Connection::read_line(size_t max_bytes, Clock::time_point deadline) {
  size_t scanned = buffer_pos_;
  for (;;) {
    for (; scanned < buffer_.size(); ++scanned) {
      if (buffer_[scanned] == '\n') {
        std::string line(buffer_.begin() + static_cast<std::ptrdiff_t>(buffer_pos_),
                         buffer_.begin() + static_cast<std::ptrdiff_t>(scanned));
        buffer_pos_ = scanned + 1;
        return line;
      }
    }
    if (buffer_.size() - buffer_pos_ > max_bytes) {
      throw BridgeError(Errc::malformed_frame, "bridge: malformed frame: header too long");
    }
    const size_t consumed = buffer_pos_;
    fill(deadline);
    scanned -= consumed;
  }
}

void Connection::read_exact(std::span<uint8_t> out, Clock::time_point deadline) {
  size_t done = 0;
  while (done < out.size()) {
    if (buffer_pos_ == buffer_.size()) fill(deadline);
    const size_t take = std::min(out.size() - done, buffer_.size() - buffer_pos_);
    std::memcpy(out.data() + done, buffer_.data() + buffer_pos_, take);
    buffer_pos_ += take;
    done += take;
  }
}

std::unique_ptr<Connection> open_endpoint(std::string_view endpoint, std::chrono::milliseconds timeout) {
  if (endpoint.starts_with("cmd:")) {
    const std::string command(endpoint.substr(4));
    if (command.empty()) throw BridgeError(Errc::transport, "bridge: empty command endpoint");
    return spawn_command(command);
  }
  if (endpoint.starts_with("tcp:")) return connect_tcp(endpoint.substr(4), timeout);
  throw BridgeError(Errc::transport, "bridge: endpoint must start with cmd: or tcp:");
}

}  // namespace noisecoder::bridge
