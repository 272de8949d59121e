#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "noisecoder/bridge/frame.hpp"
#include "noisecoder/bridge/transport.hpp"

namespace noisecoder::bridge {

inline constexpr std::chrono::milliseconds kDefaultTimeout{120'000};

/// One established connection to a score server. Requests are strictly
/// sequential: each call sends one denoise frame and waits for its answer.
class Session {
 public:
  /// Opens `endpoint` and exchanges hellos. Throws BridgeError
  /// (transport, unsupported_protocol, shape_mismatch, ...).
  static Session handshake(std::string_view endpoint, std::vector<uint32_t> shape,
                           std::chrono::milliseconds timeout = kDefaultTimeout);
  static Session handshake(std::unique_ptr<Connection> connection, std::vector<uint32_t> shape,
                           std::chrono::milliseconds timeout = kDefaultTimeout);

  Session(Session&&) noexcept = default;
  Session& operator=(Session&&) noexcept = default;
  ~Session();

  /// D(x; sigma) as computed by the server. The reply must have the request's
  /// shape and only finite values.
  std::vector<float> request_denoise(std::span<const float> x, double sigma,
                                     std::optional<std::string> context = std::nullopt);

  /// Sends bye (best effort) and closes the connection.
  void close();

  const std::vector<uint32_t>& shape() const { return shape_; }
  uint64_t requests() const { return requests_; }
  bool usable() const { return connection_ != nullptr && !broken_; }

 private:
  Session(std::unique_ptr<Connection> connection, std::vector<uint32_t> shape, std::chrono::milliseconds timeout);

  void send(const Frame& frame);
  Frame receive();

  std::unique_ptr<Connection> connection_;
  std::vector<uint32_t> shape_;
  std::chrono::milliseconds timeout_;
  uint64_t requests_ = 0;
  bool broken_ = false;
};

}  // namespace noisecoder::bridge
