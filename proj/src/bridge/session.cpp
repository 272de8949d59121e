#include "noisecoder/bridge/session.hpp"

#include <cmath>

namespace noisecoder::bridge {

namespace {

std::string shape_str(const std::vector<uint32_t>& shape) {
  std::string s;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

}  // namespace

Session::Session(std::unique_ptr<Connection> connection, std::vector<uint32_t> shape,
                 std::chrono::milliseconds timeout)
    : connection_(std::move(connection)), shape_(std::move(shape)), timeout_(timeout) {}

Session::~Session() {
  try {
    close();
  } catch (...) {
  }
}

Session Session::handshake(std::string_view endpoint, std::vector<uint32_t> shape,
                           std::chrono::milliseconds timeout) {
  return handshake(open_endpoint(endpoint, timeout), std::move(shape), timeout);
}

Session Session::handshake(std::unique_ptr<Connection> connection, std::vector<uint32_t> shape,
                           std::chrono::milliseconds timeout) {
  if (shape.empty()) throw std::invalid_argument("bridge: empty tensor shape");
  Session s(std::move(connection), std::move(shape), timeout);
  s.send(Frame::hello(s.shape_));
  const Frame reply = s.receive();
  if (reply.op == Op::error) {
    s.broken_ = true;
    throw BridgeError(Errc::server_error, "bridge: server error: " + reply.message);
  }
  if (reply.op != Op::hello) {
    s.broken_ = true;
    throw BridgeError(Errc::malformed_frame, "bridge: malformed frame: expected hello");
  }
  if (reply.version != kProtocolVersion) {
    s.broken_ = true;
    throw BridgeError(Errc::unsupported_protocol,
                      "bridge: unsupported protocol (server speaks version " + reply.version + ")");
  }
  if (reply.shape != s.shape_) {
    s.broken_ = true;
    throw BridgeError(Errc::shape_mismatch, "bridge: shape mismatch (server " + shape_str(reply.shape) +
                                                ", client " + shape_str(s.shape_) + ")");
  }
  return s;
}

void Session::send(const Frame& frame) {
  if (!connection_) throw BridgeError(Errc::connection_lost, "bridge: connection lost");
  const auto bytes = encode_frame(frame);
  try {
    connection_->write_all(bytes, Clock::now() + timeout_);
  } catch (const BridgeError&) {
    broken_ = true;
    throw;
  }
}

Frame Session::receive() {
  if (!connection_) throw BridgeError(Errc::connection_lost, "bridge: connection lost");
  try {
    const auto deadline = Clock::now() + timeout_;
    const std::string line = connection_->read_line(kMaxHeaderBytes, deadline);
    Header h = decode_header(line);
    std::vector<uint8_t> payload(h.payload_len);
    connection_->read_exact(payload, deadline);
    return attach_payload(std::move(h), payload);
  } catch (const BridgeError&) {
    // Framing is lost; nothing more can be read from this stream.
    broken_ = true;
    throw;
  }
}

std::vector<float> Session::request_denoise(std::span<const float> x, double sigma,
                                            std::optional<std::string> context) {
  if (broken_) throw BridgeError(Errc::connection_lost, "bridge: connection lost");
  size_t n = 1;
  for (uint32_t d : shape_) n *= d;
  if (x.size() != n) throw std::invalid_argument("bridge: request does not match the session shape");

  send(Frame::denoise(sigma, shape_, std::vector<float>(x.begin(), x.end()), std::move(context)));
  ++requests_;
  Frame reply = receive();
  if (reply.op == Op::error) throw BridgeError(Errc::server_error, "bridge: server error: " + reply.message);
  if (reply.op != Op::denoise) {
    broken_ = true;
    throw BridgeError(Errc::malformed_frame, "bridge: malformed frame: expected denoise reply");
  }
  if (reply.shape != shape_) {
    throw BridgeError(Errc::shape_mismatch, "bridge: shape mismatch (reply " + shape_str(reply.shape) +
                                                ", expected " + shape_str(shape_) + ")");
  }
  for (float v : reply.payload) {
    if (!std::isfinite(v)) throw BridgeError(Errc::non_finite, "bridge: non-finite values in reply");
  }
  return std::move(reply.payload);
}

void Session::close() {
  if (!connection_) return;
  if (!broken_) {
    try {
      connection_->write_all(encode_frame(Frame::bye()), Clock::now() + std::chrono::seconds(1));
    } catch (const BridgeError&) {
    }
  }
  connection_->close();
  connection_.reset();
}

}  // namespace noisecoder::bridge
