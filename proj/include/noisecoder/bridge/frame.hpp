#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Score-bridge wire protocol, version "1".
//
// A frame is one line of UTF-8 JSON terminated by '\n', immediately followed
// by `payload_len` bytes of little-endian f32 tensor data (channel-major).
//
//   {"op":"hello","version":"1","shape":[C,H,W]}
//   {"op":"denoise","sigma":80.0,"shape":[C,H,W],"context":"...","payload_len":4*C*H*W}
//   {"op":"bye"}
//   {"op":"error","message":"..."}
//
// The client sends hello, waits for the server's hello, then issues one
// denoise request at a time; each is answered by a denoise frame carrying
// D(x; sigma) with the same shape, or by an error frame. Context strings are
// opaque to both ends of the transport.
namespace noisecoder::bridge {

inline constexpr std::string_view kProtocolVersion = "1";
inline constexpr size_t kMaxHeaderBytes = 1 << 20;

enum class Errc {
  transport,         // could not start / connect
  connection_lost,   // peer closed or the pipe broke
  timeout,
  malformed_frame,
  unsupported_protocol,
  shape_mismatch,
  non_finite,
  server_error,      // peer answered with an error frame
};

const char* errc_name(Errc code);

class BridgeError : public std::runtime_error {
 public:
  BridgeError(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

enum class Op { hello, denoise, bye, error };

struct Frame {
  Op op = Op::hello;
  std::string version;                 // hello
  std::vector<uint32_t> shape;         // hello, denoise
  double sigma = 0.0;                  // denoise
  std::optional<std::string> context;  // denoise
  std::string message;                 // error
  std::vector<float> payload;          // denoise

  static Frame hello(std::vector<uint32_t> shape);
  static Frame denoise(double sigma, std::vector<uint32_t> shape, std::vector<float> payload,
                       std::optional<std::string> context = std::nullopt);
  static Frame bye();
  static Frame error(std::string message);

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// JSON header line including the trailing '\n'.
std::string encode_header(const Frame& frame);

/// Header line followed by the payload bytes.
std::vector<uint8_t> encode_frame(const Frame& frame);

/// Parsed header; `payload_len` says how many bytes must follow.
struct Header {
  Frame frame;  // payload still empty
  size_t payload_len = 0;
};

/// Parses one header line (without its '\n'). Throws BridgeError(malformed_frame).
Header decode_header(std::string_view line);

/// Attaches a payload to a decoded header. Throws BridgeError(malformed_frame)
/// if the byte count disagrees with the header or with the frame's shape.
Frame attach_payload(Header header, std::span<const uint8_t> payload);

/// Decodes exactly one complete frame from `bytes`.
Frame decode_frame(std::span<const uint8_t> bytes);

}  // namespace noisecoder::bridge
