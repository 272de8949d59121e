#include "noisecoder/bridge/frame.hpp"

#include <bit>
#include <cmath>

#include "json.hpp"

namespace noisecoder::bridge {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw BridgeError(Errc::malformed_frame, "bridge: malformed frame: " + what);
}

const char* op_name(Op op) {
  switch (op) {
    case Op::hello: return "hello";
    case Op::denoise: return "denoise";
    case Op::bye: return "bye";
    case Op::error: return "error";
  }
  return "?";
}

size_t element_count(const std::vector<uint32_t>& shape) {
  size_t n = 1;
  for (uint32_t d : shape) n *= d;
  return n;
}

std::vector<uint32_t> parse_shape(const json& j) {
  if (!j.is_array() || j.empty() || j.size() > 8) malformed("shape must be a non-empty array");
  std::vector<uint32_t> shape;
  uint64_t total = 1;
  for (const auto& d : j) {
    if (!d.is_number_unsigned()) malformed("shape entries must be unsigned integers");
    const auto v = d.get<uint64_t>();
    if (v == 0 || v > 0xFFFFFFFFull) malformed("shape entries must be in 1..2^32-1");
    total *= v;
    if (total > (uint64_t{1} << 34)) malformed("tensor too large");
    shape.push_back(static_cast<uint32_t>(v));
  }
  return shape;
}

}  // namespace

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::transport: return "transport";
    case Errc::connection_lost: return "connection_lost";
    case Errc::timeout: return "timeout";
    case Errc::malformed_frame: return "malformed_frame";
    case Errc::unsupported_protocol: return "unsupported_protocol";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::non_finite: return "non_finite";
    case Errc::server_error: return "server_error";
  }
  return "?";
}

Frame Frame::hello(std::vector<uint32_t> shape) {
  Frame f;
  f.op = Op::hello;
  f.version = std::string(kProtocolVersion);
  f.shape = std::move(shape);
  return f;
}

Frame Frame::denoise(double sigma, std::vector<uint32_t> shape, std::vector<float> payload,
                     std::optional<std::string> context) {
  Frame f;
  f.op = Op::denoise;
  f.sigma = sigma;
  f.shape = std::move(shape);
  f.payload = std::move(payload);
  f.context = std::move(context);
  return f;
}

Frame Frame::bye() {
  Frame f;
  f.op = Op::bye;
  return f;
}

Frame Frame::error(std::string message) {
  Frame f;
  f.op = Op::error;
  f.message = std::move(message);
  return f;
}

std::string encode_header(const Frame& frame) {
  json j;
  j["op"] = op_name(frame.op);
  switch (frame.op) {
    case Op::hello:
      j["version"] = frame.version;
      j["shape"] = frame.shape;
      break;
    case Op::denoise:
      if (frame.payload.size() != element_count(frame.shape)) {
        throw std::invalid_argument("denoise payload does not match its shape");
      }
      j["sigma"] = frame.sigma;
      j["shape"] = frame.shape;
      if (frame.context) j["context"] = *frame.context;
      j["payload_len"] = 4 * frame.payload.size();
      break;
    case Op::bye: break;
    case Op::error: j["message"] = frame.message; break;
  }
  // Invalid UTF-8 in context/message is replaced rather than aborting the session.
  return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

std::vector<uint8_t> encode_frame(const Frame& frame) {
  const std::string header = encode_header(frame);
  std::vector<uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 4 * frame.payload.size());
  for (float f : frame.payload) {
    const auto u = std::bit_cast<uint32_t>(f);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(u >> (8 * i)));
  }
  return out;
}

Header decode_header(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    malformed(std::string("header is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("op") || !j["op"].is_string()) malformed("missing op");
  const auto op = j["op"].get<std::string>();

  Header h;
  if (op == "hello") {
    h.frame.op = Op::hello;
    if (!j.contains("version") || !j["version"].is_string()) malformed("hello without version");
    h.frame.version = j["version"].get<std::string>();
    if (!j.contains("shape")) malformed("hello without shape");
    h.frame.shape = parse_shape(j["shape"]);
  } else if (op == "denoise") {
    h.frame.op = Op::denoise;
    if (!j.contains("sigma") || !j["sigma"].is_number()) malformed("denoise without sigma");
    h.frame.sigma = j["sigma"].get<double>();
    if (!std::isfinite(h.frame.sigma) || h.frame.sigma < 0.0) malformed("sigma must be finite and >= 0");
    if (!j.contains("shape")) malformed("denoise without shape");
    h.frame.shape = parse_shape(j["shape"]);
    if (j.contains("context") && !j["context"].is_null()) {
      if (!j["context"].is_string()) malformed("context must be a string");
      h.frame.context = j["context"].get<std::string>();
    }
  } else if (op == "bye") {
    h.frame.op = Op::bye;
  } else if (op == "error") {
    h.frame.op = Op::error;
    if (j.contains("message") && j["message"].is_string()) h.frame.message = j["message"].get<std::string>();
  } else {
    malformed("unknown op '" + op + "'");
  }

  if (j.contains("payload_len")) {
    if (!j["payload_len"].is_number_unsigned()) malformed("payload_len must be an unsigned integer");
    h.payload_len = j["payload_len"].get<size_t>();
  }
  if (h.frame.op == Op::denoise) {
    if (!j.contains("payload_len")) malformed("denoise without payload_len");
    if (h.payload_len != 4 * element_count(h.frame.shape)) malformed("bad payload length");
  } else if (h.payload_len != 0) {
    malformed(std::string(op_name(h.frame.op)) + " frames carry no payload");
  }
  return h;
}

Frame attach_payload(Header header, std::span<const uint8_t> payload) {
  if (payload.size() != header.payload_len) malformed("bad payload length");
  Frame f = std::move(header.frame);
  f.payload.resize(payload.size() / 4);
  for (size_t i = 0; i < f.payload.size(); ++i) {
    const uint8_t* p = payload.data() + 4 * i;
    const uint32_t u = uint32_t{p[0]} | (uint32_t{p[1]} << 8) | (uint32_t{p[2]} << 16) | (uint32_t{p[3]} << 24);
    f.payload[i] = std::bit_cast<float>(u);
  }
  return f;
}

Frame decode_frame(std::span<const uint8_t> bytes) {
  size_t nl = 0;
  while (nl < bytes.size() && bytes[nl] != '\n') ++nl;
  if (nl == bytes.size()) malformed("header not terminated by newline");
  const std::string_view line(reinterpret_cast<const char*>(bytes.data()), nl);
  Header h = decode_header(line);
  return attach_payload(std::move(h), bytes.subspan(nl + 1));
}

}  // namespace noisecoder::bridge
