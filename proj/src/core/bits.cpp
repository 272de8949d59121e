#include "noisecoder/core/bits.hpp"

#include <stdexcept>
#include <string>

namespace noisecoder {

void Message::validate() const {
  if (width == 0 || height == 0) throw std::invalid_argument("message dimensions must be positive");
  if (bits_per_element == 0) throw std::invalid_argument("bits per element must be positive");
  if (bits.size() != capacity()) {
    throw std::invalid_argument("message length " + std::to_string(bits.size()) +
                                " != b*n*W*H = " + std::to_string(capacity()));
  }
  for (uint8_t b : bits) {
    if (b > 1) throw std::invalid_argument("message bits must be 0 or 1");
  }
}

double Message::bpp() const {
  return static_cast<double>(bits.size()) / (static_cast<double>(width) * height);
}

Bits bytes_to_bits(std::span<const uint8_t> bytes, size_t count) {
  if (count > 8 * bytes.size()) throw std::invalid_argument("payload underflow");
  Bits out(count);
  for (size_t i = 0; i < count; ++i) out[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
  return out;
}

std::vector<uint8_t> bits_to_bytes(std::span<const uint8_t> bits) {
  std::vector<uint8_t> out((bits.size() + 7) / 8, 0);
  for (size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] & 1u) out[i / 8] |= static_cast<uint8_t>(0x80u >> (i % 8));
  }
  return out;
}

size_t hamming_distance(std::span<const uint8_t> a, std::span<const uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("length mismatch");
  size_t d = 0;
  for (size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
  return d;
}

}  // namespace noisecoder
