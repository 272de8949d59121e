#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace noisecoder {

/// A bit is stored as one byte holding 0 or 1.
using Bits = std::vector<uint8_t>;

/// Secret payload laid out as `channels_used` bit-planes of
/// `bits_per_element * width * height` bits each.
struct Message {
  Bits bits;
  uint32_t width = 0;
  uint32_t height = 0;
  uint32_t bits_per_element = 1;
  uint32_t channels_used = 1;

  /// Throws std::invalid_argument unless length(bits) = b*n*W*H and every entry is 0/1.
  void validate() const;

  /// length(bits) / (W*H)
  double bpp() const;

  size_t capacity() const {
    return size_t{bits_per_element} * channels_used * width * height;
  }
};

/// MSB-first unpacking of the first `count` bits of `bytes`.
/// Throws std::invalid_argument("payload underflow") if count > 8*len(bytes).
Bits bytes_to_bits(std::span<const uint8_t> bytes, size_t count);

/// MSB-first packing; a trailing partial byte is zero-padded.
std::vector<uint8_t> bits_to_bytes(std::span<const uint8_t> bits);

size_t hamming_distance(std::span<const uint8_t> a, std::span<const uint8_t> b);

}  // namespace noisecoder
