#pragma once

#include <array>
#include <cstdint>

namespace noisecoder {

/// Purposes that own a dedicated sub-stream. Sender-side draws (noise, MC
/// signs, payload fill) never share a stream with draws the receiver must
/// reproduce (codebooks).
enum class Stream : uint8_t {
  root = 0,
  noise = 1,
  mc_sign = 2,
  codebook = 3,
  fill = 4,
  payload = 5,
  image_seed = 6,
  fixture = 7,
};

/// Counter-based Philox4x32-10 generator.
///
/// The 64-bit seed is the Philox key. Counter words 0-1 hold the block
/// index and words 2-3 hold the sub-stream id `(purpose << 56) | index`,
/// so every (seed, purpose, index) triple names an independent stream
/// that can be opened without advancing any other. Integer output is
/// bit-identical on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed, Stream purpose = Stream::root, uint64_t index = 0);

  /// Independent stream for `purpose`, derived from this generator's seed only.
  Rng substream(Stream purpose, uint64_t index = 0) const { return Rng(seed_, purpose, index); }

  uint64_t seed() const { return seed_; }

  uint32_t next_u32();
  uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller (pairs are cached).
  double normal();
  uint8_t bit() { return static_cast<uint8_t>(next_u32() >> 31); }

  /// Raw Philox4x32-10 block function, exposed for known-answer tests.
  static std::array<uint32_t, 4> philox(std::array<uint32_t, 4> counter,
                                        std::array<uint32_t, 2> key);

 private:
  void refill();

  uint64_t seed_;
  uint64_t stream_id_;
  uint64_t block_ = 0;
  std::array<uint32_t, 4> buffer_{};
  unsigned used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace noisecoder
