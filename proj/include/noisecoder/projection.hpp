#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "noisecoder/core/bits.hpp"
#include "noisecoder/core/key.hpp"
#include "noisecoder/core/rng.hpp"
#include "noisecoder/core/tensor.hpp"

// Message projections: invertible maps from message bits into the
// sampler's initial noise and back.
//
// Element-wise projections work on one channel plane at a time. A channel
// plane carrying b bits per element consumes b*H*W message bits, with the b
// bits of element i stored MSB-first at positions [b*i, b*i + b).
namespace noisecoder::projection {

/// Sign of z forced positive where the bit is 1 and negative where it is 0.
std::vector<double> project_mn(std::span<const double> z, std::span<const uint8_t> bits);

/// 1 where z > 0, else 0 (an exact zero decodes as 0). Inverse of MN and MB.
Bits invert_sign(std::span<const double> z);

/// 2*bit - 1.
std::vector<double> project_mb(std::span<const uint8_t> bits);

/// 0 for a 0 bit, +-sqrt(2) with a fair random sign for a 1 bit.
std::vector<double> project_mc(std::span<const uint8_t> bits, Rng& sign_rng);

/// 1 iff |z| > sqrt(2)/2.
Bits invert_mc(std::span<const double> z);

/// Codeword assigned to each b-bit pattern (pattern read MSB-first).
///
/// b = 2 uses the table 00,01,10,11 -> -3,-1,3,1 (all over sqrt 5). For
/// b > 2 pattern k maps to (2k + 1 - 2^b) / sqrt((4^b - 1) / 3). Both sets
/// have zero mean and unit variance under uniform bits.
std::vector<double> multibits_codewords(uint32_t b);

std::vector<double> project_multibits(std::span<const uint8_t> bits, uint32_t b);

/// Nearest codeword; a value exactly between two codewords takes the smaller one.
Bits invert_multibits(std::span<const double> z, uint32_t b);

/// One 1-bpp plane replicated into every channel, channel c sign-flipped
/// where the codebook is 0: value = (2m - 1) * (2C[c] - 1).
LatentTensor project_multichannel(std::span<const uint8_t> bits, const Codebook& codebook);

/// Undo the codebook signs, then majority-vote the channel signs per pixel.
/// With an even channel count a split vote falls back to the sign of the
/// summed corrected values.
Bits invert_multichannel(const LatentTensor& z, const Codebook& codebook);

/// Replace the first planes.size() channels of `noise` by the given planes;
/// the remaining channels keep their fresh noise.
LatentTensor embed_into_channels(LatentTensor noise, std::span<const std::vector<double>> planes);

/// Number of message channels the projection can fill on a model of this shape.
uint32_t max_message_channels(const ProjectionSpec& spec, Shape model_shape);

/// Full sender-side carrier: fresh noise from the key's noise stream, the
/// message projected into its first `channels_used` channels.
LatentTensor project(const Message& message, const StegoKey& key, Shape model_shape);

/// Receiver side: decode `channels_used` message channels from recovered noise.
Message recover(const LatentTensor& z, const StegoKey& key, uint32_t channels_used);

}  // namespace noisecoder::projection
