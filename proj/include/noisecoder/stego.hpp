#pragma once

#include <cstdint>
#include <string_view>

#include "noisecoder/core/bits.hpp"
#include "noisecoder/core/key.hpp"
#include "noisecoder/core/tensor.hpp"
#include "noisecoder/schedule.hpp"
#include "noisecoder/score_model.hpp"

// End-to-end hide / extract: x0 = f(Pr(z, M)) and M' = Pr^-1(f^-1(x0)).
namespace noisecoder {

/// Channels needed to carry `payload_bits` with this projection on a model
/// of `shape` (at least 1). May exceed what the model offers; callers check.
uint32_t channels_needed(size_t payload_bits, const ProjectionSpec& spec, Shape shape);

/// Message of exactly `channels_used` channels: `payload` first, the
/// remaining positions filled with bits from the key's fill stream.
/// Throws std::invalid_argument("capacity exceeded ...") if the payload does not fit.
Message make_message(std::span<const uint8_t> payload, const ProjectionSpec& spec, Shape shape,
                     uint32_t channels_used, uint64_t fill_seed);

LatentTensor hide(const Message& message, const StegoKey& key, const SigmaSchedule& schedule,
                  ScoreModel& model, std::string_view context = {});

Message extract(const LatentTensor& image, const StegoKey& key, uint32_t channels_used,
                const SigmaSchedule& schedule, ScoreModel& model, std::string_view context = {});

}  // namespace noisecoder
