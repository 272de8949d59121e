#include "noisecoder/stego.hpp"

#include <stdexcept>
#include <string>

#include "noisecoder/projection.hpp"
#include "noisecoder/sampler.hpp"

namespace noisecoder {

uint32_t channels_needed(size_t payload_bits, const ProjectionSpec& spec, Shape shape) {
  const size_t per_channel = size_t{spec.bits} * shape.plane();
  const size_t n = (payload_bits + per_channel - 1) / per_channel;
  return static_cast<uint32_t>(n == 0 ? 1 : n);
}

Message make_message(std::span<const uint8_t> payload, const ProjectionSpec& spec, Shape shape,
                     uint32_t channels_used, uint64_t fill_seed) {
  const uint32_t limit = projection::max_message_channels(spec, shape);
  if (channels_used == 0 || channels_used > limit) {
    throw std::invalid_argument("capacity exceeded: " + std::to_string(channels_used) +
                                " message channels requested, " + spec.name() + " on " +
                                shape.str() + " allows " + std::to_string(limit));
  }
  Message m;
  m.width = shape.width;
  m.height = shape.height;
  m.bits_per_element = spec.bits;
  m.channels_used = channels_used;
  if (payload.size() > m.capacity()) {
    throw std::invalid_argument("capacity exceeded: " + std::to_string(payload.size()) +
                                " payload bits, capacity " + std::to_string(m.capacity()));
  }
  m.bits.assign(payload.begin(), payload.end());
  Rng fill(fill_seed, Stream::fill);
  while (m.bits.size() < m.capacity()) m.bits.push_back(fill.bit());
  m.validate();
  return m;
}

LatentTensor hide(const Message& message, const StegoKey& key, const SigmaSchedule& schedule,
                  ScoreModel& model, std::string_view context) {
  const LatentTensor carrier = projection::project(message, key, model.shape());
  return heun_forward(carrier, schedule, model, context);
}

Message extract(const LatentTensor& image, const StegoKey& key, uint32_t channels_used,
                const SigmaSchedule& schedule, ScoreModel& model, std::string_view context) {
  const LatentTensor noise = heun_inverse(image, schedule, model, context);
  return projection::recover(noise, key, channels_used);
}

}  // namespace noisecoder
