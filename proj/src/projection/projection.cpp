#include "noisecoder/projection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace noisecoder::projection {

namespace {

void require_same_length(size_t a, size_t b) {
  if (a != b) {
    throw std::invalid_argument("shape mismatch: " + std::to_string(a) + " message bits for " +
                                std::to_string(b) + " carrier elements");
  }
}

// Level index (ascending value) -> bit pattern.
uint32_t pattern_of_level(uint32_t level, uint32_t b) {
  if (b == 2) {
    constexpr uint32_t kTable[4] = {0b00, 0b01, 0b11, 0b10};
    return kTable[level];
  }
  return level;
}

}  // namespace

std::vector<double> project_mn(std::span<const double> z, std::span<const uint8_t> bits) {
  require_same_length(bits.size(), z.size());
  std::vector<double> out(z.size());
  for (size_t i = 0; i < z.size(); ++i) out[i] = bits[i] ? std::abs(z[i]) : -std::abs(z[i]);
  return out;
}

Bits invert_sign(std::span<const double> z) {
  Bits out(z.size());
  for (size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? 1 : 0;
  return out;
}

std::vector<double> project_mb(std::span<const uint8_t> bits) {
  std::vector<double> out(bits.size());
  for (size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ? 1.0 : -1.0;
  return out;
}

std::vector<double> project_mc(std::span<const uint8_t> bits, Rng& sign_rng) {
  const double r2 = std::sqrt(2.0);
  std::vector<double> out(bits.size(), 0.0);
  for (size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i] = sign_rng.bit() ? r2 : -r2;
  }
  return out;
}

Bits invert_mc(std::span<const double> z) {
  const double threshold = std::sqrt(2.0) / 2.0;
  Bits out(z.size());
  for (size_t i = 0; i < z.size(); ++i) out[i] = std::abs(z[i]) > threshold ? 1 : 0;
  return out;
}

std::vector<double> multibits_codewords(uint32_t b) {
  if (b < 2) throw std::invalid_argument("multibits requires b >= 2");
  if (b > 16) throw std::invalid_argument("multibits supports at most 16 bits per element");
  const uint32_t levels = 1u << b;
  const double scale = std::sqrt((static_cast<double>(levels) * levels - 1.0) / 3.0);
  std::vector<double> codeword(levels);
  for (uint32_t k = 0; k < levels; ++k) {
    codeword[pattern_of_level(k, b)] = (2.0 * k + 1.0 - levels) / scale;
  }
  return codeword;
}

std::vector<double> project_multibits(std::span<const uint8_t> bits, uint32_t b) {
  const auto codeword = multibits_codewords(b);
  if (bits.size() % b != 0) {
    throw std::invalid_argument("message length " + std::to_string(bits.size()) +
                                " is not divisible by b=" + std::to_string(b));
  }
  std::vector<double> out(bits.size() / b);
  for (size_t i = 0; i < out.size(); ++i) {
    uint32_t pattern = 0;
    for (uint32_t j = 0; j < b; ++j) pattern = (pattern << 1) | (bits[i * b + j] & 1u);
    out[i] = codeword[pattern];
  }
  return out;
}

Bits invert_multibits(std::span<const double> z, uint32_t b) {
  if (b < 2) throw std::invalid_argument("multibits requires b >= 2");
  if (b > 16) throw std::invalid_argument("multibits supports at most 16 bits per element");
  const uint32_t levels = 1u << b;
  const double scale = std::sqrt((static_cast<double>(levels) * levels - 1.0) / 3.0);
  Bits out(z.size() * b);
  for (size_t i = 0; i < z.size(); ++i) {
    // Level k sits at t = k in these coordinates; ceil(t - 1/2) rounds
    // half-way values down to the smaller level.
    const double t = (z[i] * scale + levels - 1.0) / 2.0;
    double k = std::ceil(t - 0.5);
    if (!(k >= 0.0)) k = 0.0;  // also catches NaN
    if (k > levels - 1.0) k = levels - 1.0;
    const uint32_t pattern = pattern_of_level(static_cast<uint32_t>(k), b);
    for (uint32_t j = 0; j < b; ++j) out[i * b + j] = (pattern >> (b - 1 - j)) & 1u;
  }
  return out;
}

LatentTensor project_multichannel(std::span<const uint8_t> bits, const Codebook& codebook) {
  const Shape& shape = codebook.shape;
  require_same_length(bits.size(), shape.plane());
  LatentTensor out(shape);
  for (uint32_t c = 0; c < shape.channels; ++c) {
    auto plane = out.channel(c);
    const uint8_t* mask = codebook.bits.data() + c * shape.plane();
    for (size_t i = 0; i < plane.size(); ++i) {
      const double message_sign = bits[i] ? 1.0 : -1.0;
      plane[i] = mask[i] ? message_sign : -message_sign;
    }
  }
  return out;
}

Bits invert_multichannel(const LatentTensor& z, const Codebook& codebook) {
  if (z.shape() != codebook.shape) {
    throw std::invalid_argument("codebook shape " + codebook.shape.str() +
                                " does not match tensor " + z.shape().str());
  }
  const Shape& shape = z.shape();
  Bits out(shape.plane());
  for (size_t i = 0; i < shape.plane(); ++i) {
    int votes = 0;
    double sum = 0.0;
    for (uint32_t c = 0; c < shape.channels; ++c) {
      const size_t idx = c * shape.plane() + i;
      const double corrected = codebook.bits[idx] ? z[idx] : -z[idx];
      votes += corrected > 0.0 ? 1 : -1;
      sum += corrected;
    }
    out[i] = (votes > 0 || (votes == 0 && sum > 0.0)) ? 1 : 0;
  }
  return out;
}

LatentTensor embed_into_channels(LatentTensor noise, std::span<const std::vector<double>> planes) {
  const Shape& shape = noise.shape();
  if (planes.size() > shape.channels) {
    throw std::invalid_argument(std::to_string(planes.size()) + " message channels exceed " +
                                std::to_string(shape.channels) + " model channels");
  }
  for (uint32_t c = 0; c < planes.size(); ++c) {
    require_same_length(planes[c].size(), shape.plane());
    auto dst = noise.channel(c);
    std::copy(planes[c].begin(), planes[c].end(), dst.begin());
  }
  return noise;
}

uint32_t max_message_channels(const ProjectionSpec& spec, Shape model_shape) {
  return spec.kind == ProjectionKind::multichannel ? 1u : model_shape.channels;
}

LatentTensor project(const Message& message, const StegoKey& key, Shape model_shape) {
  key.validate();
  message.validate();
  if (message.width != model_shape.width || message.height != model_shape.height) {
    throw std::invalid_argument("message is " + std::to_string(message.width) + "x" +
                                std::to_string(message.height) + " but model is " + model_shape.str());
  }
  if (message.bits_per_element != key.projection.bits) {
    throw std::invalid_argument("message carries " + std::to_string(message.bits_per_element) +
                                " bits per element, projection " + key.projection.name() +
                                " expects " + std::to_string(key.projection.bits));
  }
  if (message.channels_used > max_message_channels(key.projection, model_shape)) {
    throw std::invalid_argument("capacity exceeded: " + std::to_string(message.channels_used) +
                                " message channels on a " + model_shape.str() + " model");
  }

  if (key.projection.kind == ProjectionKind::multichannel) {
    if (key.codebook->shape != model_shape) {
      throw std::invalid_argument("codebook shape " + key.codebook->shape.str() +
                                  " does not match model " + model_shape.str());
    }
    return project_multichannel(message.bits, *key.codebook);
  }

  Rng noise_rng(key.seed, Stream::noise);
  LatentTensor noise(model_shape);
  for (double& v : noise.data()) v = noise_rng.normal();

  Rng sign_rng(key.seed, Stream::mc_sign);
  const size_t per_channel = size_t{key.projection.bits} * model_shape.plane();
  std::vector<std::vector<double>> planes;
  planes.reserve(message.channels_used);
  for (uint32_t c = 0; c < message.channels_used; ++c) {
    const std::span<const uint8_t> bits(message.bits.data() + c * per_channel, per_channel);
    switch (key.projection.kind) {
      case ProjectionKind::mn: planes.push_back(project_mn(noise.channel(c), bits)); break;
      case ProjectionKind::mb: planes.push_back(project_mb(bits)); break;
      case ProjectionKind::mc: planes.push_back(project_mc(bits, sign_rng)); break;
      case ProjectionKind::multibits:
        planes.push_back(project_multibits(bits, key.projection.bits));
        break;
      case ProjectionKind::multichannel: break;  // handled above
    }
  }
  return embed_into_channels(std::move(noise), planes);
}

Message recover(const LatentTensor& z, const StegoKey& key, uint32_t channels_used) {
  key.validate();
  const Shape& shape = z.shape();
  if (channels_used == 0 || channels_used > max_message_channels(key.projection, shape)) {
    throw std::invalid_argument("cannot decode " + std::to_string(channels_used) +
                                " message channels from a " + shape.str() + " tensor");
  }
  Message m;
  m.width = shape.width;
  m.height = shape.height;
  m.bits_per_element = key.projection.bits;
  m.channels_used = channels_used;

  if (key.projection.kind == ProjectionKind::multichannel) {
    m.bits = invert_multichannel(z, *key.codebook);
    return m;
  }
  m.bits.reserve(m.capacity());
  for (uint32_t c = 0; c < channels_used; ++c) {
    const auto plane = z.channel(c);
    Bits decoded;
    switch (key.projection.kind) {
      case ProjectionKind::mn:
      case ProjectionKind::mb: decoded = invert_sign(plane); break;
      case ProjectionKind::mc: decoded = invert_mc(plane); break;
      case ProjectionKind::multibits: decoded = invert_multibits(plane, key.projection.bits); break;
      case ProjectionKind::multichannel: break;
    }
    m.bits.insert(m.bits.end(), decoded.begin(), decoded.end());
  }
  return m;
}

}  // namespace noisecoder::projection
