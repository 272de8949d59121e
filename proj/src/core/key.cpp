#include "noisecoder/core/key.hpp"

#include <cmath>
#include <charconv>
#include <stdexcept>

#include "noisecoder/core/nzt.hpp"

namespace noisecoder {

ProjectionSpec ProjectionSpec::multibits(uint32_t b) {
  if (b < 2) throw std::invalid_argument("multibits requires b >= 2");
  if (b > 16) throw std::invalid_argument("multibits supports at most 16 bits per element");
  return {ProjectionKind::multibits, b};
}

ProjectionSpec ProjectionSpec::parse(std::string_view text) {
  if (text == "mn") return mn();
  if (text == "mb") return mb();
  if (text == "mc") return mc();
  if (text == "multichannel") return multichannel();
  constexpr std::string_view prefix = "multibits:";
  if (text.starts_with(prefix)) {
    const std::string_view digits = text.substr(prefix.size());
    uint32_t b = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), b);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) {
      throw std::invalid_argument("bad multibits width: " + std::string(text));
    }
    return multibits(b);
  }
  throw std::invalid_argument("unknown projection: " + std::string(text));
}

std::string ProjectionSpec::name() const {
  switch (kind) {
    case ProjectionKind::mn: return "mn";
    case ProjectionKind::mb: return "mb";
    case ProjectionKind::mc: return "mc";
    case ProjectionKind::multibits: return "multibits:" + std::to_string(bits);
    case ProjectionKind::multichannel: return "multichannel";
  }
  return "?";
}

double ProjectionSpec::decision_margin() const {
  switch (kind) {
    case ProjectionKind::mn: return 0.0;  // magnitudes are |N(0,1)|, arbitrarily close to 0
    case ProjectionKind::mb:
    case ProjectionKind::multichannel: return 1.0;
    case ProjectionKind::mc: return std::sqrt(2.0) / 2.0;
    case ProjectionKind::multibits: {
      // Adjacent levels are 2/sqrt((4^b-1)/3) apart.
      const double levels = std::ldexp(1.0, static_cast<int>(bits));
      return 1.0 / std::sqrt((levels * levels - 1.0) / 3.0);
    }
  }
  return 0.0;
}

Codebook Codebook::generate(Shape shape, Rng& rng) {
  if (!shape.valid()) throw std::invalid_argument("codebook shape must be positive");
  Codebook cb{shape, Bits(shape.size())};
  for (auto& b : cb.bits) b = rng.bit();
  return cb;
}

Codebook Codebook::from_seed(Shape shape, uint64_t seed) {
  Rng rng(seed, Stream::codebook, 0);
  return generate(shape, rng);
}

Codebook Codebook::load(const std::filesystem::path& path) {
  const NztArray array = read_nzt(path);
  if (array.dims.size() != 3) throw std::invalid_argument("codebook must be a 3-D tensor");
  Codebook cb{{array.dims[0], array.dims[1], array.dims[2]}, Bits(array.data.size())};
  for (size_t i = 0; i < array.data.size(); ++i) {
    if (array.data[i] == 0.0f) {
      cb.bits[i] = 0;
    } else if (array.data[i] == 1.0f) {
      cb.bits[i] = 1;
    } else {
      throw std::invalid_argument("codebook values must be 0.0 or 1.0");
    }
  }
  return cb;
}

void Codebook::save(const std::filesystem::path& path) const {
  NztArray array{{shape.channels, shape.height, shape.width}, {}};
  array.data.assign(bits.begin(), bits.end());
  write_nzt(array, path);
}

void StegoKey::validate() const {
  const bool wants = projection.kind == ProjectionKind::multichannel;
  if (wants && !codebook) throw std::invalid_argument("multichannel projection requires a codebook");
  if (!wants && codebook) throw std::invalid_argument("codebook given for a projection that does not use one");
  if (projection.kind == ProjectionKind::multibits && projection.bits < 2) {
    throw std::invalid_argument("multibits requires b >= 2");
  }
}

}  // namespace noisecoder
