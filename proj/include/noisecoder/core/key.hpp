#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "noisecoder/core/bits.hpp"
#include "noisecoder/core/rng.hpp"
#include "noisecoder/core/tensor.hpp"

namespace noisecoder {

enum class ProjectionKind { mn, mb, mc, multibits, multichannel };

/// Which message projection to use. `bits` is the number of message bits
/// carried per noise element: 1 for everything except MultiBits(b), b >= 2.
struct ProjectionSpec {
  ProjectionKind kind = ProjectionKind::mb;
  uint32_t bits = 1;

  static ProjectionSpec mn() { return {ProjectionKind::mn, 1}; }
  static ProjectionSpec mb() { return {ProjectionKind::mb, 1}; }
  static ProjectionSpec mc() { return {ProjectionKind::mc, 1}; }
  static ProjectionSpec multibits(uint32_t b);
  static ProjectionSpec multichannel() { return {ProjectionKind::multichannel, 1}; }

  /// Accepts "mn", "mb", "mc", "multibits:<b>", "multichannel".
  static ProjectionSpec parse(std::string_view text);
  std::string name() const;

  /// Distance from a clean codeword to the nearest decision boundary.
  double decision_margin() const;

  friend bool operator==(const ProjectionSpec&, const ProjectionSpec&) = default;
};

/// Binary mask shared by sender and receiver for multi-channel projection.
/// Same shape as the model's noise tensor.
struct Codebook {
  Shape shape;
  Bits bits;

  static Codebook generate(Shape shape, Rng& rng);
  /// The fixed codebook of a key seed (Stream::codebook, index 0).
  static Codebook from_seed(Shape shape, uint64_t seed);

  /// NZT1 tensor with values restricted to {0.0, 1.0}.
  static Codebook load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const Codebook&, const Codebook&) = default;
};

/// Everything the two parties share besides the model and the schedule.
struct StegoKey {
  ProjectionSpec projection;
  uint64_t seed = 0;
  std::optional<Codebook> codebook;

  /// Throws std::invalid_argument unless codebook is present iff the
  /// projection is multi-channel.
  void validate() const;
};

}  // namespace noisecoder
