#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "noisecoder/core/key.hpp"
#include "noisecoder/core/tensor.hpp"
#include "noisecoder/schedule.hpp"

namespace noisecoder::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The shared key file. Both parties need an identical copy.
///
///   # comment
///   model = gmm:fixtures/gmm_3x16x16.nzt     (or bridge:cmd:... / bridge:tcp:host:port)
///   shape = 3x16x16                          (bridge models only)
///   sigma_max = 80
///   sigma_min = 0.002
///   rho = 7
///   steps = 40
///   projection = mb                          (mn, mb, mc, multibits:<b>, multichannel)
///   seed = 12345
///   codebook = cb.nzt                        (multichannel only; "seed" derives it from the seed)
///   context = prompt=a cat;guidance=7.5
///   payload_bits = 256                       (or bpp = 1.0)
///   bridge_pool = 1
///
/// Relative paths resolve against the directory of the key file.
struct Config {
  std::string model;
  std::optional<Shape> shape;
  ScheduleParams schedule;
  ProjectionSpec projection = ProjectionSpec::mb();
  uint64_t seed = 0;
  std::string codebook;
  std::string context;
  std::optional<size_t> payload_bits;
  std::optional<double> bpp;
  size_t bridge_pool = 1;
  std::filesystem::path base_dir;

  static Config parse(std::string_view text, const std::filesystem::path& base_dir = {});
  static Config load(const std::filesystem::path& path);
  std::string serialize() const;

  std::filesystem::path resolve(const std::string& path) const;

  /// Applies one `key = value` pair; throws ConfigError on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
};

/// "3x16x16" -> {3, 16, 16}
Shape parse_shape(std::string_view text);

}  // namespace noisecoder::cli
