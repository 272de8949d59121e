#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "noisecoder/core/tensor.hpp"

// Image quantization and storage. Pixel data lives in [-1, 1].
namespace noisecoder::codec {

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit image, channel-major like LatentTensor.
struct ByteImage {
  Shape shape;
  std::vector<uint8_t> data;

  friend bool operator==(const ByteImage&, const ByteImage&) = default;
};

/// u = clamp(round((x + 1) * 127.5), 0, 255), halves rounded away from zero.
uint8_t quantize_u8(double x);
double dequantize_u8(uint8_t u);

ByteImage quantize(const LatentTensor& x);
LatentTensor dequantize(const ByteImage& image);
/// dequantize(quantize(x))
LatentTensor requantize(const LatentTensor& x);

/// 8-bit RGB, non-interlaced. Requires 3 channels.
void write_png(const ByteImage& image, const std::filesystem::path& path);
/// Accepts 8-bit RGB only (palette/alpha/grayscale/16-bit are rejected).
ByteImage read_png(const std::filesystem::path& path);

/// Bit-exact f32 carrier (NZT1).
void write_float(const LatentTensor& x, const std::filesystem::path& path);
LatentTensor read_float(const std::filesystem::path& path);

enum class ImageFormat { png, nzt };

/// By extension: ".png" or ".nzt"; anything else throws CodecError.
ImageFormat format_for(const std::filesystem::path& path);

/// Writes `x` through the format chosen by extension (PNG quantizes).
void save_image(const LatentTensor& x, const std::filesystem::path& path);
LatentTensor load_image(const std::filesystem::path& path);

}  // namespace noisecoder::codec
