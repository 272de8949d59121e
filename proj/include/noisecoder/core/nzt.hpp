#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "noisecoder/core/tensor.hpp"

namespace noisecoder {

/// NZT1 float container:
///
///   bytes 0..3   magic "NZT1" (4E 5A 54 31)
///   byte  4      ndim (u8)
///   then         ndim little-endian u32 dims
///   then         prod(dims) little-endian IEEE-754 f32 values, row-major
///
/// No compression, no metadata, no trailing bytes.
struct NztArray {
  std::vector<uint32_t> dims;
  std::vector<float> data;

  size_t element_count() const;
  friend bool operator==(const NztArray&, const NztArray&) = default;
};

class NztError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<uint8_t> encode_nzt(const NztArray& array);
NztArray decode_nzt(std::span<const uint8_t> bytes);

void write_nzt(const NztArray& array, const std::filesystem::path& path);
NztArray read_nzt(const std::filesystem::path& path);

/// f64 -> f32 narrowing; throws on non-finite values.
NztArray to_nzt(const LatentTensor& tensor);
/// Requires ndim == 3.
LatentTensor latent_from_nzt(const NztArray& array);

/// Shorthands for the 3-D tensor case.
void tensor_write(const LatentTensor& tensor, const std::filesystem::path& path);
LatentTensor tensor_read(const std::filesystem::path& path);

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const uint8_t> bytes);

}  // namespace noisecoder
