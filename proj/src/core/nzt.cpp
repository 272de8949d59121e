#include "noisecoder/core/nzt.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace noisecoder {

namespace {

constexpr uint8_t kMagic[4] = {0x4E, 0x5A, 0x54, 0x31};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t* p) {
  return uint32_t{p[0]} | (uint32_t{p[1]} << 8) | (uint32_t{p[2]} << 16) | (uint32_t{p[3]} << 24);
}

}  // namespace

size_t NztArray::element_count() const {
  size_t n = dims.empty() ? 0 : 1;
  for (uint32_t d : dims) n *= d;
  return n;
}

std::vector<uint8_t> encode_nzt(const NztArray& array) {
  if (array.dims.empty() || array.dims.size() > 255) throw NztError("ndim must be in 1..255");
  if (array.element_count() != array.data.size()) throw NztError("data length does not match dims");
  std::vector<uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(5 + 4 * array.dims.size() + 4 * array.data.size());
  out.push_back(static_cast<uint8_t>(array.dims.size()));
  for (uint32_t d : array.dims) put_u32(out, d);
  for (float f : array.data) {
    if (!std::isfinite(f)) throw NztError("non-finite value");
    put_u32(out, std::bit_cast<uint32_t>(f));
  }
  return out;
}

NztArray decode_nzt(std::span<const uint8_t> bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw NztError("bad magic");
  const size_t ndim = bytes[4];
  if (ndim == 0) throw NztError("zero dimensions");
  if (bytes.size() < 5 + 4 * ndim) throw NztError("truncated header");

  NztArray array;
  array.dims.resize(ndim);
  // Element count must fit both size_t and the byte budget of a real file.
  constexpr uint64_t kMaxElements = std::numeric_limits<uint64_t>::max() / 8;
  uint64_t count = 1;
  for (size_t i = 0; i < ndim; ++i) {
    array.dims[i] = get_u32(bytes.data() + 5 + 4 * i);
    if (array.dims[i] != 0 && count > kMaxElements / array.dims[i]) {
      throw NztError("dimension overflow");
    }
    count *= array.dims[i];
  }
  const size_t offset = 5 + 4 * ndim;
  const uint64_t available = bytes.size() - offset;
  if (available < 4 * count) throw NztError("truncated payload");
  if (available > 4 * count) throw NztError("trailing bytes after payload");

  array.data.resize(count);
  for (size_t i = 0; i < count; ++i) {
    array.data[i] = std::bit_cast<float>(get_u32(bytes.data() + offset + 4 * i));
  }
  return array;
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_nzt(const NztArray& array, const std::filesystem::path& path) {
  write_file_bytes(path, encode_nzt(array));
}

NztArray read_nzt(const std::filesystem::path& path) { return decode_nzt(read_file_bytes(path)); }

NztArray to_nzt(const LatentTensor& tensor) {
  const Shape& s = tensor.shape();
  NztArray array{{s.channels, s.height, s.width}, {}};
  array.data.reserve(tensor.size());
  for (double v : tensor.data()) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) throw NztError("value not representable as finite f32");
    array.data.push_back(f);
  }
  return array;
}

LatentTensor latent_from_nzt(const NztArray& array) {
  if (array.dims.size() != 3) {
    throw NztError("expected a 3-D tensor, got ndim=" + std::to_string(array.dims.size()));
  }
  Shape shape{array.dims[0], array.dims[1], array.dims[2]};
  return LatentTensor(shape, std::vector<double>(array.data.begin(), array.data.end()));
}

void tensor_write(const LatentTensor& tensor, const std::filesystem::path& path) {
  write_nzt(to_nzt(tensor), path);
}

LatentTensor tensor_read(const std::filesystem::path& path) {
  return latent_from_nzt(read_nzt(path));
}

}  // namespace noisecoder
