#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace noisecoder {

/// (channels, height, width) of a latent or image tensor.
struct Shape {
  uint32_t channels = 0;
  uint32_t height = 0;
  uint32_t width = 0;

  size_t plane() const { return size_t{height} * width; }
  size_t size() const { return size_t{channels} * plane(); }
  bool valid() const { return channels > 0 && height > 0 && width > 0; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense C x H x W tensor of doubles, channel-major: index = c*H*W + y*W + x.
///
/// Construction rejects non-positive shapes and non-finite values. The
/// mutable accessors do not re-check finiteness; code that writes into a
/// tensor is responsible for keeping it finite (the sampler checks after
/// every step).
class LatentTensor {
 public:
  LatentTensor() = default;
  explicit LatentTensor(Shape shape, double fill = 0.0);
  LatentTensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::span<double> channel(uint32_t c);
  std::span<const double> channel(uint32_t c) const;

  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  double& at(uint32_t c, uint32_t y, uint32_t x) {
    return data_[c * shape_.plane() + size_t{y} * shape_.width + x];
  }
  double at(uint32_t c, uint32_t y, uint32_t x) const {
    return data_[c * shape_.plane() + size_t{y} * shape_.width + x];
  }

  bool all_finite() const;

  friend bool operator==(const LatentTensor&, const LatentTensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

double max_abs_diff(const LatentTensor& a, const LatentTensor& b);

}  // namespace noisecoder
