#include "noisecoder/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace noisecoder {

std::string Shape::str() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

LatentTensor::LatentTensor(Shape shape, double fill) : shape_(shape) {
  if (!shape.valid()) {
    throw std::invalid_argument("tensor shape must be strictly positive, got " + shape.str());
  }
  if (!std::isfinite(fill)) {
    throw std::invalid_argument("tensor fill value must be finite");
  }
  data_.assign(shape.size(), fill);
}

LatentTensor::LatentTensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (!shape.valid()) {
    throw std::invalid_argument("tensor shape must be strictly positive, got " + shape.str());
  }
  if (data_.size() != shape.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape.str());
  }
  if (!all_finite()) {
    throw std::invalid_argument("tensor data must be finite");
  }
}

std::span<double> LatentTensor::channel(uint32_t c) {
  if (c >= shape_.channels) throw std::out_of_range("channel index out of range");
  return std::span<double>(data_).subspan(c * shape_.plane(), shape_.plane());
}

std::span<const double> LatentTensor::channel(uint32_t c) const {
  if (c >= shape_.channels) throw std::out_of_range("channel index out of range");
  return std::span<const double>(data_).subspan(c * shape_.plane(), shape_.plane());
}

bool LatentTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const LatentTensor& a, const LatentTensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
  }
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace noisecoder
