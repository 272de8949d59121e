#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "noisecoder/core/nzt.hpp"
#include "noisecoder/core/tensor.hpp"

namespace noisecoder::metrics {

/// 1 - hamming(m, m') / len(m). Throws on length mismatch or empty input.
double accuracy(std::span<const uint8_t> m, std::span<const uint8_t> m_prime);

/// min over thresholds of (P_FA + P_MD) / 2. Higher scores mean "stego";
/// thresholds run over every distinct score plus one above all of them, and
/// the reversed decision rule is tried as well, so the result is <= 0.5.
double detection_error(std::span<const double> stego_scores, std::span<const double> cover_scores);

/// n x d matrix of feature vectors, row-major.
struct FeatureSet {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;

  FeatureSet() = default;
  FeatureSet(size_t rows, size_t cols);
  FeatureSet(size_t rows, size_t cols, std::vector<double> values);

  double& at(size_t r, size_t c) { return values[r * cols + c]; }
  double at(size_t r, size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(size_t r) const { return {values.data() + r * cols, cols}; }

  /// 2-D NZT1 array (a 1-D array is read as a single column).
  static FeatureSet from_nzt(const NztArray& array);
};

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2), with
/// unbiased sample covariances. Needs equal widths and more rows than columns.
double frechet_distance(const FeatureSet& a, const FeatureSet& b);

/// length(bits) / (width * height)
double bits_per_pixel(size_t n_bits, uint32_t width, uint32_t height);

/// Per-channel mean, variance, lag-1 horizontal and vertical
/// autocorrelation, and mean squared Laplacian residual: 5 * C values.
std::vector<double> steganalysis_features(const LatentTensor& image);

/// Fisher linear discriminant over steganalysis_features. Deliberately weak;
/// it only makes detection-error experiments runnable end to end.
class LinearSteganalyzer {
 public:
  /// At least 20 images per class, all of one shape.
  static LinearSteganalyzer train(std::span<const LatentTensor> stego, std::span<const LatentTensor> cover);

  /// Higher means more likely stego.
  double score(const LatentTensor& image) const;
  std::vector<double> score(std::span<const LatentTensor> images) const;

  const std::vector<double>& weights() const { return weights_; }
  bool regularized() const { return regularized_; }

 private:
  std::vector<double> weights_;
  double bias_ = 0.0;
  bool regularized_ = false;
};

}  // namespace noisecoder::metrics
