#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "noisecoder/score_model.hpp"

namespace noisecoder {

struct MixtureComponent {
  double weight = 1.0;
  LatentTensor mean;
  double stddev = 1.0;
};

/// Exact denoiser of an isotropic Gaussian mixture p = sum_k w_k N(mu_k, s_k^2 I).
///
/// Noising by sigma gives p_sigma = sum_k w_k N(mu_k, (s_k^2 + sigma^2) I), so
///   D(x; sigma) = sum_k gamma_k(x) (s_k^2 x + sigma^2 mu_k) / (s_k^2 + sigma^2)
/// with responsibilities gamma_k evaluated by log-sum-exp.
class GaussianMixtureModel final : public ScoreModel {
 public:
  /// Weights must be positive and sum to 1 within 1e-12 (they are then
  /// renormalized); means must share one shape; stddevs must be positive.
  explicit GaussianMixtureModel(std::vector<MixtureComponent> components);

  /// Fixture pair: `path` holds the means as a (K, C, H, W) NZT1 tensor and
  /// `<stem>.params.nzt` next to it holds (K, 2) rows of (weight, stddev).
  static GaussianMixtureModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  static std::filesystem::path params_path(const std::filesystem::path& means_path);

  /// Desk-scale stand-in for an image dataset: `count` equal-weight
  /// components with means drawn uniformly from [-mean_bound, mean_bound].
  static GaussianMixtureModel make_fixture(Shape shape, uint32_t count, double stddev, double mean_bound,
                                           uint64_t seed);

  Shape shape() const override { return shape_; }
  LatentTensor denoise(const LatentTensor& x, double sigma, std::string_view context) override;
  bool concurrent_safe() const override { return true; }

  LatentTensor denoise(const LatentTensor& x, double sigma) const;
  std::vector<double> responsibilities(const LatentTensor& x, double sigma) const;
  /// Directional derivative dD(x; sigma)[u].
  LatentTensor jvp(const LatentTensor& x, double sigma, const LatentTensor& u) const;
  /// sum_k w_k mu_k
  LatentTensor mixture_mean() const;

  const std::vector<MixtureComponent>& components() const { return components_; }

 private:
  Shape shape_;
  std::vector<MixtureComponent> components_;
};

}  // namespace noisecoder
