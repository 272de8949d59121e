#pragma once

#include <string_view>

#include "noisecoder/core/tensor.hpp"

namespace noisecoder {

/// Denoiser D(x; sigma) of a variance-exploding diffusion model. The score
/// is (D(x; sigma) - x) / sigma^2.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  /// Shape of the tensors this model accepts and returns.
  virtual Shape shape() const = 0;

  /// `context` is forwarded untouched (prompt, guidance scale, ...); models
  /// that are not conditional ignore it.
  virtual LatentTensor denoise(const LatentTensor& x, double sigma, std::string_view context) = 0;

  /// True if denoise() may be called from several threads at once.
  virtual bool concurrent_safe() const { return false; }
};

}  // namespace noisecoder
