#pragma once

#include <stdexcept>
#include <string_view>

#include "noisecoder/core/tensor.hpp"
#include "noisecoder/schedule.hpp"
#include "noisecoder/score_model.hpp"

namespace noisecoder {

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic Heun integration of the probability-flow ODE
/// dx/dsigma = (x - D(x; sigma)) / sigma, from x = sigma_0 * z down to
/// sigma_N = 0. Every step but the last is a Heun step; the last one ends
/// at sigma = 0 and is plain Euler. Exactly 2N - 1 denoiser calls.
///
/// Throws SamplerError("integration diverged") on a non-finite state and
/// std::invalid_argument on a shape mismatch.
LatentTensor heun_forward(const LatentTensor& z, const SigmaSchedule& schedule, ScoreModel& model,
                          std::string_view context = {});

/// Approximate inverse of heun_forward: returns z' = x(sigma_max) / sigma_max.
///
/// The drift is undefined at sigma = 0, so the sample is first lifted to
/// sigma_min by one Euler step with the drift evaluated at (x0, sigma_min),
/// mirroring the forward's final Euler step. The same Heun rule then runs
/// over the reversed grid sigma_min -> sigma_max. Exactly 2N - 1 denoiser
/// calls, like the forward direction.
LatentTensor heun_inverse(const LatentTensor& x0, const SigmaSchedule& schedule, ScoreModel& model,
                          std::string_view context = {});

}  // namespace noisecoder
