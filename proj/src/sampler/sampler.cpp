#include "noisecoder/sampler.hpp"

#include <cmath>

namespace noisecoder {

namespace {

void require_model_shape(const LatentTensor& x, const ScoreModel& model) {
  if (x.shape() != model.shape()) {
    throw std::invalid_argument("model shape mismatch: tensor " + x.shape().str() + ", model " +
                                model.shape().str());
  }
}

LatentTensor checked_denoise(ScoreModel& model, const LatentTensor& x, double sigma,
                             std::string_view context) {
  LatentTensor d = model.denoise(x, sigma, context);
  if (d.shape() != x.shape()) {
    throw std::invalid_argument("model returned " + d.shape().str() + " for input " + x.shape().str());
  }
  return d;
}

// d = (x - D(x; sigma)) / sigma
void drift(const LatentTensor& x, const LatentTensor& denoised, double sigma, std::vector<double>& out) {
  out.resize(x.size());
  for (size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - denoised[j]) / sigma;
}

void require_finite(const LatentTensor& x) {
  if (!x.all_finite()) throw SamplerError("integration diverged");
}

// One step from sigma_from to sigma_to (both > 0 unless euler_only).
void step(LatentTensor& x, double sigma_from, double sigma_to, bool euler_only, ScoreModel& model,
          std::string_view context, std::vector<double>& d, std::vector<double>& d2) {
  const double h = sigma_to - sigma_from;
  drift(x, checked_denoise(model, x, sigma_from, context), sigma_from, d);
  if (euler_only) {
    for (size_t j = 0; j < x.size(); ++j) x[j] += h * d[j];
    require_finite(x);
    return;
  }
  LatentTensor predicted = x;
  for (size_t j = 0; j < x.size(); ++j) predicted[j] += h * d[j];
  require_finite(predicted);
  drift(predicted, checked_denoise(model, predicted, sigma_to, context), sigma_to, d2);
  for (size_t j = 0; j < x.size(); ++j) x[j] += h * 0.5 * (d[j] + d2[j]);
  require_finite(x);
}

}  // namespace

LatentTensor heun_forward(const LatentTensor& z, const SigmaSchedule& schedule, ScoreModel& model,
                          std::string_view context) {
  require_model_shape(z, model);
  const auto sigmas = schedule.sigmas();
  const int n = schedule.steps();

  LatentTensor x = z;
  for (double& v : x.data()) v *= sigmas[0];

  std::vector<double> d, d2;
  for (int i = 0; i < n; ++i) {
    const double to = sigmas[static_cast<size_t>(i) + 1];
    step(x, sigmas[static_cast<size_t>(i)], to, to == 0.0, model, context, d, d2);
  }
  return x;
}

LatentTensor heun_inverse(const LatentTensor& x0, const SigmaSchedule& schedule, ScoreModel& model,
                          std::string_view context) {
  require_model_shape(x0, model);
  const auto sigmas = schedule.sigmas();
  const int n = schedule.steps();
  const double sigma_min = sigmas[static_cast<size_t>(n) - 1];

  LatentTensor x = x0;
  std::vector<double> d, d2;

  // Lift 0 -> sigma_min: x += sigma_min * (x - D(x; sigma_min)) / sigma_min.
  drift(x, checked_denoise(model, x, sigma_min, context), sigma_min, d);
  for (size_t j = 0; j < x.size(); ++j) x[j] += sigma_min * d[j];
  require_finite(x);

  for (int i = n - 1; i > 0; --i) {
    step(x, sigmas[static_cast<size_t>(i)], sigmas[static_cast<size_t>(i) - 1], false, model, context, d,
         d2);
  }
  for (double& v : x.data()) v /= sigmas[0];
  return x;
}

}  // namespace noisecoder
