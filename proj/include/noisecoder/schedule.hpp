#pragma once

#include <span>
#include <vector>

namespace noisecoder {

struct ScheduleParams {
  double sigma_max = 80.0;
  double sigma_min = 0.002;
  double rho = 7.0;
  int steps = 40;
};

/// EDM rho-spaced noise levels:
///   sigma_i = (sigma_max^(1/rho) + i/(N-1) * (sigma_min^(1/rho) - sigma_max^(1/rho)))^rho
/// for i < N, followed by sigma_N = 0.
class SigmaSchedule {
 public:
  /// Throws std::invalid_argument unless N >= 2, 0 < sigma_min < sigma_max, rho > 0.
  static SigmaSchedule build(const ScheduleParams& params);

  const ScheduleParams& params() const { return params_; }
  int steps() const { return params_.steps; }
  /// N + 1 values, sigma_0 = sigma_max down to sigma_N = 0.
  std::span<const double> sigmas() const { return sigmas_; }
  double operator[](int i) const { return sigmas_[static_cast<size_t>(i)]; }

 private:
  ScheduleParams params_;
  std::vector<double> sigmas_;
};

}  // namespace noisecoder
