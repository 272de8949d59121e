#include "noisecoder/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace noisecoder {

SigmaSchedule SigmaSchedule::build(const ScheduleParams& p) {
  if (p.steps < 2) throw std::invalid_argument("schedule needs at least 2 steps");
  if (!(p.sigma_min > 0.0) || !(p.sigma_min < p.sigma_max) || !std::isfinite(p.sigma_max)) {
    throw std::invalid_argument("schedule needs 0 < sigma_min < sigma_max");
  }
  if (!(p.rho > 0.0) || !std::isfinite(p.rho)) throw std::invalid_argument("schedule needs rho > 0");

  SigmaSchedule s;
  s.params_ = p;
  s.sigmas_.resize(static_cast<size_t>(p.steps) + 1);
  const double hi = std::pow(p.sigma_max, 1.0 / p.rho);
  const double lo = std::pow(p.sigma_min, 1.0 / p.rho);
  for (int i = 0; i < p.steps; ++i) {
    const double t = static_cast<double>(i) / (p.steps - 1);
    s.sigmas_[static_cast<size_t>(i)] = std::pow(hi + t * (lo - hi), p.rho);
  }
  // Pin the endpoints so they do not carry pow() round-off.
  s.sigmas_.front() = p.sigma_max;
  s.sigmas_[static_cast<size_t>(p.steps) - 1] = p.sigma_min;
  s.sigmas_.back() = 0.0;
  return s;
}

}  // namespace noisecoder
