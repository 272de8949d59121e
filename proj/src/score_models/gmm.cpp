#include "noisecoder/score_models/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "noisecoder/core/nzt.hpp"
#include "noisecoder/core/rng.hpp"

namespace noisecoder {

GaussianMixtureModel::GaussianMixtureModel(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
  shape_ = components_.front().mean.shape();
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.mean.shape() != shape_) throw std::invalid_argument("mixture means must share one shape");
    if (!(c.weight > 0.0)) throw std::invalid_argument("mixture weights must be positive");
    if (!(c.stddev > 0.0) || !std::isfinite(c.stddev)) {
      throw std::invalid_argument("mixture stddevs must be positive");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("mixture weights must sum to 1 (got " + std::to_string(total) + ")");
  }
  for (auto& c : components_) c.weight /= total;
}

std::vector<double> GaussianMixtureModel::responsibilities(const LatentTensor& x, double sigma) const {
  if (x.shape() != shape_) throw std::invalid_argument("tensor shape does not match mixture");
  const double dim = static_cast<double>(x.size());
  std::vector<double> log_r(components_.size());
  for (size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    const double var = c.stddev * c.stddev + sigma * sigma;
    double sq = 0.0;
    const auto mu = c.mean.data();
    for (size_t j = 0; j < x.size(); ++j) {
      const double diff = x[j] - mu[j];
      sq += diff * diff;
    }
    log_r[k] = std::log(c.weight) - sq / (2.0 * var) - 0.5 * dim * std::log(var);
  }
  const double peak = *std::max_element(log_r.begin(), log_r.end());
  double norm = 0.0;
  for (double& v : log_r) {
    v = std::exp(v - peak);
    norm += v;
  }
  for (double& v : log_r) v /= norm;
  return log_r;
}

LatentTensor GaussianMixtureModel::denoise(const LatentTensor& x, double sigma) const {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  if (x.shape() != shape_) throw std::invalid_argument("tensor shape does not match mixture");
  if (sigma == 0.0) return x;

  const auto gamma = responsibilities(x, sigma);
  const double s2 = sigma * sigma;
  LatentTensor out(shape_);
  for (size_t k = 0; k < components_.size(); ++k) {
    if (gamma[k] == 0.0) continue;
    const auto& c = components_[k];
    const double v = c.stddev * c.stddev;
    const double a = gamma[k] * v / (v + s2);
    const double b = gamma[k] * s2 / (v + s2);
    const auto mu = c.mean.data();
    for (size_t j = 0; j < x.size(); ++j) out[j] += a * x[j] + b * mu[j];
  }
  return out;
}

LatentTensor GaussianMixtureModel::denoise(const LatentTensor& x, double sigma, std::string_view) {
  return static_cast<const GaussianMixtureModel&>(*this).denoise(x, sigma);
}

LatentTensor GaussianMixtureModel::jvp(const LatentTensor& x, double sigma, const LatentTensor& u) const {
  if (u.shape() != shape_) throw std::invalid_argument("direction shape does not match mixture");
  LatentTensor out(shape_);
  if (sigma == 0.0) return u;

  // D = sum_k g_k a_k with a_k = (v_k x + s2 mu_k)/(v_k + s2) and
  // dg_k[u] = g_k (l_k - sum_j g_j l_j), l_k = -(x - mu_k).u / (v_k + s2).
  const auto gamma = responsibilities(x, sigma);
  const double s2 = sigma * sigma;
  const size_t n = components_.size();
  std::vector<double> slope(n);
  double mean_slope = 0.0;
  for (size_t k = 0; k < n; ++k) {
    const auto& c = components_[k];
    const double var = c.stddev * c.stddev + s2;
    double dot = 0.0;
    const auto mu = c.mean.data();
    for (size_t j = 0; j < x.size(); ++j) dot += (x[j] - mu[j]) * u[j];
    slope[k] = -dot / var;
    mean_slope += gamma[k] * slope[k];
  }
  for (size_t k = 0; k < n; ++k) {
    const auto& c = components_[k];
    const double v = c.stddev * c.stddev;
    const double var = v + s2;
    const double dg = gamma[k] * (slope[k] - mean_slope);
    const auto mu = c.mean.data();
    for (size_t j = 0; j < x.size(); ++j) {
      const double a = (v * x[j] + s2 * mu[j]) / var;
      out[j] += gamma[k] * (v / var) * u[j] + dg * a;
    }
  }
  return out;
}

LatentTensor GaussianMixtureModel::mixture_mean() const {
  LatentTensor out(shape_);
  for (const auto& c : components_) {
    for (size_t j = 0; j < out.size(); ++j) out[j] += c.weight * c.mean[j];
  }
  return out;
}

std::filesystem::path GaussianMixtureModel::params_path(const std::filesystem::path& means_path) {
  auto p = means_path;
  p.replace_extension(".params.nzt");
  return p;
}

GaussianMixtureModel GaussianMixtureModel::load(const std::filesystem::path& path) {
  const NztArray means = read_nzt(path);
  const NztArray params = read_nzt(params_path(path));
  if (means.dims.size() != 4) throw std::invalid_argument("mixture means must be a (K,C,H,W) tensor");
  const uint32_t k = means.dims[0];
  if (params.dims != std::vector<uint32_t>{k, 2}) {
    throw std::invalid_argument("mixture params must be a (K,2) tensor");
  }
  const Shape shape{means.dims[1], means.dims[2], means.dims[3]};
  std::vector<MixtureComponent> comps;
  double total = 0.0;
  for (uint32_t i = 0; i < k; ++i) total += params.data[2 * i];
  for (uint32_t i = 0; i < k; ++i) {
    const auto first = means.data.begin() + static_cast<std::ptrdiff_t>(i * shape.size());
    comps.push_back({params.data[2 * i] / total,
                     LatentTensor(shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(shape.size()))),
                     params.data[2 * i + 1]});
  }
  return GaussianMixtureModel(std::move(comps));
}

void GaussianMixtureModel::save(const std::filesystem::path& path) const {
  const auto k = static_cast<uint32_t>(components_.size());
  NztArray means{{k, shape_.channels, shape_.height, shape_.width}, {}};
  NztArray params{{k, 2}, {}};
  for (const auto& c : components_) {
    for (double v : c.mean.data()) means.data.push_back(static_cast<float>(v));
    params.data.push_back(static_cast<float>(c.weight));
    params.data.push_back(static_cast<float>(c.stddev));
  }
  write_nzt(means, path);
  write_nzt(params, params_path(path));
}

GaussianMixtureModel GaussianMixtureModel::make_fixture(Shape shape, uint32_t count, double stddev,
                                                        double mean_bound, uint64_t seed) {
  if (count == 0) throw std::invalid_argument("fixture needs at least one component");
  Rng rng(seed, Stream::fixture);
  std::vector<MixtureComponent> comps;
  for (uint32_t k = 0; k < count; ++k) {
    LatentTensor mean(shape);
    // Rounded through f32 so a saved-and-reloaded fixture is identical.
    for (double& v : mean.data()) v = static_cast<float>(mean_bound * (2.0 * rng.uniform() - 1.0));
    comps.push_back({1.0 / count, std::move(mean), static_cast<float>(stddev)});
  }
  return GaussianMixtureModel(std::move(comps));
}

}  // namespace noisecoder
