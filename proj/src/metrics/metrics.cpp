#include "noisecoder/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "noisecoder/core/bits.hpp"

namespace noisecoder::metrics {

double accuracy(std::span<const uint8_t> m, std::span<const uint8_t> m_prime) {
  if (m.size() != m_prime.size()) {
    throw std::invalid_argument("message lengths differ (" + std::to_string(m.size()) + " vs " +
                                std::to_string(m_prime.size()) + ")");
  }
  if (m.empty()) throw std::invalid_argument("empty message");
  return 1.0 - static_cast<double>(hamming_distance(m, m_prime)) / static_cast<double>(m.size());
}

double detection_error(std::span<const double> stego_scores, std::span<const double> cover_scores) {
  if (stego_scores.empty() || cover_scores.empty()) throw std::invalid_argument("empty score set");
  struct Entry {
    double score;
    bool stego;
  };
  std::vector<Entry> all;
  all.reserve(stego_scores.size() + cover_scores.size());
  for (double s : stego_scores) all.push_back({s, true});
  for (double s : cover_scores) all.push_back({s, false});
  for (const auto& e : all)
    if (std::isnan(e.score)) throw std::invalid_argument("NaN score");
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  const double ns = static_cast<double>(stego_scores.size());
  const double nc = static_cast<double>(cover_scores.size());
  // Rule "stego iff score >= t". With t at the smallest score everything is
  // called stego: P_FA = 1, P_MD = 0. Walking t upward moves each score
  // group below the threshold.
  size_t cover_below = 0, stego_below = 0;
  double best = 0.5;
  auto consider = [&] {
    const double p_fa = 1.0 - cover_below / nc;
    const double p_md = stego_below / ns;
    const double e = 0.5 * (p_fa + p_md);
    best = std::min({best, e, 1.0 - e});
  };
  for (size_t i = 0; i < all.size();) {
    consider();
    const double v = all[i].score;
    for (; i < all.size() && all[i].score == v; ++i) (all[i].stego ? stego_below : cover_below)++;
  }
  consider();  // threshold above every score
  return best;
}

FeatureSet::FeatureSet(size_t r, size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

FeatureSet::FeatureSet(size_t r, size_t c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) throw std::invalid_argument("feature values do not match rows x cols");
}

FeatureSet FeatureSet::from_nzt(const NztArray& array) {
  if (array.dims.size() == 1) {
    return FeatureSet(array.dims[0], 1, std::vector<double>(array.data.begin(), array.data.end()));
  }
  if (array.dims.size() != 2) throw std::invalid_argument("feature matrix must be a 2-D tensor");
  return FeatureSet(array.dims[0], array.dims[1], std::vector<double>(array.data.begin(), array.data.end()));
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void moments(const FeatureSet& f, VectorXd& mean, MatrixXd& cov) {
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      f.values.data(), static_cast<Eigen::Index>(f.rows), static_cast<Eigen::Index>(f.cols));
  mean = x.colwise().mean().transpose();
  const MatrixXd centered = x.rowwise() - mean.transpose();
  cov = (centered.transpose() * centered) / static_cast<double>(f.rows - 1);
}

// Square root of a symmetric PSD matrix; negative eigenvalues (rounding) become 0.
MatrixXd sqrt_psd(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  VectorXd ev = eig.eigenvalues();
  for (auto& v : ev) v = std::sqrt(std::max(v, 0.0));
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureSet& a, const FeatureSet& b) {
  if (a.cols != b.cols) throw std::invalid_argument("feature dimensions differ");
  if (a.cols == 0) throw std::invalid_argument("empty feature vectors");
  if (a.rows < a.cols + 1 || b.rows < b.cols + 1) {
    throw std::invalid_argument("need more samples than feature dimensions");
  }
  VectorXd mu_a, mu_b;
  MatrixXd cov_a, cov_b;
  moments(a, mu_a, cov_a);
  moments(b, mu_b, cov_b);

  const MatrixXd root_a = sqrt_psd(cov_a);
  MatrixXd inner = root_a * cov_b * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  const double clip = 1e-10 * std::max(inner.trace(), 0.0);
  double tr_root = 0.0;
  for (double v : eig.eigenvalues()) {
    if (v < -clip) throw std::runtime_error("covariance product is not positive semidefinite");
    if (v > 0.0) tr_root += std::sqrt(v);
  }
  const double d = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_root;
  return std::max(d, 0.0);
}

double bits_per_pixel(size_t n_bits, uint32_t width, uint32_t height) {
  if (width == 0 || height == 0) throw std::invalid_argument("image has no pixels");
  return static_cast<double>(n_bits) / (static_cast<double>(width) * height);
}

}  // namespace noisecoder::metrics
