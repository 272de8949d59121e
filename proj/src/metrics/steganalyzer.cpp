#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "noisecoder/metrics.hpp"

namespace noisecoder::metrics {

namespace {

double lag_corr(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  const double den = std::sqrt(saa * sbb);
  return den > 0 ? sab / den : 0.0;
}

constexpr size_t kPerChannel = 5;
constexpr size_t kMinPerClass = 20;

}  // namespace

std::vector<double> steganalysis_features(const LatentTensor& image) {
  const Shape s = image.shape();
  if (s.height < 3 || s.width < 3) throw std::invalid_argument("image too small for steganalysis features");
  std::vector<double> f;
  f.reserve(kPerChannel * s.channels);
  for (uint32_t c = 0; c < s.channels; ++c) {
    const auto ch = image.channel(c);
    double mean = 0;
    for (double v : ch) mean += v;
    mean /= static_cast<double>(ch.size());
    double var = 0;
    for (double v : ch) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ch.size());

    std::vector<double> left, right, up, down;
    for (uint32_t y = 0; y < s.height; ++y)
      for (uint32_t x = 0; x + 1 < s.width; ++x) {
        left.push_back(image.at(c, y, x));
        right.push_back(image.at(c, y, x + 1));
      }
    for (uint32_t y = 0; y + 1 < s.height; ++y)
      for (uint32_t x = 0; x < s.width; ++x) {
        up.push_back(image.at(c, y, x));
        down.push_back(image.at(c, y + 1, x));
      }

    // 4-neighbour Laplacian on interior pixels
    double resid = 0;
    for (uint32_t y = 1; y + 1 < s.height; ++y)
      for (uint32_t x = 1; x + 1 < s.width; ++x) {
        const double r = 4 * image.at(c, y, x) - image.at(c, y - 1, x) - image.at(c, y + 1, x) -
                         image.at(c, y, x - 1) - image.at(c, y, x + 1);
        resid += r * r;
      }
    resid /= static_cast<double>((s.height - 2) * (s.width - 2));

    f.push_back(mean);
    f.push_back(var);
    f.push_back(lag_corr(left, right));
    f.push_back(lag_corr(up, down));
    f.push_back(resid);
  }
  return f;
}

LinearSteganalyzer LinearSteganalyzer::train(std::span<const LatentTensor> stego, std::span<const LatentTensor> cover) {
  if (stego.size() < kMinPerClass || cover.size() < kMinPerClass) {
    throw std::invalid_argument("steganalyzer needs at least 20 images per class");
  }
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const Shape shape = stego.front().shape();

  auto collect = [&](std::span<const LatentTensor> imgs) {
    MatrixXd m;
    for (size_t i = 0; i < imgs.size(); ++i) {
      if (imgs[i].shape() != shape) throw std::invalid_argument("steganalyzer images must share one shape");
      const auto f = steganalysis_features(imgs[i]);
      if (i == 0) m.resize(static_cast<Eigen::Index>(imgs.size()), static_cast<Eigen::Index>(f.size()));
      m.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
    }
    return m;
  };
  const MatrixXd fs = collect(stego);
  const MatrixXd fc = collect(cover);
  const VectorXd mu_s = fs.colwise().mean().transpose();
  const VectorXd mu_c = fc.colwise().mean().transpose();
  const MatrixXd cs = fs.rowwise() - mu_s.transpose();
  const MatrixXd cc = fc.rowwise() - mu_c.transpose();
  MatrixXd within = (cs.transpose() * cs + cc.transpose() * cc) / static_cast<double>(fs.rows() + fc.rows() - 2);

  LinearSteganalyzer out;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(within, Eigen::EigenvaluesOnly);
  const double trace = within.trace();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(lo > 1e-12 * std::max(trace, 1e-300))) {
    within += 1e-6 * std::max(trace, 1e-300) * MatrixXd::Identity(within.rows(), within.cols());
    out.regularized_ = true;
  }
  const VectorXd w = within.ldlt().solve(mu_s - mu_c);
  out.weights_.assign(w.data(), w.data() + w.size());
  out.bias_ = -0.5 * w.dot(mu_s + mu_c);
  return out;
}

double LinearSteganalyzer::score(const LatentTensor& image) const {
  const auto f = steganalysis_features(image);
  if (f.size() != weights_.size()) throw std::invalid_argument("image shape does not match the trained steganalyzer");
  double s = bias_;
  for (size_t i = 0; i < f.size(); ++i) s += weights_[i] * f[i];
  return s;
}

std::vector<double> LinearSteganalyzer::score(std::span<const LatentTensor> images) const {
  std::vector<double> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(score(img));
  return out;
}

}  // namespace noisecoder::metrics
