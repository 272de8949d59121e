#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "noisecoder/core/rng.hpp"
#include "noisecoder/score_models/gmm.hpp"

using namespace noisecoder;

namespace {

LatentTensor normal_tensor(Shape s, uint64_t seed, double scale = 1.0) {
  Rng r(seed, Stream::noise);
  LatentTensor t(s);
  for (double& v : t.data()) v = scale * r.normal();
  return t;
}

}  // namespace

TEST(Gmm, SingleComponentFormula) {
  const Shape s{1, 2, 3};
  const double sd = 0.4;
  GaussianMixtureModel g({{1.0, LatentTensor(s), sd}});
  const auto x = normal_tensor(s, 1, 3.0);
  for (double sigma : {0.01, 0.5, 2.0, 80.0}) {
    const auto d = g.denoise(x, sigma);
    for (size_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(d[i], sd * sd * x[i] / (sd * sd + sigma * sigma), 1e-14);
      // implied score (D - x) / sigma^2
      EXPECT_NEAR((d[i] - x[i]) / (sigma * sigma), -x[i] / (sd * sd + sigma * sigma), 1e-9);
    }
  }
  const auto zero = g.denoise(LatentTensor(s), 1.0);
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
}

TEST(Gmm, SymmetricPairMidpoint) {
  const Shape s{1, 1, 4};
  const LatentTensor mu(s, std::vector<double>{0.5, -0.2, 0.1, 0.9});
  LatentTensor neg(s);
  for (size_t i = 0; i < s.size(); ++i) neg[i] = -mu[i];
  const double sd = 0.3;
  GaussianMixtureModel g({{0.5, mu, sd}, {0.5, neg, sd}});
  const LatentTensor x(s);
  const double sigma = 1.5;
  const auto gamma = g.responsibilities(x, sigma);
  ASSERT_EQ(gamma.size(), 2u);
  EXPECT_NEAR(gamma[0], 0.5, 1e-15);
  EXPECT_NEAR(gamma[1], 0.5, 1e-15);
  const auto d = g.denoise(x, sigma);
  for (double v : d.data()) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Gmm, ResponsibilitiesDirect) {
  // two components on a 1x1x1 tensor, responsibilities from the normal densities
  const Shape s{1, 1, 1};
  GaussianMixtureModel g({{0.3, LatentTensor(s, 1.0), 0.5}, {0.7, LatentTensor(s, -1.0), 0.8}});
  const double x = 0.2, sigma = 0.6;
  auto pdf = [](double v, double m, double var) { return std::exp(-(v - m) * (v - m) / (2 * var)) / std::sqrt(var); };
  const double a = 0.3 * pdf(x, 1.0, 0.25 + 0.36), b = 0.7 * pdf(x, -1.0, 0.64 + 0.36);
  const auto gamma = g.responsibilities(LatentTensor(s, x), sigma);
  EXPECT_NEAR(gamma[0], a / (a + b), 1e-14);
  const double expect = gamma[0] * (0.25 * x + 0.36 * 1.0) / 0.61 + gamma[1] * (0.64 * x - 0.36) / 1.0;
  EXPECT_NEAR(g.denoise(LatentTensor(s, x), sigma)[0], expect, 1e-14);
}

TEST(Gmm, ResponsibilitiesSumToOne) {
  auto g = GaussianMixtureModel::make_fixture(Shape{3, 8, 8}, 5, 0.05, 0.8, 7);
  for (uint64_t k = 0; k < 20; ++k) {
    const auto x = normal_tensor(g.shape(), k, k % 2 ? 80.0 : 0.5);
    for (double sigma : {1e-6, 0.002, 0.3, 10.0, 80.0, 1e6}) {
      double sum = 0;
      for (double v : g.responsibilities(x, sigma)) {
        ASSERT_TRUE(std::isfinite(v));
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12) << sigma;
    }
  }
}

TEST(Gmm, JvpMatchesCentralDifferences) {
  auto g = GaussianMixtureModel::make_fixture(Shape{2, 4, 4}, 3, 0.3, 0.8, 8);
  const double h = 1e-5;
  for (uint64_t k = 0; k < 10; ++k) {
    const auto x = normal_tensor(g.shape(), 100 + k, 0.7);
    const auto u = normal_tensor(g.shape(), 200 + k);
    for (double sigma : {0.3, 1.0, 5.0}) {
      LatentTensor xp = x, xm = x;
      for (size_t i = 0; i < x.size(); ++i) {
        xp[i] += h * u[i];
        xm[i] -= h * u[i];
      }
      const auto dp = g.denoise(xp, sigma), dm = g.denoise(xm, sigma);
      const auto j = g.jvp(x, sigma, u);
      double num = 0, den = 0;
      for (size_t i = 0; i < x.size(); ++i) {
        const double fd = (dp[i] - dm[i]) / (2 * h);
        num = std::max(num, std::abs(fd - j[i]));
        den = std::max(den, std::abs(j[i]));
      }
      EXPECT_LE(num / den, 1e-5) << k << " " << sigma;
    }
  }
}

TEST(Gmm, Asymptotics) {
  auto g = GaussianMixtureModel::make_fixture(Shape{3, 4, 4}, 4, 0.2, 0.8, 9);
  const auto x = normal_tensor(g.shape(), 3);
  EXPECT_LT(max_abs_diff(g.denoise(x, 1e-6), x), 1e-9);
  EXPECT_LT(max_abs_diff(g.denoise(x, 1e6), g.mixture_mean()), 1e-9);
  EXPECT_EQ(g.denoise(x, 0.0), x);
}

TEST(Gmm, ExtremeInputsStayFinite) {
  auto g = GaussianMixtureModel::make_fixture(Shape{3, 8, 8}, 4, 0.005, 0.8, 10);
  const auto x = normal_tensor(g.shape(), 4, 80.0);
  EXPECT_TRUE(g.denoise(x, 0.002).all_finite());
  EXPECT_TRUE(g.denoise(x, 80.0).all_finite());
}

TEST(Gmm, ConstructorChecks) {
  const Shape s{1, 2, 2};
  EXPECT_THROW(GaussianMixtureModel({}), std::invalid_argument);
  EXPECT_THROW(GaussianMixtureModel({{0.5, LatentTensor(s), 1.0}}), std::invalid_argument);
  EXPECT_THROW(GaussianMixtureModel({{1.0, LatentTensor(s), 0.0}}), std::invalid_argument);
  EXPECT_THROW(GaussianMixtureModel({{0.5, LatentTensor(s), 1.0}, {0.5, LatentTensor(Shape{1, 2, 3}), 1.0}}),
               std::invalid_argument);
  GaussianMixtureModel g({{1.0, LatentTensor(s), 1.0}});
  EXPECT_THROW(g.denoise(LatentTensor(Shape{1, 2, 3}), 1.0), std::invalid_argument);
}

TEST(Gmm, SaveLoad) {
  auto g = GaussianMixtureModel::make_fixture(Shape{2, 3, 3}, 3, 0.25, 0.5, 11);
  const auto path = std::filesystem::temp_directory_path() / "nc_gmm_test.nzt";
  g.save(path);
  EXPECT_TRUE(std::filesystem::exists(GaussianMixtureModel::params_path(path)));
  auto h = GaussianMixtureModel::load(path);
  ASSERT_EQ(h.components().size(), 3u);
  for (size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(h.components()[k].weight, g.components()[k].weight, 1e-7);
    EXPECT_NEAR(h.components()[k].stddev, 0.25, 1e-7);
    // means are stored as f32
    EXPECT_LT(max_abs_diff(h.components()[k].mean, g.components()[k].mean), 1e-7);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(GaussianMixtureModel::params_path(path));
}

TEST(Gmm, FixtureLoads) {
  auto g = GaussianMixtureModel::load(NOISECODER_FIXTURE);
  EXPECT_EQ(g.shape(), (Shape{3, 16, 16}));
  ASSERT_EQ(g.components().size(), 4u);
  for (const auto& c : g.components()) {
    EXPECT_NEAR(c.weight, 0.25, 1e-7);
    for (double v : c.mean.data()) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}
