#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "noisecoder/projection.hpp"
#include "noisecoder/sampler.hpp"
#include "noisecoder/score_models/gmm.hpp"
#include "noisecoder/stego.hpp"

using namespace noisecoder;

namespace {

class Counting final : public ScoreModel {
 public:
  explicit Counting(ScoreModel& inner) : inner_(inner) {}
  Shape shape() const override { return inner_.shape(); }
  LatentTensor denoise(const LatentTensor& x, double sigma, std::string_view context) override {
    ++calls;
    sigmas.push_back(sigma);
    last_context = std::string(context);
    return inner_.denoise(x, sigma, context);
  }
  int calls = 0;
  std::vector<double> sigmas;
  std::string last_context;

 private:
  ScoreModel& inner_;
};

class Identity final : public ScoreModel {
 public:
  explicit Identity(Shape s) : s_(s) {}
  Shape shape() const override { return s_; }
  LatentTensor denoise(const LatentTensor& x, double, std::string_view) override { return x; }

 private:
  Shape s_;
};

class Exploding final : public ScoreModel {
 public:
  explicit Exploding(Shape s) : s_(s) {}
  Shape shape() const override { return s_; }
  LatentTensor denoise(const LatentTensor& x, double, std::string_view) override {
    LatentTensor out = x;
    out[0] = std::numeric_limits<double>::infinity();
    return out;
  }

 private:
  Shape s_;
};

GaussianMixtureModel single_gaussian(Shape s, double stddev) {
  return GaussianMixtureModel({MixtureComponent{1.0, LatentTensor(s), stddev}});
}

LatentTensor normal_tensor(Shape s, uint64_t seed) {
  Rng r(seed, Stream::noise);
  LatentTensor t(s);
  for (double& v : t.data()) v = r.normal();
  return t;
}

// x(0) for the linear ODE dx/dsigma = sigma x / (s^2 + sigma^2) started at x(sigma_max) = sigma_max z.
double gaussian_endpoint(double z, double s, double sigma_max) {
  return sigma_max * z * s / std::sqrt(s * s + sigma_max * sigma_max);
}

double forward_error(int steps, double s, const LatentTensor& z) {
  auto gmm = single_gaussian(z.shape(), s);
  const auto sched = SigmaSchedule::build({80.0, 0.002, 7.0, steps});
  const LatentTensor x = heun_forward(z, sched, gmm);
  double err = 0;
  for (size_t i = 0; i < z.size(); ++i) err = std::max(err, std::abs(x[i] - gaussian_endpoint(z[i], s, 80.0)));
  return err;
}

}  // namespace

TEST(Schedule, Endpoints) {
  const auto s = SigmaSchedule::build({});
  ASSERT_EQ(s.sigmas().size(), 41u);
  EXPECT_DOUBLE_EQ(s[0], 80.0);
  EXPECT_NEAR(s[39], 0.002, 1e-15);
  EXPECT_EQ(s[40], 0.0);
}

TEST(Schedule, GoldenInterior) {
  // high-precision evaluation of the grid formula
  const auto s = SigmaSchedule::build({});
  EXPECT_NEAR(s[20], 2.240439758931200495, 1e-12);
  EXPECT_NEAR(s[1], 69.450946037196895445, 1e-11);
}

TEST(Schedule, StrictlyDecreasing) {
  for (int n : {2, 3, 18, 40, 200}) {
    for (double rho : {1.0, 3.0, 7.0}) {
      const auto s = SigmaSchedule::build({10.0, 0.01, rho, n});
      EXPECT_DOUBLE_EQ(s[0], 10.0);
      EXPECT_NEAR(s[n - 1], 0.01, 1e-14);
      for (int i = 0; i < n; ++i) ASSERT_GT(s[i], s[i + 1]) << n << " " << rho << " " << i;
    }
  }
}

TEST(Schedule, DomainErrors) {
  EXPECT_THROW(SigmaSchedule::build({80, 0.002, 7, 1}), std::invalid_argument);
  EXPECT_THROW(SigmaSchedule::build({80, 0.0, 7, 10}), std::invalid_argument);
  EXPECT_THROW(SigmaSchedule::build({1, 2, 7, 10}), std::invalid_argument);
  EXPECT_THROW(SigmaSchedule::build({80, 0.002, 0, 10}), std::invalid_argument);
  EXPECT_THROW(SigmaSchedule::build({80, 0.002, -1, 10}), std::invalid_argument);
}

TEST(Sampler, GaussianClosedForm) {
  const Shape s{3, 16, 16};
  const auto z = normal_tensor(s, 1);
  // error scales as N^-2: err * N^2 roughly constant
  const double c20 = forward_error(20, 0.5, z) * 400, c40 = forward_error(40, 0.5, z) * 1600,
               c80 = forward_error(80, 0.5, z) * 6400;
  EXPECT_NEAR(c40 / c20, 1.0, 0.3);
  EXPECT_NEAR(c80 / c40, 1.0, 0.3);
  EXPECT_LT(forward_error(80, 0.5, z), 0.01);
}

TEST(Sampler, SecondOrderConvergence) {
  const auto z = normal_tensor(Shape{1, 8, 8}, 2);
  const double ratio = forward_error(18, 0.5, z) / forward_error(36, 0.5, z);
  // slope in [1.8, 2.2] means a ratio in [2^1.8, 2^2.2]
  EXPECT_GT(ratio, std::pow(2.0, 1.8));
  EXPECT_LT(ratio, std::pow(2.0, 2.2));
}

TEST(Sampler, SymmetricMixtureFixesOrigin) {
  const Shape s{2, 4, 4};
  LatentTensor mu(s, 0.3);
  LatentTensor neg(s, -0.3);
  GaussianMixtureModel gmm({{0.5, mu, 0.2}, {0.5, neg, 0.2}});
  const auto x = heun_forward(LatentTensor(s), SigmaSchedule::build({}), gmm);
  for (double v : x.data()) EXPECT_EQ(v, 0.0);
}

TEST(Sampler, CallBudget) {
  const Shape s{1, 4, 4};
  auto gmm = single_gaussian(s, 0.5);
  for (int n : {2, 18, 40}) {
    const auto sched = SigmaSchedule::build({80, 0.002, 7, n});
    Counting fwd(gmm);
    const auto x = heun_forward(normal_tensor(s, 3), sched, fwd, "ctx");
    EXPECT_EQ(fwd.calls, 2 * n - 1);
    EXPECT_EQ(fwd.last_context, "ctx");
    for (double sg : fwd.sigmas) EXPECT_GT(sg, 0.0);
    Counting inv(gmm);
    heun_inverse(x, sched, inv);
    EXPECT_EQ(inv.calls, 2 * n - 1);
  }
}

TEST(Sampler, Deterministic) {
  const Shape s{3, 8, 8};
  auto gmm = GaussianMixtureModel::make_fixture(s, 3, 0.1, 0.8, 4);
  const auto sched = SigmaSchedule::build({80, 0.002, 7, 18});
  const auto z = normal_tensor(s, 5);
  EXPECT_EQ(heun_forward(z, sched, gmm), heun_forward(z, sched, gmm));
  const auto x = heun_forward(z, sched, gmm);
  EXPECT_EQ(heun_inverse(x, sched, gmm), heun_inverse(x, sched, gmm));
}

TEST(Sampler, IdentityModelInverse) {
  const Shape s{1, 3, 3};
  Identity id(s);
  const auto x0 = normal_tensor(s, 6);
  const auto z = heun_inverse(x0, SigmaSchedule::build({}), id);
  for (size_t i = 0; i < z.size(); ++i) EXPECT_EQ(z[i], x0[i] / 80.0);
}

TEST(Sampler, RoundTripShrinksWithSteps) {
  const Shape s{3, 8, 8};
  auto gmm = single_gaussian(s, 0.5);
  const auto z = normal_tensor(s, 7);
  double prev = 1e9;
  for (int n : {10, 20, 40, 80}) {
    const auto sched = SigmaSchedule::build({80, 0.002, 7, n});
    const double err = max_abs_diff(heun_inverse(heun_forward(z, sched, gmm), sched, gmm), z);
    EXPECT_LT(err, prev) << n;
    prev = err;
  }
}

TEST(Sampler, Errors) {
  const Shape s{1, 4, 4};
  Exploding bad(s);
  const auto sched = SigmaSchedule::build({80, 0.002, 7, 5});
  try {
    heun_forward(normal_tensor(s, 8), sched, bad);
    FAIL();
  } catch (const SamplerError& e) {
    EXPECT_STREQ(e.what(), "integration diverged");
  }
  EXPECT_THROW(heun_inverse(normal_tensor(s, 8), sched, bad), SamplerError);
  Identity id(s);
  EXPECT_THROW(heun_forward(normal_tensor(Shape{1, 4, 5}, 8), sched, id), std::invalid_argument);
}

TEST(Stego, MbFloatRoundTripAndSeedIndependence) {
  auto gmm = GaussianMixtureModel::load(NOISECODER_FIXTURE);
  const Shape s = gmm.shape();
  const auto sched = SigmaSchedule::build({});
  Rng r(1, Stream::payload);
  Bits payload(s.plane());
  for (auto& b : payload) b = r.bit();
  const Message m = make_message(payload, ProjectionSpec::mb(), s, 1, 0);
  const StegoKey key{ProjectionSpec::mb(), 10, std::nullopt};
  const StegoKey other{ProjectionSpec::mb(), 11, std::nullopt};
  const auto x = hide(m, key, sched, gmm);
  const Message out = extract(x, key, 1, sched, gmm);
  EXPECT_GE(1.0 - static_cast<double>(hamming_distance(out.bits, m.bits)) / m.bits.size(), 0.995);
  EXPECT_EQ(extract(x, other, 1, sched, gmm).bits, out.bits);
}

TEST(Stego, MessageHelpers) {
  const Shape s{3, 4, 4};
  EXPECT_EQ(channels_needed(1, ProjectionSpec::mb(), s), 1u);
  EXPECT_EQ(channels_needed(16, ProjectionSpec::mb(), s), 1u);
  EXPECT_EQ(channels_needed(17, ProjectionSpec::mb(), s), 2u);
  EXPECT_EQ(channels_needed(64, ProjectionSpec::mb(), s), 4u);
  EXPECT_EQ(channels_needed(64, ProjectionSpec::multibits(2), s), 2u);
  const Bits payload = {1, 0, 1};
  const Message m = make_message(payload, ProjectionSpec::mb(), s, 1, 3);
  ASSERT_EQ(m.bits.size(), 16u);
  EXPECT_EQ(Bits(m.bits.begin(), m.bits.begin() + 3), payload);
  EXPECT_EQ(make_message(payload, ProjectionSpec::mb(), s, 1, 3).bits, m.bits);
  EXPECT_THROW(make_message(Bits(17, 1), ProjectionSpec::mb(), s, 1, 3), std::invalid_argument);
}

TEST(Sampler, GaussianRoundTripRegression) {
  const Shape s{3, 16, 16};
  auto gmm = single_gaussian(s, 0.5);
  const auto sched = SigmaSchedule::build({});
  double worst = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const auto z = normal_tensor(s, 100 + seed);
    worst = std::max(worst, max_abs_diff(heun_inverse(heun_forward(z, sched, gmm), sched, gmm), z));
  }
  // regression bound, measured 3.63e-3 when pinned
  EXPECT_LT(worst, 4e-3);
}
