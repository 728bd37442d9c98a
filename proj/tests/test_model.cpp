#include <cmath>

#include <gtest/gtest.h>

#include "drasym/model.hpp"
#include "test_util.hpp"

using namespace drasym;

TEST(SamplePrior, NearDegenerateZeroFraction) {
  const double p0 = 0.999999;
  const auto v = sample_prior(BernoulliGaussian{p0}, 1000000, 11);
  const double zeros = (v.array() == 0.0).cast<double>().mean();
  EXPECT_NEAR(zeros, p0, 1e-3);
}

TEST(SamplePrior, BernoulliGaussianMoments) {
  const auto v = sample_prior(BernoulliGaussian{0.9}, 1000000, 12);
  const double mean = v.mean();
  const double var = (v.array() - mean).square().sum() / (v.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.002);
  EXPECT_NEAR(var, 0.1, 0.1 * 0.01);
}

TEST(SamplePrior, VarianceMatchesTwoStageSampler) {
  // Independent two-stage construction: Bernoulli mask from one stream,
  // Gaussian amplitudes from another.
  Rng mask(21), amp(22);
  double ss = 0.0;
  const int count = 1000000;
  for (int i = 0; i < count; ++i) {
    const double g = amp.gaussian();
    if (mask.uniform() >= 0.9) ss += g * g;
  }
  const auto v = sample_prior(BernoulliGaussian{0.9}, count, 23);
  const double var = v.squaredNorm() / count;
  // sd of X^2 is sqrt(0.29), so the difference of two independent means
  // has standard error about 7.6e-4; allow 4 of them.
  EXPECT_NEAR(var, ss / count, 3.0e-3);
  EXPECT_NEAR(var, 1.0 - 0.9, 0.1 * 0.01);
}

TEST(SamplePrior, ZeroFractionWithinBinomialBounds) {
  const int count = 1000000;
  const double p0 = 0.9;
  const auto v = sample_prior(BernoulliGaussian{p0}, count, 31);
  const double zeros = (v.array() == 0.0).cast<double>().sum();
  const double sigma = std::sqrt(count * p0 * (1 - p0));
  EXPECT_LE(std::abs(zeros - count * p0), 3 * sigma);
}

TEST(SamplePrior, RejectsBadInputs) {
  EXPECT_THROW(sample_prior(BernoulliGaussian{1.0}, 10, 1), ConfigError);
  EXPECT_THROW(sample_prior(BernoulliGaussian{0.0}, 10, 1), ConfigError);
  EXPECT_THROW(sample_prior(BernoulliGaussian{0.5}, 0, 1), DimensionError);
}

TEST(SamplePrior, CustomPriorMoments) {
  CustomPrior uniform{[](Rng& r) { return 2.0 * r.uniform() - 1.0; }, 0.0, 1.0 / 3.0, "uniform"};
  EXPECT_TRUE(check_prior_moments(uniform, 1000000, 5, 0.01));
  CustomPrior lying = uniform;
  lying.variance = 1.0;
  EXPECT_FALSE(check_prior_moments(lying, 100000, 5, 0.05));
}

TEST(SampleInstance, NoiselessMeasurementIsExact) {
  SystemConfig c;
  c.n = 40;
  c.m = 25;
  c.noise_var = 0.0;
  const auto inst = sample_instance(c, 3);
  EXPECT_TRUE(inst.v.isZero(0.0));
  const Eigen::VectorXd ax = inst.a * inst.x;
  for (int i = 0; i < c.m; ++i) EXPECT_EQ(inst.y[i], ax[i]);
}

TEST(SampleInstance, DefaultDimensionsGiveDelta07) {
  SystemConfig c;
  c.n = 500;
  c.m = 350;
  EXPECT_DOUBLE_EQ(c.delta(), 0.7);
  EXPECT_FALSE(c.overdetermined());
  c.m = 600;
  EXPECT_TRUE(c.overdetermined());
  EXPECT_NO_THROW(c.validate());
}

TEST(SampleInstance, Deterministic) {
  SystemConfig c;
  c.n = 60;
  c.m = 30;
  const auto a = sample_instance(c, 99);
  const auto b = sample_instance(c, 99);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.a, b.a);
  EXPECT_EQ(a.v, b.v);
  EXPECT_EQ(a.y, b.y);
  const auto other = sample_instance(c, 100);
  EXPECT_NE(a.a, other.a);
}

TEST(SampleInstance, MatrixScaling) {
  SystemConfig c;
  c.n = 1000;
  c.m = 700;
  const auto inst = sample_instance(c, 7);
  const double mean = inst.a.mean();
  const double var = (inst.a.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.05 / std::sqrt(c.n));
  EXPECT_NEAR(var * c.n, 1.0, 0.05);
  const double mean_sq_row_norm = inst.a.rowwise().squaredNorm().mean();
  EXPECT_NEAR(mean_sq_row_norm, 1.0, 0.05);
}

TEST(SystemConfig, RhoRange) {
  SystemConfig c;
  c.rho = 2.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.rho = 1e-3;
  EXPECT_NO_THROW(c.validate());
  c.rho = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(EmpiricalMse, Identity) {
  const auto x = testutil::gaussian_vector(10, 1);
  EXPECT_EQ(empirical_mse(x, x), 0.0);
}

TEST(EmpiricalMse, SingleCoordinate) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd s = x;
  s[0] += 1.0;
  EXPECT_DOUBLE_EQ(empirical_mse(s, x), 0.25);
}

TEST(EmpiricalMse, MatchesNaiveLoop) {
  const auto s = testutil::gaussian_vector(10, 2);
  const auto x = testutil::gaussian_vector(10, 3);
  double acc = 0.0;
  for (int i = 0; i < 10; ++i) acc += (s[i] - x[i]) * (s[i] - x[i]);
  EXPECT_NEAR(empirical_mse(s, x), acc / 10.0, 1e-12);
}

TEST(EmpiricalMse, LengthMismatch) {
  EXPECT_THROW(empirical_mse(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(4)), DimensionError);
}

TEST(Rng, SubstreamsDiffer) {
  EXPECT_NE(derive_seed(1, Stream::kTrial, 1), derive_seed(1, Stream::kTrial, 2));
  EXPECT_NE(derive_seed(1, Stream::kTrial, 1), derive_seed(2, Stream::kTrial, 1));
  EXPECT_NE(derive_seed(1, Stream::kSignal), derive_seed(1, Stream::kMatrix));
}
