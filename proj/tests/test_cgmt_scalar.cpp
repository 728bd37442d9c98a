#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "drasym/cgmt_scalar.hpp"
#include "drasym/rng.hpp"
#include "test_util.hpp"

using namespace drasym;

namespace {

std::vector<ScalarSample> random_ensemble(std::size_t count, std::uint64_t seed, double z_noise = 0.3) {
  Rng rng(seed);
  std::vector<ScalarSample> out(count);
  for (auto& p : out) {
    p.x = rng.uniform() < 0.9 ? 0.0 : rng.gaussian();
    p.h = rng.gaussian();
    p.z = p.x + z_noise * rng.gaussian();
  }
  return out;
}

}  // namespace

TEST(SHat, EqualsXWhenUnperturbed) {
  EXPECT_DOUBLE_EQ(s_hat(0.3, 1.7, 0.7, 10.0, {1.25, 0.0, 1.25}), 1.25);
}

TEST(SHat, HandEvaluation) {
  // weights 0.5 / 0.5: 0.5 * (1 + 2 * 2) + 0.5 * 3 = 4
  EXPECT_DOUBLE_EQ(s_hat(1.0, 1.0, 0.25, 2.0, {1.0, 2.0, 3.0}), 4.0);
}

TEST(JValue, HandEvaluation) {
  // q(4) = 0.25 * 9 - 2 * 3 + 0.25 * 1
  EXPECT_DOUBLE_EQ(j_value(1.0, 1.0, 0.25, 2.0, {1.0, 2.0, 3.0}), -3.5);
  EXPECT_DOUBLE_EQ(j_value(0.4, 0.9, 0.7, 3.0, {-0.6, 0.0, -0.6}), 0.0);
}

TEST(SHat, StationaryPointOfIntegrand) {
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double alpha = 0.01 + 2 * rng.uniform(), beta = 0.01 + 2 * rng.uniform();
    const double delta = 0.1 + 0.9 * rng.uniform(), gamma = 0.1 + 30 * rng.uniform();
    const ScalarSample p{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    const double s = s_hat(alpha, beta, delta, gamma, p);
    const double step = 1e-3;
    const double fd = (scalar_integrand(alpha, beta, delta, gamma, p, s + step) -
                       scalar_integrand(alpha, beta, delta, gamma, p, s - step)) / (2 * step);
    ASSERT_LE(std::abs(fd), 1e-8 * (1 + std::abs(s)));
  }
}

TEST(JValue, IsMinimumOverProbes) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const double alpha = 0.05 + rng.uniform(), beta = 0.05 + rng.uniform();
    const ScalarSample p{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    const double j = j_value(alpha, beta, 0.7, 10.0, p);
    for (int t = 0; t < 100; ++t) {
      const double s = 6 * rng.uniform() - 3;
      EXPECT_LE(j, scalar_integrand(alpha, beta, 0.7, 10.0, p, s) + 1e-12);
    }
  }
}

TEST(ScalarObjective, SingleUnperturbedSample) {
  const std::vector<ScalarSample> ens{{0.8, 0.0, 0.8}};
  const double a = 0.3, b = 0.6, d = 0.7, nv = 1e-3;
  const double expect = a * b * std::sqrt(d) / 2 + b * nv * std::sqrt(d) / (2 * a) - b * b / 2;
  EXPECT_NEAR(scalar_objective(a, b, ens, d, nv, 10.0), expect, 1e-15);
}

TEST(ScalarObjective, ThreeSampleManualEvaluation) {
  // Evaluated term by term offline for these three samples.
  const std::vector<ScalarSample> ens{{1, 2, 3}, {0, -1, 0.5}, {-0.5, 0.3, -1}};
  EXPECT_NEAR(scalar_objective(0.5, 0.8, ens, 0.7, 0.01, 10.0), -0.5156721597265094, 1e-12);
}

TEST(ScalarObjective, EmptyEnsembleThrows) {
  EXPECT_THROW(scalar_objective(1, 1, std::span<const ScalarSample>{}, 0.7, 0.0, 1.0), DimensionError);
}

TEST(ScalarObjective, MomentFormMatchesSampleMean) {
  const auto ens = random_ensemble(5000, 3);
  const auto moments = ensemble_moments(ens);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const double alpha = 0.01 + 2 * rng.uniform(), beta = 0.01 + 2 * rng.uniform();
    const double direct = scalar_objective(alpha, beta, ens, 0.7, 1e-3, 10.0);
    const double closed = scalar_objective(alpha, beta, moments, 0.7, 1e-3, 10.0);
    EXPECT_NEAR(direct, closed, 1e-12 * (1 + std::abs(direct)));
  }
}

TEST(ScalarObjective, ThreadCountDoesNotChangeResult) {
  const auto ens = random_ensemble(20000, 5);
  const double one = scalar_objective(0.2, 0.3, ens, 0.7, 1e-3, 10.0, Parallelism{1});
  const double many = scalar_objective(0.2, 0.3, ens, 0.7, 1e-3, 10.0, Parallelism{8});
  EXPECT_EQ(one, many);
}

TEST(ScalarObjective, Coercivity) {
  const auto ens = random_ensemble(1000, 6);
  const double beta = 0.3, alpha = 0.3;
  double prev = scalar_objective(10.0, beta, ens, 0.7, 1e-3, 10.0);
  for (double a : {100.0, 1000.0, 10000.0}) {
    const double v = scalar_objective(a, beta, ens, 0.7, 1e-3, 10.0);
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_GT(scalar_objective(1e4, beta, ens, 0.7, 1e-3, 10.0) / 1e4, 0.5 * beta * std::sqrt(0.7) * 0.99);
  prev = scalar_objective(alpha, 10.0, ens, 0.7, 1e-3, 10.0);
  for (double b : {100.0, 1000.0}) {
    const double v = scalar_objective(alpha, b, ens, 0.7, 1e-3, 10.0);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(SolveSaddle, MatchesGridOracle) {
  for (std::uint64_t seed : {11u, 12u}) {
    const auto ens = random_ensemble(8, seed);
    SearchOptions opts;
    opts.alpha_bracket = {0.05, 1.5};
    opts.beta_bracket = {0.05, 1.5};
    const SaddlePoint sp = solve_saddle(ens, 0.7, 1e-3, 10.0, opts);
    const auto grid = testutil::grid_saddle(
        [&](double a, double b) { return scalar_objective(a, b, ens, 0.7, 1e-3, 10.0); },
        sp.alpha_bracket.lo, sp.alpha_bracket.hi, sp.beta_bracket.lo, sp.beta_bracket.hi, 1e-3);
    EXPECT_NEAR(sp.alpha, grid.alpha, 2e-3) << "seed " << seed;
    EXPECT_NEAR(sp.beta, grid.beta, 2e-3) << "seed " << seed;
  }
}

TEST(SolveSaddle, StationaryInBothCoordinates) {
  const auto ens = random_ensemble(10000, 13);
  const auto m = ensemble_moments(ens);
  const SaddlePoint sp = solve_saddle(m, 0.7, 1e-3, 10.0);
  auto f = [&](double a, double b) { return scalar_objective(a, b, m, 0.7, 1e-3, 10.0); };
  const double h = 1e-4;
  const double da = (f(sp.alpha + h, sp.beta) - f(sp.alpha - h, sp.beta)) / (2 * h);
  const double db = (f(sp.alpha, sp.beta + h) - f(sp.alpha, sp.beta - h)) / (2 * h);
  EXPECT_NEAR(da, 0.0, 1e-5);
  EXPECT_NEAR(db, 0.0, 1e-5);
  EXPECT_GT(sp.alpha, 0.0);
  EXPECT_GT(sp.beta, 0.0);
  EXPECT_EQ(sp.bracket_diagnostics.find("warning"), std::string::npos) << sp.bracket_diagnostics;
}

TEST(SolveSaddle, DeterministicUnderCommonRandomNumbers) {
  const auto ens = random_ensemble(3000, 14);
  SearchOptions opts;
  opts.tol = 1e-6;
  const SaddlePoint a = solve_saddle(ens, 0.7, 1e-3, 10.0, opts, Parallelism{1});
  const SaddlePoint b = solve_saddle(ens, 0.7, 1e-3, 10.0, opts, Parallelism{4});
  EXPECT_EQ(a.alpha, b.alpha);
  EXPECT_EQ(a.beta, b.beta);
  EXPECT_EQ(a.value, b.value);
}

TEST(SolveSaddle, ExpandsBracketWhenOptimumOutside) {
  const auto ens = random_ensemble(2000, 15, 3.0);  // large |z - x| pushes alpha* above 1
  SearchOptions opts;
  opts.alpha_bracket = {0.01, 0.2};
  opts.beta_bracket = {0.01, 0.2};
  const SaddlePoint sp = solve_saddle(ens, 0.7, 1e-3, 10.0, opts);
  EXPECT_GT(sp.alpha_bracket.hi, 0.2);
  EXPECT_GT(sp.alpha, 0.2);
  EXPECT_LT(sp.alpha, sp.alpha_bracket.hi);
}

TEST(SolveSaddle, NotInteriorAfterExhaustedExpansion) {
  const auto ens = random_ensemble(2000, 15, 3.0);
  SearchOptions opts;
  opts.alpha_bracket = {0.01, 0.2};
  opts.max_expansions = 0;
  EXPECT_THROW(solve_saddle(ens, 0.7, 1e-3, 10.0, opts), SearchError);
}

TEST(SolveSaddle, NonConcaveInnerIsFlagged) {
  // beta -> -(cos(8 beta)) has several maxima on the bracket.
  SearchOptions opts;
  opts.alpha_bracket = {0.1, 2.0};
  opts.beta_bracket = {0.1, 3.0};
  const SaddlePoint sp = solve_saddle_with(
      [](double a, double b) { return (a - 1) * (a - 1) - std::cos(8 * b) - 0.01 * b * b; }, opts);
  EXPECT_NE(sp.bracket_diagnostics.find("non-concavity"), std::string::npos) << sp.bracket_diagnostics;
}

TEST(PredictedMse, Arithmetic) {
  SaddlePoint sp;
  sp.alpha = 0.1;
  EXPECT_NEAR(predicted_mse(sp, 0.001), 0.009, 1e-15);
  sp.alpha = std::sqrt(0.001);
  std::vector<std::string> warnings;
  EXPECT_NEAR(predicted_mse(sp, 0.001, &warnings), 0.0, 1e-18);
  sp.alpha = 0.01;
  EXPECT_EQ(predicted_mse(sp, 0.001, &warnings), 0.0);
  EXPECT_FALSE(warnings.empty());
}
