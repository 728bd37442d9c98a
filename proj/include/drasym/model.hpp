#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "drasym/errors.hpp"
#include "drasym/rng.hpp"

namespace drasym {

/// Sparse prior: 0 with probability p0, otherwise a standard Gaussian draw.
struct BernoulliGaussian {
  double p0 = 0.9;
};

/// Any scalar distribution with finite moments. The declared mean and
/// variance are trusted by the library and only spot-checked by
/// check_prior_moments().
struct CustomPrior {
  std::function<double(Rng&)> sampler;
  double mean = 0.0;
  double variance = 1.0;
  std::string name = "custom";
  /// Optional inverse CDF on (0, 1). When present, particle ensembles are
  /// drawn by stratified sampling instead of plain i.i.d. draws.
  std::function<double(double)> quantile;
};

using Prior = std::variant<BernoulliGaussian, CustomPrior>;

inline double prior_mean(const Prior& prior) {
  return std::visit(
      [](const auto& p) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, BernoulliGaussian>)
          return 0.0;
        else
          return p.mean;
      },
      prior);
}

inline double prior_variance(const Prior& prior) {
  return std::visit(
      [](const auto& p) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, BernoulliGaussian>)
          return 1.0 - p.p0;
        else
          return p.variance;
      },
      prior);
}

inline std::string prior_name(const Prior& prior) {
  if (const auto* bg = std::get_if<BernoulliGaussian>(&prior)) {
    (void)bg;
    return "bernoulli_gaussian";
  }
  return std::get<CustomPrior>(prior).name;
}

inline void validate_prior(const Prior& prior) {
  if (const auto* bg = std::get_if<BernoulliGaussian>(&prior)) {
    if (!(bg->p0 > 0.0 && bg->p0 < 1.0))
      throw ConfigError("p0 must lie in (0, 1), got " + std::to_string(bg->p0));
    return;
  }
  const auto& custom = std::get<CustomPrior>(prior);
  if (!custom.sampler) throw ConfigError("custom prior has no sampler");
  if (!(custom.variance > 0.0) || !std::isfinite(custom.mean))
    throw ConfigError("custom prior needs finite mean and positive variance");
}

/// Draws a single value from the prior.
inline double draw(const Prior& prior, Rng& rng) {
  if (const auto* bg = std::get_if<BernoulliGaussian>(&prior)) {
    // Always consume the uniform first so the stream layout does not depend
    // on the outcome.
    const bool zero = rng.bernoulli(bg->p0);
    const double g = rng.gaussian();
    return zero ? 0.0 : g;
  }
  return std::get<CustomPrior>(prior).sampler(rng);
}

inline double standard_normal_quantile(double u) {
  static const boost::math::normal_distribution<double> unit;
  return boost::math::quantile(unit, u);
}

/// Inverse CDF of the prior at u in (0, 1), if the prior provides one.
inline std::optional<double> prior_quantile(const Prior& prior, double u) {
  if (const auto* bg = std::get_if<BernoulliGaussian>(&prior)) {
    if (u < bg->p0) return 0.0;
    // u == p0 would map to the -inf endpoint
    const double t = std::max((u - bg->p0) / (1.0 - bg->p0), std::numeric_limits<double>::min());
    return standard_normal_quantile(std::min(t, 1.0 - 0x1p-53));
  }
  const auto& custom = std::get<CustomPrior>(prior);
  if (!custom.quantile) return std::nullopt;
  return custom.quantile(u);
}

inline bool has_quantile(const Prior& prior) {
  if (std::holds_alternative<BernoulliGaussian>(prior)) return true;
  return static_cast<bool>(std::get<CustomPrior>(prior).quantile);
}

/// Parameters of one measurement system plus the run budget.
struct SystemConfig {
  int n = 500;
  int m = 350;
  double noise_var = 1e-3;
  Prior prior = BernoulliGaussian{0.9};
  double lambda = 0.025;
  double gamma = 10.0;
  double rho = 1.0;
  int iterations = 100;
  std::uint64_t seed = 1;
  int mc_particles = 300000;
  int trials = 500;

  static constexpr double kRhoMargin = 1e-3;

  double delta() const { return static_cast<double>(m) / static_cast<double>(n); }

  /// More measurements than unknowns. Accepted, reported in run metadata.
  bool overdetermined() const { return m > n; }

  void validate() const {
    if (n <= 0) throw ConfigError("n must be positive");
    if (m <= 0) throw ConfigError("m must be positive");
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var))
      throw ConfigError("noise_var must be finite and nonnegative");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
    if (!(rho >= kRhoMargin && rho <= 2.0 - kRhoMargin))
      throw ConfigError("rho must lie in [1e-3, 2 - 1e-3], got " + std::to_string(rho));
    if (iterations <= 0) throw ConfigError("iterations must be positive");
    if (mc_particles <= 0) throw ConfigError("mc_particles must be positive");
    if (trials <= 0) throw ConfigError("trials must be positive");
    validate_prior(prior);
  }
};

/// One draw of (x, A, v) and the resulting measurement y = A x + v.
struct ProblemInstance {
  Eigen::VectorXd x;
  Eigen::MatrixXd a;
  Eigen::VectorXd v;
  Eigen::VectorXd y;

  Eigen::Index n() const { return a.cols(); }
  Eigen::Index m() const { return a.rows(); }
};

inline Eigen::VectorXd sample_prior(const Prior& prior, Eigen::Index count, std::uint64_t seed) {
  if (count < 1) throw DimensionError("sample_prior: count must be at least 1");
  validate_prior(prior);
  Rng rng(seed);
  Eigen::VectorXd out(count);
  for (Eigen::Index i = 0; i < count; ++i) out[i] = draw(prior, rng);
  return out;
}

/// Samples x i.i.d. from the prior, A with i.i.d. N(0, 1/N) entries and
/// v ~ N(0, noise_var I). Each component has its own substream of `seed`.
inline ProblemInstance sample_instance(const SystemConfig& config, std::uint64_t seed) {
  config.validate();
  ProblemInstance inst;
  inst.x = sample_prior(config.prior, config.n, derive_seed(seed, Stream::kSignal));

  Rng matrix_rng(derive_seed(seed, Stream::kMatrix));
  const double a_std = 1.0 / std::sqrt(static_cast<double>(config.n));
  inst.a.resize(config.m, config.n);
  for (Eigen::Index j = 0; j < inst.a.cols(); ++j)
    for (Eigen::Index i = 0; i < inst.a.rows(); ++i) inst.a(i, j) = a_std * matrix_rng.gaussian();

  Rng noise_rng(derive_seed(seed, Stream::kNoise));
  const double v_std = std::sqrt(config.noise_var);
  inst.v.resize(config.m);
  for (Eigen::Index i = 0; i < inst.v.size(); ++i) inst.v[i] = v_std * noise_rng.gaussian();

  inst.y = inst.a * inst.x + inst.v;
  return inst;
}

/// (1/N) ||s - x||^2.
inline double empirical_mse(const Eigen::Ref<const Eigen::VectorXd>& s,
                            const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (s.size() != x.size())
    throw DimensionError("empirical_mse: length mismatch " + std::to_string(s.size()) + " vs " +
                         std::to_string(x.size()));
  if (s.size() == 0) throw DimensionError("empirical_mse: empty vectors");
  return (s - x).squaredNorm() / static_cast<double>(s.size());
}

/// Compares the empirical moments of `samples` draws against the declared
/// ones. Returns false if either deviates by more than rel_tol (relative to
/// the declared standard deviation for the mean).
inline bool check_prior_moments(const Prior& prior, Eigen::Index samples, std::uint64_t seed,
                                double rel_tol) {
  const Eigen::VectorXd draws = sample_prior(prior, samples, seed);
  const double mean = draws.mean();
  const double var = (draws.array() - mean).square().sum() / static_cast<double>(samples - 1);
  const double declared_var = prior_variance(prior);
  const double declared_sd = std::sqrt(declared_var);
  return std::abs(mean - prior_mean(prior)) <= rel_tol * declared_sd &&
         std::abs(var - declared_var) <= rel_tol * declared_var;
}

}  // namespace drasym
