#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "drasym/cgmt_scalar.hpp"
#include "drasym/errors.hpp"
#include "drasym/model.hpp"
#include "drasym/parallel.hpp"
#include "drasym/prox.hpp"
#include "drasym/rng.hpp"

namespace drasym {

/// One realization of the decoupled DR process: signal entry X, the current
/// Z_k and the latest S_k.
struct Particle {
  double x = 0.0;
  double z = 0.0;
  double s = 0.0;
};

/// How particles are drawn.
///   kIid: plain i.i.d. draws of X and H.
///   kStratified: particles come in pairs sharing X, with H and -H. X (when
///   the prior has a quantile function) and |H| are stratified over the pair
///   count, with independent random stratum orders. Each particle is still
///   marginally distributed as (X, H) and the estimates stay unbiased, but
///   seed-to-seed spread of the saddle point drops several fold.
enum class Sampling { kIid, kStratified };

/// Monte Carlo realization of the joint law of (X, Z_k).
struct ScalarEnsemble {
  std::vector<Particle> particles;
  int k = 0;
  Rng rng{0};
  /// Non-empty only in persistent-H mode: one H per particle reused at every
  /// iteration instead of a fresh draw.
  std::vector<double> fixed_h;
  Sampling sampling = Sampling::kIid;

  std::size_t size() const { return particles.size(); }
  bool persistent_h() const { return !fixed_h.empty(); }
};

namespace detail {

/// Random order of the strata 0..count-1 and a jittered u in each.
inline std::vector<double> stratified_uniforms(std::size_t count, Rng& rng) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<double> u(count);
  const auto n = static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) u[i] = (static_cast<double>(order[i]) + rng.uniform()) / n;
  return u;
}

/// count Gaussian draws: antithetic pairs (h, -h) with h stratified.
inline std::vector<double> antithetic_normals(std::size_t count, Rng& rng) {
  const std::size_t pairs = (count + 1) / 2;
  const auto u = stratified_uniforms(pairs, rng);
  std::vector<double> h(count);
  for (std::size_t j = 0; j < pairs; ++j) {
    const double g = standard_normal_quantile(u[j]);
    h[2 * j] = g;
    if (2 * j + 1 < count) h[2 * j + 1] = -g;
  }
  return h;
}

inline std::vector<double> gaussians(std::size_t count, Rng& rng) {
  std::vector<double> h(count);
  for (double& v : h) v = rng.gaussian();
  return h;
}

}  // namespace detail

/// One H per particle, drawn according to the ensemble's sampling mode.
inline std::vector<double> draw_h(ScalarEnsemble& ens) {
  return ens.sampling == Sampling::kStratified ? detail::antithetic_normals(ens.size(), ens.rng)
                                               : detail::gaussians(ens.size(), ens.rng);
}

/// X from the prior, Z_0 = 0, k = 0.
inline ScalarEnsemble init_ensemble(const Prior& prior, std::size_t count, std::uint64_t seed,
                                    bool persistent_h = false, Sampling sampling = Sampling::kStratified) {
  if (count < 1) throw DimensionError("init_ensemble: count must be at least 1");
  validate_prior(prior);
  ScalarEnsemble ens;
  ens.sampling = sampling;
  ens.particles.resize(count);
  Rng xr(derive_seed(seed, Stream::kParticles));
  if (sampling == Sampling::kIid) {
    for (auto& p : ens.particles) p.x = draw(prior, xr);
  } else {
    const std::size_t pairs = (count + 1) / 2;
    std::vector<double> xs(pairs);
    if (has_quantile(prior)) {
      const auto u = detail::stratified_uniforms(pairs, xr);
      for (std::size_t j = 0; j < pairs; ++j) xs[j] = *prior_quantile(prior, u[j]);
    } else {
      for (double& x : xs) x = draw(prior, xr);
    }
    for (std::size_t i = 0; i < count; ++i) ens.particles[i].x = xs[i / 2];
  }
  ens.rng = Rng(derive_seed(seed, Stream::kParticleNoise));
  if (persistent_h) ens.fixed_h = draw_h(ens);
  return ens;
}

/// One row per state-evolution step. `k` is the index of the DR iterate the
/// row predicts: the step taking Z_{k-1} to S_k produces row k.
struct EvolutionRecord {
  int k = 0;
  double alpha_star = 0.0;
  double beta_star = 0.0;
  double predicted_mse = 0.0;
  double saddle_value = 0.0;
  double ensemble_s_mean = 0.0;
  double ensemble_s_var = 0.0;
  /// Particle average of (S_k - X)^2 and its Monte Carlo standard error.
  double ensemble_mse = 0.0;
  double ensemble_mse_stderr = 0.0;
  std::string diagnostics;
};

struct EvolutionTrace {
  std::vector<EvolutionRecord> records;
  std::vector<std::string> warnings;
};

struct SeOptions {
  Regularizer reg = L1{};
  SearchOptions search{};
  Parallelism par{};
  /// Reuse one H per particle across iterations (A is fixed across DR
  /// iterations). false redraws H at every step.
  bool persistent_h = true;
  Sampling sampling = Sampling::kStratified;
};

struct SeStep {
  SaddlePoint saddle;
  ScalarEnsemble ensemble;
  double predicted_mse = 0.0;
  EvolutionRecord record;
};

/// Advances the ensemble by one DR iteration:
///   1. draw H per particle (or reuse the persistent draw),
///   2. solve the min-max problem on {(X, H, Z_k)},
///   3. S_{k+1} = s_hat(alpha*, beta*; X, H, Z_k) with the same H,
///      Z_{k+1} = Z_k + rho (prox(2 S_{k+1} - Z_k; gamma lambda) - S_{k+1}),
///   4. report (alpha*)^2 - noise_var.
inline SeStep se_step(ScalarEnsemble ensemble, const Regularizer& reg, double delta,
                      double noise_var, double gamma, double lambda, double rho,
                      const SearchOptions& opts = {}, Parallelism par = {},
                      std::vector<std::string>* warnings = nullptr) {
  if (ensemble.particles.empty()) throw DimensionError("se_step: empty ensemble");
  const std::size_t count = ensemble.size();

  const std::vector<double> fresh = ensemble.persistent_h() ? std::vector<double>{} : draw_h(ensemble);
  const std::vector<double>& hs = ensemble.persistent_h() ? ensemble.fixed_h : fresh;
  std::vector<ScalarSample> samples(count);
  for (std::size_t i = 0; i < count; ++i) samples[i] = {ensemble.particles[i].x, hs[i], ensemble.particles[i].z};

  SeStep out;
  out.saddle = solve_saddle(std::span<const ScalarSample>(samples), delta, noise_var, gamma, opts, par);
  const double alpha = out.saddle.alpha;
  const double beta = out.saddle.beta;
  const double threshold = gamma * lambda;

  parallel_for(count, par, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      Particle& p = ensemble.particles[i];
      const double s = s_hat(alpha, beta, delta, gamma, samples[i]);
      p.z = p.z + rho * (scalar_prox(reg, 2.0 * s - p.z, threshold) - s);
      p.s = s;
    }
  });
  ensemble.k += 1;

  const auto n = static_cast<double>(count);
  const auto& ps = ensemble.particles;
  const double s_mean = deterministic_sum(count, par, [&](std::size_t i) { return ps[i].s; }) / n;
  const double s_var = deterministic_sum(count, par, [&](std::size_t i) {
                         const double d = ps[i].s - s_mean;
                         return d * d;
                       }) / n;
  auto sq_err = [&](std::size_t i) {
    const double e = ps[i].s - ps[i].x;
    return e * e;
  };
  const double mse = deterministic_sum(count, par, sq_err) / n;
  const double mse_var = deterministic_sum(count, par, [&](std::size_t i) {
                           const double d = sq_err(i) - mse;
                           return d * d;
                         }) / std::max(1.0, n - 1.0);

  out.predicted_mse = predicted_mse(out.saddle, noise_var, warnings);
  EvolutionRecord& rec = out.record;
  rec.k = ensemble.k;
  rec.alpha_star = alpha;
  rec.beta_star = beta;
  rec.predicted_mse = out.predicted_mse;
  rec.saddle_value = out.saddle.value;
  rec.ensemble_s_mean = s_mean;
  rec.ensemble_s_var = s_var;
  rec.ensemble_mse = mse;
  rec.ensemble_mse_stderr = std::sqrt(mse_var / n);
  rec.diagnostics = out.saddle.bracket_diagnostics;
  if (warnings && rec.diagnostics.find("warning") != std::string::npos)
    warnings->push_back("k=" + std::to_string(rec.k) + ": " + rec.diagnostics);

  out.ensemble = std::move(ensemble);
  return out;
}

/// Predicted MSE trajectory for `iterations` DR steps from z^(0) = 0, with
/// the ensemble size and seed taken from `config`.
inline EvolutionTrace se_run(const SystemConfig& config, int iterations, const SeOptions& options = {}) {
  config.validate();
  if (iterations < 1) throw ConfigError("se_run: iterations must be at least 1");
  EvolutionTrace trace;
  trace.records.reserve(static_cast<std::size_t>(iterations));
  ScalarEnsemble ens = init_ensemble(config.prior, static_cast<std::size_t>(config.mc_particles),
                                     config.seed, options.persistent_h, options.sampling);
  for (int it = 0; it < iterations; ++it) {
    SeStep step = se_step(std::move(ens), options.reg, config.delta(), config.noise_var, config.gamma,
                          config.lambda, config.rho, options.search, options.par, &trace.warnings);
    ens = std::move(step.ensemble);
    trace.records.push_back(std::move(step.record));
  }
  return trace;
}

/// Two-sample Kolmogorov-Smirnov statistic sup_t |F_a(t) - F_b(t)|.
inline double ks_distance(std::span<const double> sample_a, std::span<const double> sample_b) {
  if (sample_a.empty() || sample_b.empty()) throw DimensionError("ks_distance: empty sample");
  std::vector<double> a(sample_a.begin(), sample_a.end());
  std::vector<double> b(sample_b.begin(), sample_b.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == t) ++i;
    while (j < b.size() && b[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace drasym
