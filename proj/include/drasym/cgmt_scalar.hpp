#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "drasym/errors.hpp"
#include "drasym/parallel.hpp"

namespace drasym {

/// One realization of (X, H, Z): signal entry, standard Gaussian, prox input.
struct ScalarSample {
  double x = 0.0;
  double h = 0.0;
  double z = 0.0;
};

// Coupling weight beta sqrt(Delta) / alpha between S and X + (alpha/sqrt(Delta)) H.
inline double coupling(double alpha, double beta, double delta) {
  return beta * std::sqrt(delta) / alpha;
}

/// Decoupled prox output: the minimizer over s of scalar_integrand().
///
///   S = [ w (x + (alpha/sqrt(Delta)) h) + z/gamma ] / [ w + 1/gamma ],
///   w = beta sqrt(Delta) / alpha.
inline double s_hat(double alpha, double beta, double delta, double gamma, const ScalarSample& p) {
  const double w = coupling(alpha, beta, delta);
  const double c = 1.0 / gamma;
  return (w * (p.x + alpha / std::sqrt(delta) * p.h) + c * p.z) / (w + c);
}

/// The quadratic whose minimum defines J:
///
///   q(s) = (beta sqrt(Delta) / 2 alpha)(s - x)^2 - beta h (s - x) + (1 / 2 gamma)(s - z)^2
inline double scalar_integrand(double alpha, double beta, double delta, double gamma,
                               const ScalarSample& p, double s) {
  const double e = s - p.x;
  const double d = s - p.z;
  return 0.5 * coupling(alpha, beta, delta) * e * e - beta * p.h * e + d * d / (2.0 * gamma);
}

inline double j_value(double alpha, double beta, double delta, double gamma, const ScalarSample& p) {
  return scalar_integrand(alpha, beta, delta, gamma, p, s_hat(alpha, beta, delta, gamma, p));
}

// Deterministic part of the min-max objective:
//   alpha beta sqrt(Delta)/2 + beta noise_var sqrt(Delta) / (2 alpha) - beta^2/2
inline double saddle_outer_terms(double alpha, double beta, double delta, double noise_var) {
  const double rd = std::sqrt(delta);
  return 0.5 * alpha * beta * rd + beta * noise_var * rd / (2.0 * alpha) - 0.5 * beta * beta;
}

inline void check_scalar_args(double alpha, double beta, double delta, double gamma) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !(gamma > 0.0) || !(delta > 0.0))
    throw ConfigError("scalar objective needs alpha, beta, gamma, delta > 0");
}

/// Min-max objective with the expectation replaced by the ensemble average of
/// j_value. Summation is blockwise-pairwise and independent of thread count.
inline double scalar_objective(double alpha, double beta, std::span<const ScalarSample> ensemble,
                               double delta, double noise_var, double gamma,
                               Parallelism par = {}) {
  if (ensemble.empty()) throw DimensionError("scalar_objective: empty ensemble");
  check_scalar_args(alpha, beta, delta, gamma);
  const double total = deterministic_sum(ensemble.size(), par, [&](std::size_t i) {
    return j_value(alpha, beta, delta, gamma, ensemble[i]);
  });
  return saddle_outer_terms(alpha, beta, delta, noise_var) +
         total / static_cast<double>(ensemble.size());
}

/// Second moments of (H, W) with W = Z - X over an ensemble.
///
/// Minimizing q over s gives, with a = beta sqrt(Delta)/alpha and b = 1/gamma,
///
///   J = (a b W^2 - beta^2 H^2 - 2 beta b H W) / (2 (a + b)),
///
/// so the ensemble mean of J, and therefore the whole objective, is a closed
/// form in these three averages.
struct EnsembleMoments {
  double hh = 0.0;
  double hw = 0.0;
  double ww = 0.0;
  std::size_t count = 0;
};

inline EnsembleMoments ensemble_moments(std::span<const ScalarSample> ensemble, Parallelism par = {}) {
  if (ensemble.empty()) throw DimensionError("ensemble_moments: empty ensemble");
  const auto n = static_cast<double>(ensemble.size());
  EnsembleMoments m;
  m.count = ensemble.size();
  m.hh = deterministic_sum(ensemble.size(), par, [&](std::size_t i) {
           return ensemble[i].h * ensemble[i].h;
         }) / n;
  m.hw = deterministic_sum(ensemble.size(), par, [&](std::size_t i) {
           return ensemble[i].h * (ensemble[i].z - ensemble[i].x);
         }) / n;
  m.ww = deterministic_sum(ensemble.size(), par, [&](std::size_t i) {
           const double w = ensemble[i].z - ensemble[i].x;
           return w * w;
         }) / n;
  return m;
}

inline double scalar_objective(double alpha, double beta, const EnsembleMoments& m, double delta,
                               double noise_var, double gamma) {
  check_scalar_args(alpha, beta, delta, gamma);
  const double a = coupling(alpha, beta, delta);
  const double b = 1.0 / gamma;
  const double mean_j = (a * b * m.ww - beta * beta * m.hh - 2.0 * beta * b * m.hw) / (2.0 * (a + b));
  return saddle_outer_terms(alpha, beta, delta, noise_var) + mean_j;
}

struct Bracket {
  double lo = 1e-4;
  double hi = 10.0;
};

struct SearchOptions {
  Bracket alpha_bracket{};
  Bracket beta_bracket{};
  double tol = 1e-6;
  int max_expansions = 40;

  void validate() const {
    if (!(alpha_bracket.lo > 0.0 && alpha_bracket.lo < alpha_bracket.hi))
      throw ConfigError("alpha bracket must satisfy 0 < lo < hi");
    if (!(beta_bracket.lo > 0.0 && beta_bracket.lo < beta_bracket.hi))
      throw ConfigError("beta bracket must satisfy 0 < lo < hi");
    if (!(tol > 0.0)) throw ConfigError("search tolerance must be positive");
    if (max_expansions < 0) throw ConfigError("max_expansions must be nonnegative");
  }
};

struct SaddlePoint {
  double alpha = 0.0;
  double beta = 0.0;
  double value = 0.0;
  long evaluations = 0;
  Bracket alpha_bracket{};
  Bracket beta_bracket{};
  std::string bracket_diagnostics;
};

namespace detail {

inline constexpr double kInvPhi = 0.6180339887498948482;  // (sqrt(5) - 1) / 2

struct Probe {
  double x;
  double f;
};

struct LineResult {
  double x = 0.0;
  double f = 0.0;
};

// Golden-section minimization of f on [lo, hi] down to bracket width tol.
// Every evaluated point is appended to `probes`.
template <typename F>
LineResult golden_minimize(F&& f, double lo, double hi, double tol, std::vector<Probe>& probes) {
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  probes.push_back({c, fc});
  probes.push_back({d, fd});
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
      probes.push_back({c, fc});
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
      probes.push_back({d, fd});
    }
  }
  return fc <= fd ? LineResult{c, fc} : LineResult{d, fd};
}

// True if the probe values, ordered by abscissa, go down and later up and
// later down again (for a minimization: more than one valley).
inline bool non_unimodal(std::vector<Probe>& probes, double value_tol) {
  std::sort(probes.begin(), probes.end(), [](const Probe& l, const Probe& r) { return l.x < r.x; });
  int direction = 0;  // -1 falling, +1 rising
  int turns = 0;
  for (std::size_t i = 1; i < probes.size(); ++i) {
    const double diff = probes[i].f - probes[i - 1].f;
    if (std::abs(diff) <= value_tol) continue;
    const int dir = diff > 0 ? 1 : -1;
    if (direction != 0 && dir != direction && dir == -1) ++turns;
    direction = dir;
  }
  return turns > 0;
}

struct Bounded {
  LineResult best;
  Bracket bracket;
  int expansions = 0;
  bool non_unimodal = false;
};

// Minimizes f over (0, inf) starting from `bracket`: doubles hi while the
// minimizer sits at the upper end, halves lo while it sits at the lower end.
template <typename F>
Bounded bounded_minimize(F&& f, Bracket bracket, double tol, int max_expansions, const char* name) {
  std::vector<Probe> probes;
  for (int e = 0;; ++e) {
    probes.clear();
    const LineResult r = golden_minimize(f, bracket.lo, bracket.hi, tol, probes);
    const double margin = 3.0 * tol;
    const bool at_hi = r.x >= bracket.hi - margin;
    const bool at_lo = r.x <= bracket.lo + margin;
    if (!at_hi && !at_lo) {
      const double scale = std::max(1.0, std::abs(r.f));
      return {r, bracket, e, non_unimodal(probes, 1e-13 * scale)};
    }
    if (e >= max_expansions) {
      std::ostringstream msg;
      msg << "optimum not interior: " << name << " search stuck at " << r.x << " in ["
          << bracket.lo << ", " << bracket.hi << "] after " << e << " expansions";
      throw SearchError(msg.str());
    }
    if (at_hi) bracket.hi *= 2.0;
    if (at_lo) bracket.lo *= 0.5;
  }
}

}  // namespace detail

/// Nested golden-section search for min over alpha of max over beta of
/// objective(alpha, beta). The inner maximization is solved to `tol` for each
/// outer probe. Brackets grow (hi doubles, lo halves) until each optimum is
/// interior, at most max_expansions times.
template <typename Objective>
SaddlePoint solve_saddle_with(Objective&& objective, const SearchOptions& opts) {
  opts.validate();
  SaddlePoint out;
  long evals = 0;
  int inner_warnings = 0;
  double first_warning_alpha = 0.0;
  int max_inner_expansions = 0;
  Bracket last_beta_bracket = opts.beta_bracket;

  auto inner = [&](double alpha) {
    auto neg = [&](double beta) {
      ++evals;
      return -objective(alpha, beta);
    };
    detail::Bounded r =
        detail::bounded_minimize(neg, opts.beta_bracket, opts.tol, opts.max_expansions, "beta");
    if (r.non_unimodal) {
      if (inner_warnings == 0) first_warning_alpha = alpha;
      ++inner_warnings;
    }
    max_inner_expansions = std::max(max_inner_expansions, r.expansions);
    last_beta_bracket = r.bracket;
    return std::pair{r.best.x, -r.best.f};
  };

  auto outer_fn = [&](double alpha) { return inner(alpha).second; };
  detail::Bounded outer = detail::bounded_minimize(outer_fn, opts.alpha_bracket, opts.tol,
                                                   opts.max_expansions, "alpha");
  const auto [beta, value] = inner(outer.best.x);

  out.alpha = outer.best.x;
  out.beta = beta;
  out.value = value;
  out.evaluations = evals;
  out.alpha_bracket = outer.bracket;
  out.beta_bracket = last_beta_bracket;

  std::ostringstream diag;
  diag << "alpha in [" << outer.bracket.lo << ", " << outer.bracket.hi << "] after "
       << outer.expansions << " expansions; beta in [" << last_beta_bracket.lo << ", "
       << last_beta_bracket.hi << "], max " << max_inner_expansions << " expansions";
  if (inner_warnings > 0)
    diag << "; warning: inner non-concavity in " << inner_warnings
         << " beta searches (first at alpha=" << first_warning_alpha << ")";
  if (outer.non_unimodal) diag << "; warning: outer objective not unimodal in alpha";
  out.bracket_diagnostics = diag.str();
  return out;
}

/// Saddle point of the ensemble-averaged objective. The ensemble is reduced
/// once to its moments, so every probe costs O(1) and all probes share the
/// same realizations.
inline SaddlePoint solve_saddle(const EnsembleMoments& moments, double delta, double noise_var,
                                double gamma, const SearchOptions& opts = {}) {
  return solve_saddle_with(
      [&](double alpha, double beta) {
        return scalar_objective(alpha, beta, moments, delta, noise_var, gamma);
      },
      opts);
}

inline SaddlePoint solve_saddle(std::span<const ScalarSample> ensemble, double delta,
                                double noise_var, double gamma, const SearchOptions& opts = {},
                                Parallelism par = {}) {
  if (ensemble.empty()) throw DimensionError("solve_saddle: empty ensemble");
  return solve_saddle(ensemble_moments(ensemble, par), delta, noise_var, gamma, opts);
}

/// (alpha*)^2 - noise_var, clamped at zero. A clamp appends a message to
/// `warnings` when given.
inline double predicted_mse(const SaddlePoint& saddle, double noise_var,
                            std::vector<std::string>* warnings = nullptr) {
  const double raw = saddle.alpha * saddle.alpha - noise_var;
  if (raw < 0.0) {
    if (warnings) {
      std::ostringstream msg;
      msg << "predicted MSE clamped to 0 (alpha*^2 - noise_var = " << raw << ")";
      warnings->push_back(msg.str());
    }
    return 0.0;
  }
  return raw;
}

}  // namespace drasym
