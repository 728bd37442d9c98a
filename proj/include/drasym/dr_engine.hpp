#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drasym/errors.hpp"
#include "drasym/model.hpp"
#include "drasym/prox.hpp"
#include "drasym/rng.hpp"

namespace drasym {

/// Iterate of the Douglas-Rachford recursion
///
///   s^{k+1} = prox_{gamma L}(z^k)
///   z^{k+1} = z^k + rho (prox_{gamma lambda f}(2 s^{k+1} - z^k) - s^{k+1})
///
/// `reg_point` keeps the last prox_{gamma lambda f} output. It converges to
/// the same minimizer as s and, unlike s, has exact zeros, which is what the
/// L1 optimality check needs.
struct DRState {
  Eigen::VectorXd s;
  Eigen::VectorXd z;
  Eigen::VectorXd reg_point;
  int k = 0;

  static DRState initial(Eigen::VectorXd z0) {
    DRState st;
    st.s = Eigen::VectorXd::Zero(z0.size());
    st.reg_point = Eigen::VectorXd::Zero(z0.size());
    st.z = std::move(z0);
    return st;
  }
};

inline DRState dr_step(const DRState& state, const SquaredLossProx& prox, const Regularizer& reg,
                       double gamma, double lambda, double rho) {
  if (!state.z.allFinite())
    throw NumericalError("dr_step: non-finite z entering iteration " + std::to_string(state.k + 1));
  DRState next;
  next.k = state.k + 1;
  next.s = prox.apply(state.z);
  next.reg_point = prox_separable(reg, 2.0 * next.s - state.z, gamma * lambda);
  next.z = state.z + rho * (next.reg_point - next.s);
  if (!next.s.allFinite() || !next.z.allFinite())
    throw NumericalError("dr_step: non-finite iterate at iteration " + std::to_string(next.k));
  return next;
}

/// 0.5 ||y - A s||^2 + lambda f(s)
inline double objective_value(const ProblemInstance& inst, double lambda,
                              const Eigen::Ref<const Eigen::VectorXd>& s,
                              const Regularizer& reg = L1{}) {
  if (s.size() != inst.n()) throw DimensionError("objective_value: s has wrong length");
  return 0.5 * (inst.y - inst.a * s).squaredNorm() + lambda * regularizer_value(reg, s);
}

/// First-order optimality violation of s for the L1 problem. With
/// g = A^T (A s - y) this is the largest of |g_n + lambda sign(s_n)| over the
/// support and max(|g_n| - lambda, 0) off it. Coordinates with
/// |s_n| <= zero_tol count as off the support.
inline double optimality_residual(const ProblemInstance& inst, double lambda,
                                  const Eigen::Ref<const Eigen::VectorXd>& s,
                                  double zero_tol = 0.0) {
  if (s.size() != inst.n()) throw DimensionError("optimality_residual: s has wrong length");
  const Eigen::VectorXd g = inst.a.transpose() * (inst.a * s - inst.y);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    double r;
    if (std::abs(s[i]) > zero_tol) {
      r = std::abs(g[i] + (s[i] > 0.0 ? lambda : -lambda));
    } else {
      r = std::max(std::abs(g[i]) - lambda, 0.0);
    }
    worst = std::max(worst, r);
  }
  return worst;
}

struct RunRecord {
  int k = 0;
  double mse = 0.0;
  double objective = 0.0;
  std::chrono::duration<double> wall_time{0.0};
};

struct RunMetrics {
  std::vector<RunRecord> records;
  DRState final_state;
  bool early_stopped = false;
};

struct DrRunOptions {
  Regularizer reg = L1{};
  /// Defaults to the zero vector.
  std::optional<Eigen::VectorXd> z0;
  /// Stop once optimality_residual(reg_point) falls to this value (L1 only).
  std::optional<double> early_stop_tol;
  /// Relaxation per iteration k = 0, 1, ...; constant config.rho when empty.
  std::function<double(int)> rho_schedule;
};

/// Runs exactly `iterations` DR steps (fewer only if early stopping fires),
/// recording the MSE against inst.x and the objective of s^(k) for k >= 1.
inline RunMetrics dr_run(const ProblemInstance& inst, const SystemConfig& config, int iterations,
                         const DrRunOptions& options = {}) {
  if (iterations < 1) throw ConfigError("dr_run: iterations must be at least 1");
  if (options.early_stop_tol && !is_l1(options.reg))
    throw ConfigError("dr_run: early stopping requires the L1 regularizer");
  const SquaredLossProx prox(inst.a, inst.y, config.gamma);
  RunMetrics out;
  out.records.reserve(static_cast<std::size_t>(iterations));
  DRState state = DRState::initial(options.z0.value_or(Eigen::VectorXd::Zero(inst.n())));
  if (state.z.size() != inst.n()) throw DimensionError("dr_run: z0 has wrong length");

  const auto start = std::chrono::steady_clock::now();
  for (int it = 0; it < iterations; ++it) {
    const double rho = options.rho_schedule ? options.rho_schedule(it) : config.rho;
    state = dr_step(state, prox, options.reg, config.gamma, config.lambda, rho);
    RunRecord rec;
    rec.k = state.k;
    rec.mse = empirical_mse(state.s, inst.x);
    rec.objective = objective_value(inst, config.lambda, state.s, options.reg);
    rec.wall_time = std::chrono::steady_clock::now() - start;
    out.records.push_back(rec);
    if (options.early_stop_tol &&
        optimality_residual(inst, config.lambda, state.reg_point) <= *options.early_stop_tol) {
      out.early_stopped = true;
      break;
    }
  }
  out.final_state = std::move(state);
  return out;
}

/// Largest eigenvalue of A^T A by power iteration.
inline double spectral_norm_squared(const Eigen::MatrixXd& a, int max_iter = 1000,
                                    double rel_tol = 1e-12) {
  if (a.size() == 0) return 0.0;
  Rng rng(0x5eed);
  Eigen::VectorXd v(a.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.gaussian();
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = a.transpose() * (a * v);
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - estimate) <= rel_tol * next) return next;
    estimate = next;
  }
  return estimate;
}

/// Proximal-gradient (ISTA) solve of the L1 problem with step 1/||A||_2^2.
/// Independent of the DR code path; used as a convergence oracle.
inline Eigen::VectorXd ista_reference(const ProblemInstance& inst, double lambda, int max_iter,
                                      double tol) {
  const double lipschitz = spectral_norm_squared(inst.a);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(inst.n());
  if (lipschitz == 0.0) {
    if (optimality_residual(inst, lambda, s) <= tol) return s;
    throw ConvergenceError("ista_reference: zero operator", optimality_residual(inst, lambda, s));
  }
  const double step = 1.0 / lipschitz;
  double residual = 0.0;
  for (int it = 0; it <= max_iter; ++it) {
    const Eigen::VectorXd g = inst.a.transpose() * (inst.a * s - inst.y);
    residual = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double r = s[i] != 0.0 ? std::abs(g[i] + (s[i] > 0.0 ? lambda : -lambda))
                                   : std::max(std::abs(g[i]) - lambda, 0.0);
      residual = std::max(residual, r);
    }
    if (residual <= tol) return s;
    if (it == max_iter) break;
    const Eigen::VectorXd r = s - step * g;
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = soft_threshold(r[i], step * lambda);
  }
  throw ConvergenceError("ista_reference: no convergence after " + std::to_string(max_iter) +
                             " iterations, residual " + std::to_string(residual),
                         residual);
}

}  // namespace drasym
