#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "drasym/errors.hpp"

namespace drasym {

/// sign(r) * max(|r| - theta, 0)
inline double soft_threshold(double r, double theta) {
  if (r > theta) return r - theta;
  if (r < -theta) return r + theta;
  return 0.0;
}

struct L1 {};

/// Separable regularizer given coordinate-wise. scalar_prox(t, threshold)
/// must be the prox of threshold * penalty evaluated at t.
struct CustomRegularizer {
  std::function<double(double, double)> scalar_prox;
  std::function<double(double)> penalty;
  std::string description;
};

using Regularizer = std::variant<L1, CustomRegularizer>;

inline bool is_l1(const Regularizer& reg) { return std::holds_alternative<L1>(reg); }

inline double scalar_prox(const Regularizer& reg, double t, double threshold) {
  if (is_l1(reg)) return soft_threshold(t, threshold);
  return std::get<CustomRegularizer>(reg).scalar_prox(t, threshold);
}

/// Coordinate-wise prox of threshold * f.
inline Eigen::VectorXd prox_separable(const Regularizer& reg,
                                      const Eigen::Ref<const Eigen::VectorXd>& r,
                                      double threshold) {
  Eigen::VectorXd out(r.size());
  if (is_l1(reg)) {
    for (Eigen::Index i = 0; i < r.size(); ++i) out[i] = soft_threshold(r[i], threshold);
  } else {
    const auto& prox = std::get<CustomRegularizer>(reg).scalar_prox;
    for (Eigen::Index i = 0; i < r.size(); ++i) out[i] = prox(r[i], threshold);
  }
  return out;
}

/// f(s) = sum_n f(s_n)
inline double regularizer_value(const Regularizer& reg, const Eigen::Ref<const Eigen::VectorXd>& s) {
  if (is_l1(reg)) return s.lpNorm<1>();
  const auto& penalty = std::get<CustomRegularizer>(reg).penalty;
  if (!penalty) throw ConfigError("custom regularizer has no penalty function");
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) total += penalty(s[i]);
  return total;
}

/// prox of gamma * L with L(s) = 0.5 ||y - A s||^2:
///
///   prox(z) = (A^T A + (1/gamma) I)^{-1} (A^T y + z / gamma).
///
/// The regularized Gram matrix is Cholesky-factorized once at construction.
/// When M < N the M x M system A A^T + c I is factorized instead and applied
/// through the Woodbury identity
///
///   (A^T A + c I)^{-1} w = (w - A^T (A A^T + c I)^{-1} A w) / c,  c = 1/gamma.
///
/// Instances are immutable after construction and apply() is safe to call
/// concurrently.
class SquaredLossProx {
 public:
  enum class Path { kDirect, kWoodbury };

  SquaredLossProx(Eigen::MatrixXd a, const Eigen::Ref<const Eigen::VectorXd>& y, double gamma,
                  std::optional<Path> force_path = std::nullopt)
      : a_(std::move(a)), gamma_(gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      throw ConfigError("SquaredLossProx: gamma must be positive and finite");
    if (y.size() != a_.rows())
      throw DimensionError("SquaredLossProx: y has length " + std::to_string(y.size()) +
                           ", A has " + std::to_string(a_.rows()) + " rows");
    path_ = force_path.value_or(a_.rows() < a_.cols() ? Path::kWoodbury : Path::kDirect);
    aty_ = a_.transpose() * y;

    const double c = inv_gamma();
    Eigen::MatrixXd gram;
    if (path_ == Path::kWoodbury) {
      gram.noalias() = a_ * a_.transpose();
    } else {
      gram.noalias() = a_.transpose() * a_;
    }
    gram.diagonal().array() += c;
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success || !aty_.allFinite()) {
      std::ostringstream msg;
      msg << "SquaredLossProx: Cholesky factorization failed (dimension " << gram.rows()
          << ", diagonal range [" << gram.diagonal().minCoeff() << ", "
          << gram.diagonal().maxCoeff() << "], finite input: " << std::boolalpha
          << (a_.allFinite() && y.allFinite()) << ")";
      throw NumericalError(msg.str());
    }
  }

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    if (z.size() != a_.cols())
      throw DimensionError("SquaredLossProx::apply: z has length " + std::to_string(z.size()) +
                           ", expected " + std::to_string(a_.cols()));
    if (!z.allFinite()) throw NumericalError("SquaredLossProx::apply: non-finite input");
    const double c = inv_gamma();
    const Eigen::VectorXd w = aty_ + c * z;
    Eigen::VectorXd s;
    if (path_ == Path::kWoodbury) {
      const Eigen::VectorXd inner = llt_.solve(a_ * w);
      s = (w - a_.transpose() * inner) / c;
    } else {
      s = llt_.solve(w);
    }
#ifndef NDEBUG
    const double tol = 1e-8 * (1.0 + z.lpNorm<Eigen::Infinity>());
    if (stationarity_residual(s, z) > tol)
      throw NumericalError("SquaredLossProx::apply: stationarity residual above tolerance");
#endif
    return s;
  }

  /// || A^T (A s - y) + (s - z) / gamma ||_inf, zero exactly at prox(z).
  double stationarity_residual(const Eigen::Ref<const Eigen::VectorXd>& s,
                               const Eigen::Ref<const Eigen::VectorXd>& z) const {
    const Eigen::VectorXd grad = a_.transpose() * (a_ * s) - aty_ + (s - z) * inv_gamma();
    return grad.lpNorm<Eigen::Infinity>();
  }

  Path path() const { return path_; }
  double gamma() const { return gamma_; }
  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::VectorXd& aty() const { return aty_; }
  Eigen::Index n() const { return a_.cols(); }

 private:
  double inv_gamma() const { return 1.0 / gamma_; }

  Eigen::MatrixXd a_;
  Eigen::VectorXd aty_;
  double gamma_;
  Path path_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace drasym
