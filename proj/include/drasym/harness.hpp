#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "drasym/config.hpp"
#include "drasym/dr_engine.hpp"
#include "drasym/errors.hpp"
#include "drasym/model.hpp"
#include "drasym/parallel.hpp"
#include "drasym/rng.hpp"
#include "drasym/state_evolution.hpp"

namespace drasym {

inline constexpr const char* kVersion = "0.1.0";

struct ResultRow {
  int k = 0;
  double gamma = 0.0;
  std::optional<double> mse_empirical_mean;
  std::optional<double> mse_empirical_stderr;
  std::optional<double> mse_predicted;
  std::optional<double> alpha_star;
  std::optional<double> beta_star;
};

inline void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return a.gamma != b.gamma ? a.gamma < b.gamma : a.k < b.k;
  });
}

inline constexpr const char* kCsvHeader =
    "k,gamma,mse_empirical_mean,mse_empirical_stderr,mse_predicted,alpha_star,beta_star";

inline void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  auto field = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << kCsvHeader << "\n";
  for (const ResultRow& r : rows) {
    out << r.k << "," << format_double(r.gamma) << "," << field(r.mse_empirical_mean) << ","
        << field(r.mse_empirical_stderr) << "," << field(r.mse_predicted) << ","
        << field(r.alpha_star) << "," << field(r.beta_star) << "\n";
  }
}

inline std::string to_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  write_csv(out, rows);
  return out.str();
}

/// Per-k mean and standard error of the empirical MSE over trials.
struct EmpiricalCurve {
  std::vector<double> mean;
  std::vector<double> stderr_;
  /// mse[t][k-1] for trial t.
  std::vector<std::vector<double>> per_trial;
};

/// Runs `system.trials` independent DR trials. Trial t (1-based) samples its
/// instance from derive_seed(seed, kTrial, t); results are collected by trial
/// index, so the output does not depend on the number of threads.
inline EmpiricalCurve empirical_curve(const SystemConfig& system, int iterations, Parallelism par) {
  system.validate();
  const auto trials = static_cast<std::size_t>(system.trials);
  std::vector<std::vector<double>> per_trial(trials);
  parallel_for(trials, par, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t t = lo; t < hi; ++t) {
      try {
        const ProblemInstance inst =
            sample_instance(system, derive_seed(system.seed, Stream::kTrial, t + 1));
        const RunMetrics metrics = dr_run(inst, system, iterations);
        std::vector<double>& mse = per_trial[t];
        mse.reserve(metrics.records.size());
        for (const RunRecord& r : metrics.records) mse.push_back(r.mse);
      } catch (const Error& e) {
        throw Error(e.kind(), "trial " + std::to_string(t + 1) + ": " + e.what());
      }
    }
  });

  EmpiricalCurve curve;
  curve.mean.assign(static_cast<std::size_t>(iterations), 0.0);
  curve.stderr_.assign(static_cast<std::size_t>(iterations), 0.0);
  const auto n = static_cast<double>(trials);
  for (std::size_t k = 0; k < curve.mean.size(); ++k) {
    double sum = 0.0;
    for (const auto& tr : per_trial) sum += tr[k];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& tr : per_trial) ss += (tr[k] - mean) * (tr[k] - mean);
    curve.mean[k] = mean;
    curve.stderr_[k] = trials > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  }
  curve.per_trial = std::move(per_trial);
  return curve;
}

inline SeOptions se_options(const ExperimentConfig& cfg) {
  SeOptions o;
  o.par = Parallelism{cfg.threads};
  o.persistent_h = cfg.persistent_h;
  o.sampling = cfg.stratified ? Sampling::kStratified : Sampling::kIid;
  return o;
}

inline std::vector<ResultRow> run_empirical(const ExperimentConfig& cfg) {
  const SystemConfig& sys = cfg.system;
  const EmpiricalCurve curve = empirical_curve(sys, sys.iterations, Parallelism{cfg.threads});
  std::vector<ResultRow> rows;
  for (int k = 1; k <= sys.iterations; ++k) {
    ResultRow r;
    r.k = k;
    r.gamma = sys.gamma;
    r.mse_empirical_mean = curve.mean[k - 1];
    if (sys.trials > 1) r.mse_empirical_stderr = curve.stderr_[k - 1];
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<ResultRow> rows_from_trace(const EvolutionTrace& trace, double gamma) {
  std::vector<ResultRow> rows;
  for (const EvolutionRecord& rec : trace.records) {
    ResultRow r;
    r.k = rec.k;
    r.gamma = gamma;
    r.mse_predicted = rec.predicted_mse;
    r.alpha_star = rec.alpha_star;
    r.beta_star = rec.beta_star;
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<ResultRow> run_prediction(const ExperimentConfig& cfg,
                                             std::vector<std::string>* warnings = nullptr) {
  const EvolutionTrace trace = se_run(cfg.system, cfg.system.iterations, se_options(cfg));
  if (warnings) warnings->insert(warnings->end(), trace.warnings.begin(), trace.warnings.end());
  return rows_from_trace(trace, cfg.system.gamma);
}

/// Merges empirical and predicted rows that share (gamma, k).
inline std::vector<ResultRow> merge_rows(std::vector<ResultRow> a, const std::vector<ResultRow>& b) {
  std::map<std::pair<double, int>, std::size_t> index;
  for (std::size_t i = 0; i < a.size(); ++i) index[{a[i].gamma, a[i].k}] = i;
  for (const ResultRow& r : b) {
    auto it = index.find({r.gamma, r.k});
    if (it == index.end()) {
      a.push_back(r);
      continue;
    }
    ResultRow& dst = a[it->second];
    if (r.mse_empirical_mean) dst.mse_empirical_mean = r.mse_empirical_mean;
    if (r.mse_empirical_stderr) dst.mse_empirical_stderr = r.mse_empirical_stderr;
    if (r.mse_predicted) dst.mse_predicted = r.mse_predicted;
    if (r.alpha_star) dst.alpha_star = r.alpha_star;
    if (r.beta_star) dst.beta_star = r.beta_star;
  }
  sort_rows(a);
  return a;
}

struct SweepResult {
  std::vector<ResultRow> rows;
  /// Snapshot k -> gamma with the smallest predicted MSE.
  std::map<int, double> best_gamma;
  std::vector<std::string> warnings;
};

/// For every gamma in the grid, predicts (and optionally measures) the MSE at
/// the snapshot iterations.
inline SweepResult sweep_gamma(const ExperimentConfig& cfg) {
  if (cfg.gamma_grid.empty()) throw ConfigError("sweep_gamma: empty gamma_grid");
  if (cfg.sweep_snapshot_iterations.empty())
    throw ConfigError("sweep_gamma: no snapshot iterations");
  const int last = *std::max_element(cfg.sweep_snapshot_iterations.begin(),
                                     cfg.sweep_snapshot_iterations.end());
  SweepResult out;
  std::map<int, double> best_mse;
  for (double gamma : cfg.gamma_grid) {
    SystemConfig sys = cfg.system;
    sys.gamma = gamma;
    const EvolutionTrace trace = se_run(sys, last, se_options(cfg));
    out.warnings.insert(out.warnings.end(), trace.warnings.begin(), trace.warnings.end());
    std::optional<EmpiricalCurve> curve;
    if (cfg.sweep_empirical) curve = empirical_curve(sys, last, Parallelism{cfg.threads});
    for (int k : cfg.sweep_snapshot_iterations) {
      const EvolutionRecord& rec = trace.records[static_cast<std::size_t>(k - 1)];
      ResultRow r;
      r.k = k;
      r.gamma = gamma;
      r.mse_predicted = rec.predicted_mse;
      r.alpha_star = rec.alpha_star;
      r.beta_star = rec.beta_star;
      if (curve) {
        r.mse_empirical_mean = curve->mean[static_cast<std::size_t>(k - 1)];
        if (sys.trials > 1) r.mse_empirical_stderr = curve->stderr_[static_cast<std::size_t>(k - 1)];
      }
      out.rows.push_back(r);
      auto it = best_mse.find(k);
      if (it == best_mse.end() || rec.predicted_mse < it->second) {
        best_mse[k] = rec.predicted_mse;
        out.best_gamma[k] = gamma;
      }
    }
  }
  sort_rows(out.rows);
  return out;
}

struct LambdaChoice {
  double lambda = 0.0;
  double plateau_mse = 0.0;
  std::vector<std::pair<double, double>> scanned;
};

/// Picks lambda from `grid` by the smallest predicted MSE after `iterations`
/// state-evolution steps (the plateau of the predicted curve).
inline LambdaChoice tune_lambda(SystemConfig system, const std::vector<double>& grid, int iterations,
                                const SeOptions& options = {}) {
  if (grid.empty()) throw ConfigError("tune_lambda: empty grid");
  LambdaChoice best;
  best.plateau_mse = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    system.lambda = lambda;
    const EvolutionTrace trace = se_run(system, iterations, options);
    const double mse = trace.records.back().predicted_mse;
    best.scanned.emplace_back(lambda, mse);
    if (mse < best.plateau_mse) {
      best.plateau_mse = mse;
      best.lambda = lambda;
    }
  }
  return best;
}

struct RunReport {
  std::vector<ResultRow> rows;
  std::map<int, double> best_gamma;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, double>> wall_times;
};

/// Runs whatever cfg.mode asks for.
inline RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunReport report;
  auto timed = [&](const std::string& label, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto result = fn();
    report.wall_times.emplace_back(
        label, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return result;
  };
  switch (cfg.mode) {
    case Mode::kEmpirical:
      report.rows = timed("empirical", [&] { return run_empirical(cfg); });
      break;
    case Mode::kPredict:
      report.rows = timed("predict", [&] { return run_prediction(cfg, &report.warnings); });
      break;
    case Mode::kBoth: {
      auto emp = timed("empirical", [&] { return run_empirical(cfg); });
      auto pred = timed("predict", [&] { return run_prediction(cfg, &report.warnings); });
      report.rows = merge_rows(std::move(emp), pred);
      break;
    }
    case Mode::kSweep: {
      SweepResult sweep = timed("sweep", [&] { return sweep_gamma(cfg); });
      report.rows = std::move(sweep.rows);
      report.best_gamma = std::move(sweep.best_gamma);
      report.warnings.insert(report.warnings.end(), sweep.warnings.begin(), sweep.warnings.end());
      break;
    }
  }
  sort_rows(report.rows);
  return report;
}

/// Sidecar metadata: `key = value` lines next to the CSV.
inline void write_meta(std::ostream& out, const ExperimentConfig& cfg, const RunReport& report) {
  const std::string canonical = serialize_config(cfg);
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));
  out << "drasym_version = " << kVersion << "\n";
  out << "eigen_version = " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "."
      << EIGEN_MINOR_VERSION << "\n";
#if defined(__VERSION__)
  out << "compiler = " << __VERSION__ << "\n";
#endif
  out << "config_hash = " << hash << "\n";
  out << "delta = " << format_double(cfg.system.delta()) << "\n";
  out << "overdetermined = " << (cfg.system.overdetermined() ? "true" : "false") << "\n";
  out << "rows = " << report.rows.size() << "\n";
  for (const auto& [k, gamma] : report.best_gamma)
    out << "argmin_gamma_k" << k << " = " << format_double(gamma) << "\n";
  for (const auto& [label, seconds] : report.wall_times)
    out << "wall_time_" << label << "_s = " << seconds << "\n";
  out << "warnings = " << report.warnings.size() << "\n";
  for (const std::string& w : report.warnings) out << "warning = " << w << "\n";
  out << "# config\n";
  std::istringstream lines(canonical);
  for (std::string line; std::getline(lines, line);) out << "config." << line << "\n";
}

/// path with its extension replaced by `.meta`.
inline std::string meta_path_for(const std::string& csv_path) {
  const auto slash = csv_path.find_last_of('/');
  const auto dot = csv_path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return csv_path + ".meta";
  return csv_path.substr(0, dot) + ".meta";
}

}  // namespace drasym
