#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "drasym/drasym.hpp"

namespace {

void print_error(const std::string& kind, const std::string& message) {
  std::string escaped;
  for (char c : message) {
    if (c == '"' || c == '\\') escaped += '\\';
    escaped += c == '\n' ? ' ' : c;
  }
  std::cerr << "error kind=" << kind << " message=\"" << escaped << "\"\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Douglas-Rachford runs and CGMT state-evolution MSE prediction"};
  std::string config_path;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path;
  std::optional<int> particles;
  std::optional<int> trials;
  std::optional<unsigned> threads;
  bool quiet = false;

  app.add_option("--config", config_path, "Config file (key = value lines)")->required();
  app.add_option("--mode", mode, "empirical|predict|both|sweep")
      ->check(CLI::IsMember({"empirical", "predict", "both", "sweep"}));
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", out_path, "Output CSV path (stdout when empty)");
  app.add_option("--particles", particles, "Monte Carlo particles for the prediction");
  app.add_option("--trials", trials, "Empirical trials");
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");
  app.add_flag("--quiet", quiet, "Suppress the summary on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("usage", e.what());
    return 2;
  }

  try {
    drasym::ExperimentConfig cfg = drasym::load_config(config_path);
    if (mode) cfg.mode = drasym::parse_mode(*mode);
    if (seed) cfg.system.seed = *seed;
    if (out_path) cfg.output_path = *out_path;
    if (particles) cfg.system.mc_particles = *particles;
    if (trials) cfg.system.trials = *trials;
    if (threads) cfg.threads = *threads;
    cfg.validate();

#ifndef NDEBUG
    if (std::holds_alternative<drasym::CustomPrior>(cfg.system.prior) &&
        !drasym::check_prior_moments(cfg.system.prior, 100000, cfg.system.seed, 0.05))
      std::cerr << "warning: custom prior moments deviate from the declared values\n";
#endif

    const drasym::RunReport report = drasym::run_experiment(cfg);

    if (cfg.output_path.empty()) {
      drasym::write_csv(std::cout, report.rows);
    } else {
      std::ofstream csv(cfg.output_path, std::ios::binary);
      if (!csv) throw drasym::ConfigError("cannot write '" + cfg.output_path + "'");
      drasym::write_csv(csv, report.rows);
      std::ofstream meta(drasym::meta_path_for(cfg.output_path), std::ios::binary);
      if (!meta) throw drasym::ConfigError("cannot write metadata next to '" + cfg.output_path + "'");
      drasym::write_meta(meta, cfg, report);
    }

    if (!quiet) {
      std::cerr << "drasym: " << report.rows.size() << " rows, mode " << drasym::to_string(cfg.mode)
                << ", delta " << cfg.system.delta() << "\n";
      if (cfg.system.overdetermined()) std::cerr << "note: m > n (overdetermined system)\n";
      for (const auto& [k, gamma] : report.best_gamma)
        std::cerr << "argmin gamma at k=" << k << ": " << gamma << "\n";
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    }
  } catch (const drasym::Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
