#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "drasym/errors.hpp"
#include "drasym/model.hpp"
#include "drasym/rng.hpp"

namespace drasym {

enum class Mode { kEmpirical, kPredict, kBoth, kSweep };

inline std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kEmpirical: return "empirical";
    case Mode::kPredict: return "predict";
    case Mode::kBoth: return "both";
    case Mode::kSweep: return "sweep";
  }
  return "both";
}

inline Mode parse_mode(std::string_view text) {
  if (text == "empirical") return Mode::kEmpirical;
  if (text == "predict") return Mode::kPredict;
  if (text == "both") return Mode::kBoth;
  if (text == "sweep" || text == "sweep_gamma") return Mode::kSweep;
  throw ConfigError("unknown mode '" + std::string(text) + "'");
}

/// Everything one CLI invocation needs.
struct ExperimentConfig {
  SystemConfig system{};
  Mode mode = Mode::kBoth;
  std::vector<double> gamma_grid;
  std::string output_path;
  std::vector<int> sweep_snapshot_iterations;
  unsigned threads = 1;
  bool persistent_h = true;
  /// Stratified antithetic particle sampling; false gives plain i.i.d. draws.
  bool stratified = true;
  /// In sweep mode, also run the empirical trials for every grid point.
  bool sweep_empirical = false;

  void validate() const {
    system.validate();
    if (mode == Mode::kSweep) {
      if (gamma_grid.empty()) throw ConfigError("gamma_grid must be nonempty in sweep mode");
      if (sweep_snapshot_iterations.empty())
        throw ConfigError("snapshot_iterations must be nonempty in sweep mode");
    }
    for (double g : gamma_grid)
      if (!(g > 0.0)) throw ConfigError("gamma_grid entries must be positive");
    for (int k : sweep_snapshot_iterations)
      if (k < 1 || k > system.iterations)
        throw ConfigError("snapshot iteration " + std::to_string(k) + " outside [1, iterations]");
  }
};

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError("key '" + key + "': cannot parse '" + text + "' as a number");
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<T>(key, item));
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + text + "'");
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>)
      out += format_double(values[i]);
    else
      out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace detail

/// Applies one `key = value` setting.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_number;
  SystemConfig& sys = cfg.system;
  if (key == "n") {
    sys.n = parse_number<int>(key, value);
  } else if (key == "m") {
    sys.m = parse_number<int>(key, value);
  } else if (key == "noise_var") {
    sys.noise_var = parse_number<double>(key, value);
  } else if (key == "prior") {
    if (value == "bernoulli_gaussian") {
      if (!std::holds_alternative<BernoulliGaussian>(sys.prior)) sys.prior = BernoulliGaussian{};
    } else if (value == "gaussian") {
      sys.prior = CustomPrior{[](Rng& r) { return r.gaussian(); }, 0.0, 1.0, "gaussian",
                              standard_normal_quantile};
    } else {
      throw ConfigError("unknown prior '" + value + "'");
    }
  } else if (key == "p0") {
    if (auto* bg = std::get_if<BernoulliGaussian>(&sys.prior))
      bg->p0 = parse_number<double>(key, value);
    else
      throw ConfigError("p0 only applies to prior = bernoulli_gaussian");
  } else if (key == "lambda") {
    sys.lambda = parse_number<double>(key, value);
  } else if (key == "gamma") {
    sys.gamma = parse_number<double>(key, value);
  } else if (key == "rho") {
    sys.rho = parse_number<double>(key, value);
  } else if (key == "iterations") {
    sys.iterations = parse_number<int>(key, value);
  } else if (key == "seed") {
    sys.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "mc_particles") {
    sys.mc_particles = parse_number<int>(key, value);
  } else if (key == "trials") {
    sys.trials = parse_number<int>(key, value);
  } else if (key == "mode") {
    cfg.mode = parse_mode(value);
  } else if (key == "gamma_grid") {
    cfg.gamma_grid = detail::parse_list<double>(key, value);
  } else if (key == "snapshot_iterations") {
    cfg.sweep_snapshot_iterations = detail::parse_list<int>(key, value);
  } else if (key == "out") {
    cfg.output_path = value;
  } else if (key == "threads") {
    cfg.threads = parse_number<unsigned>(key, value);
  } else if (key == "persistent_h") {
    cfg.persistent_h = detail::parse_bool(key, value);
  } else if (key == "stratified") {
    cfg.stratified = detail::parse_bool(key, value);
  } else if (key == "sweep_empirical") {
    cfg.sweep_empirical = detail::parse_bool(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Parses flat UTF-8 `key = value` lines; `#` starts a comment.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::stringstream ss{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

/// Canonical text form; parse_config(serialize_config(c)) reproduces c.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  const SystemConfig& s = cfg.system;
  std::ostringstream out;
  out << "n = " << s.n << "\n";
  out << "m = " << s.m << "\n";
  out << "noise_var = " << format_double(s.noise_var) << "\n";
  out << "prior = " << prior_name(s.prior) << "\n";
  if (const auto* bg = std::get_if<BernoulliGaussian>(&s.prior))
    out << "p0 = " << format_double(bg->p0) << "\n";
  out << "lambda = " << format_double(s.lambda) << "\n";
  out << "gamma = " << format_double(s.gamma) << "\n";
  out << "rho = " << format_double(s.rho) << "\n";
  out << "iterations = " << s.iterations << "\n";
  out << "seed = " << s.seed << "\n";
  out << "mc_particles = " << s.mc_particles << "\n";
  out << "trials = " << s.trials << "\n";
  out << "mode = " << to_string(cfg.mode) << "\n";
  out << "gamma_grid = " << detail::join(cfg.gamma_grid) << "\n";
  out << "snapshot_iterations = " << detail::join(cfg.sweep_snapshot_iterations) << "\n";
  out << "out = " << cfg.output_path << "\n";
  out << "threads = " << cfg.threads << "\n";
  out << "persistent_h = " << (cfg.persistent_h ? "true" : "false") << "\n";
  out << "stratified = " << (cfg.stratified ? "true" : "false") << "\n";
  out << "sweep_empirical = " << (cfg.sweep_empirical ? "true" : "false") << "\n";
  return out.str();
}

/// 64-bit FNV-1a, used to fingerprint configs in run metadata.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace drasym
