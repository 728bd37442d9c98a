#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace drasym {

// SplitMix64 finalizer. Used to turn (master seed, stream ids) tuples into
// well-mixed engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives the seed of an independent substream from a master seed and a
/// sequence of stream identifiers (trial index, purpose tag, ...). The result
/// depends only on its arguments, never on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t h = mix64(master);
  for (std::uint64_t id : ids) h = mix64(h ^ mix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

// Purpose tags for derive_seed.
enum class Stream : std::uint64_t {
  kSignal = 1,
  kMatrix = 2,
  kNoise = 3,
  kParticles = 4,
  kParticleNoise = 5,
  kTrial = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream s,
                                    std::uint64_t index = 0) noexcept {
  return derive_seed(master, {static_cast<std::uint64_t>(s), index});
}

/// Random source used everywhere in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniforms take the top 53 bits of one engine word. Gaussians use
/// the basic Box-Muller transform and consume exactly two engine words per
/// pair of normals, so sample streams are identical across standard library
/// implementations (std::normal_distribution is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace drasym
