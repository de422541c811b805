#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rnnadapt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Any |value| beyond this during a rollout is treated as divergence.
inline constexpr double kDivergenceLimit = 1e6;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Thrown when a rollout produces a non-finite or runaway value.
/// Carries the step index at which the blow-up was detected.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(Index step, const std::string& what)
      : std::runtime_error("divergence at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  Index step() const { return step_; }

 private:
  Index step_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Derives an independent stream seed from a master seed and a stream tag.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ (0x632be59bd9b4e019ULL + stream * 0x9e3779b97f4a7c15ULL);
  detail::splitmix64(s);
  return detail::splitmix64(s);
}

/// Deterministic random source. xoshiro-free: a splitmix64 stream with
/// explicit double mappings, so the byte stream does not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // Warm up so that small seeds do not produce correlated first draws.
    detail::splitmix64(state_);
    detail::splitmix64(state_);
  }

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  Index uniform_index(Index n) {
    return static_cast<Index>(next_u64() % static_cast<std::uint64_t>(n));
  }

  /// Standard normal via Box-Muller (consumes two uniforms per draw).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::uint64_t state_;
};

inline void check_finite(const Eigen::Ref<const Vec>& v, Index step) {
  for (Index i = 0; i < v.size(); ++i) {
    const double x = v[i];
    if (!std::isfinite(x) || std::abs(x) > kDivergenceLimit) {
      throw DivergenceError(step, "entry " + std::to_string(i) + " = " + std::to_string(x));
    }
  }
}

}  // namespace rnnadapt
