#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace risisac {

/// Deterministic random stream addressed by (seed, tag, index).
///
/// Every consumer of randomness derives its own stream, so regenerating a
/// channel set or re-running a Monte-Carlo trial never depends on global
/// draw order. All transforms are implemented on top of std::mt19937_64,
/// whose output sequence is fixed by the standard, so results are
/// reproducible across platforms.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

  /// Uniform on (0, 1] (never returns 0, safe as a log argument).
  double uniform();
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal();

  /// Circularly symmetric complex normal with unit total variance.
  std::complex<double> complex_normal();

  /// Unit-modulus complex number with uniform phase.
  std::complex<double> unit_phase();

  /// Laplace(location, scale) via inverse CDF.
  double laplace(double location, double scale);

  std::uint64_t raw();

 private:
  std::mt19937_64 engine_;
};

}  // namespace risisac
