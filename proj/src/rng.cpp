#include "risisac/rng.hpp"

#include <cmath>

namespace risisac {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  std::uint64_t state = seed;
  std::uint64_t mixed = splitmix64(state);
  state ^= fnv1a(tag);
  mixed ^= splitmix64(state);
  state ^= index + 0x9e3779b97f4a7c15ULL;
  mixed ^= splitmix64(state);
  engine_.seed(mixed);
}

std::uint64_t RandomStream::raw() { return engine_(); }

double RandomStream::uniform() {
  // 53 significant bits, shifted into (0, 1].
  return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RandomStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::complex<double> RandomStream::complex_normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-std::log(u1));
  return {r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2)};
}

std::complex<double> RandomStream::unit_phase() {
  const double ph = 2.0 * M_PI * uniform();
  return {std::cos(ph), std::sin(ph)};
}

double RandomStream::laplace(double location, double scale) {
  const double u = uniform() - 0.5;
  const double s = (u < 0.0) ? -1.0 : 1.0;
  return location - scale * s * std::log(1.0 - 2.0 * std::abs(u));
}

}  // namespace risisac
