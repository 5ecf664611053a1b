#include "imd/rng.hpp"

#include <array>
#include <cmath>

namespace imd {
namespace {

constexpr int kLayers = 256;
// Right edge of the base layer and common layer area for 256 layers.
constexpr double kTailStart = 3.6541528853610088;
constexpr double kLayerArea = 4.92867323399e-3;

double gauss_density(double x) { return std::exp(-0.5 * x * x); }

struct ZigguratTables {
  std::array<double, kLayers + 1> edge{};
  std::array<double, kLayers + 1> density{};

  ZigguratTables() {
    edge[0] = kLayerArea / gauss_density(kTailStart);
    edge[1] = kTailStart;
    for (int i = 2; i < kLayers; ++i) {
      edge[i] = std::sqrt(-2.0 * std::log(kLayerArea / edge[i - 1] + gauss_density(edge[i - 1])));
    }
    edge[kLayers] = 0.0;
    for (int i = 0; i <= kLayers; ++i) density[i] = gauss_density(edge[i]);
  }
};

const ZigguratTables& tables() {
  static const ZigguratTables t;
  return t;
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

Rng Rng::restore(std::uint64_t seed, std::uint64_t stream, std::uint64_t position) {
  Rng rng(seed, stream);
  rng.engine_.discard(position);
  rng.position_ = position;
  return rng;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  // Lemire's multiply-shift with rejection, unbiased.
  for (;;) {
    const std::uint64_t x = next_u64();
    const unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
    const auto low = static_cast<std::uint64_t>(m);
    if (low >= bound || low >= (-bound) % bound) return static_cast<std::uint64_t>(m >> 64);
  }
}

double Rng::normal() {
  const auto& t = tables();
  const std::uint64_t bits = next_u64();
  const auto layer = static_cast<int>(bits & 0xff);
  const double u = 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
  const double x = u * t.edge[layer];
  if (std::fabs(x) < t.edge[layer + 1]) return x;
  return normal_slow(bits);
}

double Rng::normal_slow(std::uint64_t bits) {
  const auto& t = tables();
  for (;;) {
    const auto layer = static_cast<int>(bits & 0xff);
    const double u = 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
    const double x = u * t.edge[layer];
    if (std::fabs(x) < t.edge[layer + 1]) return x;
    if (layer == 0) {
      // Tail beyond kTailStart (Marsaglia 1964).
      double a, b;
      do {
        a = -std::log(1.0 - uniform()) / kTailStart;
        b = -std::log(1.0 - uniform());
      } while (b + b < a * a);
      return u < 0.0 ? -(kTailStart + a) : kTailStart + a;
    }
    const double y = t.density[layer + 1] + uniform() * (t.density[layer] - t.density[layer + 1]);
    if (y < std::exp(-0.5 * x * x)) return x;
    bits = next_u64();
  }
}

void Rng::fill_normal(std::span<double> out) {
  for (double& v : out) v = normal();
}

}  // namespace imd
