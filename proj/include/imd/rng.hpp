#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace imd {

/// Seeded random stream.
///
/// Uniform bits come from std::mt19937_64 seeded through std::seed_seq with
/// the (seed, stream) pair. Normal variates use the 256-layer ziggurat of
/// Marsaglia and Tsang: one 64-bit word per attempt, the low 8 bits pick the
/// layer and the top 53 bits give a signed uniform. Acceptance is ~99%, so a
/// normal costs roughly one word.
///
/// `position()` counts 64-bit words consumed. Two Rng values with the same
/// seed, stream and position produce the same future output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t position() const { return position_; }

  /// Fast-forwards a fresh stream to `position`.
  static Rng restore(std::uint64_t seed, std::uint64_t stream, std::uint64_t position);

  /// Independent stream derived from this seed; does not advance *this.
  Rng split(std::uint64_t stream) const { return Rng(seed_, stream); }

  std::uint64_t next_u64() {
    ++position_;
    return engine_();
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  double normal();
  void fill_normal(std::span<double> out);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.seed_ == b.seed_ && a.stream_ == b.stream_ && a.position_ == b.position_;
  }

 private:
  double normal_slow(std::uint64_t bits);

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t position_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace imd
