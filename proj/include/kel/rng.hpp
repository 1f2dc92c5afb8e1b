#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace kel {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Every draw is a
// pure function of (key, counter), so results do not depend on thread
// scheduling.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

 private:
  static Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

// Stream domains keep draws for different purposes disjoint under one seed.
enum class StreamTag : std::uint32_t {
  Step = 1,
  InitX = 2,
  InitY = 3,
  Probe = 4,
  Bootstrap = 5,
  Restart = 6,
  Jitter = 7,
  Split = 8,
  Test = 255,
};

// A sequential view over one (seed, tag, stream) lane. Cheap to construct;
// copy it per worker.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, StreamTag tag, std::uint64_t stream, std::uint64_t start = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        tag_(static_cast<std::uint32_t>(tag)),
        stream_(stream),
        counter_(start) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    if (cached_ == 0) refill();
    const std::uint32_t a = block_[4 - cached_];
    const std::uint32_t b = block_[5 - cached_];
    cached_ -= 2;
    return ((a >> 5) * 67108864.0 + (b >> 6)) * (1.0 / 9007199254740992.0);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  void refill() {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(counter_),
                                  static_cast<std::uint32_t>(counter_ >> 32),
                                  static_cast<std::uint32_t>(stream_),
                                  (tag_ << 24) ^ static_cast<std::uint32_t>(stream_ >> 32)};
    block_ = Philox4x32::apply(ctr, key_);
    ++counter_;
    cached_ = 4;
  }

  Philox4x32::Key key_;
  std::uint32_t tag_;
  std::uint64_t stream_;
  std::uint64_t counter_;
  Philox4x32::Counter block_{};
  int cached_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace kel
