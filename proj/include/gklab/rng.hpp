#pragma once

// Counter-based RNG (Philox4x32-10). Counter-based so that replica streams
// are reproducible across thread schedules: stream identity lives in the key,
// position in the counter, and no state is shared between generators.

#include <array>
#include <cmath>
#include <cstdint>

namespace gklab {

class Philox {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0) {
    key_ = {static_cast<std::uint32_t>(seed),
            static_cast<std::uint32_t>(seed >> 32)};
    ctr_ = {0, 0, static_cast<std::uint32_t>(stream),
            static_cast<std::uint32_t>(stream >> 32)};
    idx_ = 4;
  }

  // One keyed block, exposed for known-answer tests.
  static Counter block(Counter c, Key k) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k[0] += kWeyl0;
        k[1] += kWeyl1;
      }
      const auto [hi0, lo0] = mulhilo(kMult0, c[0]);
      const auto [hi1, lo1] = mulhilo(kMult1, c[2]);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
    return c;
  }

  std::uint32_t next_u32() {
    if (idx_ == 4) {
      out_ = block(ctr_, key_);
      bump();
      idx_ = 0;
    }
    return out_[idx_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0,1]: complements so that log() below never sees zero.
  double uniform_pos() { return 1.0 - uniform(); }

  // Exponential waiting time with the given rate.
  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  // Uniform integer in [0, n).  Rejection keeps it exactly unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

 private:
  static constexpr std::uint32_t kMult0 = 0xD2511F53u;
  static constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::pair<std::uint32_t, std::uint32_t> mulhilo(std::uint32_t a,
                                                         std::uint32_t b) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    return {static_cast<std::uint32_t>(p >> 32),
            static_cast<std::uint32_t>(p)};
  }

  void bump() {
    if (++ctr_[0] == 0) ++ctr_[1];
  }

  Key key_;
  Counter ctr_;
  Counter out_{};
  int idx_;
};

}  // namespace gklab
