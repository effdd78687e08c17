#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "gklab/rng.hpp"

using gklab::Philox;

// Known-answer vectors for Philox4x32-10 from the reference implementation's
// test suite: (counter, key) -> block.
TEST_CASE("philox known answers") {
  {
    const Philox::Counter c{0, 0, 0, 0};
    const Philox::Key k{0, 0};
    const Philox::Counter out = Philox::block(c, k);
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);
  }
  {
    const Philox::Counter c{0xffffffffu, 0xffffffffu, 0xffffffffu,
                            0xffffffffu};
    const Philox::Key k{0xffffffffu, 0xffffffffu};
    const Philox::Counter out = Philox::block(c, k);
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);
  }
  {
    const Philox::Counter c{0x243f6a88u, 0x85a308d3u, 0x13198a2eu,
                            0x03707344u};
    const Philox::Key k{0xa4093822u, 0x299f31d0u};
    const Philox::Counter out = Philox::block(c, k);
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
  }
}

TEST_CASE("streams are reproducible and distinct") {
  Philox a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  bool same_ab = true, same_ac = false, same_ad = false;
  int diff_ac = 0, diff_ad = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t va = a.next_u64();
    if (va != b.next_u64()) same_ab = false;
    if (va != c.next_u64()) ++diff_ac;
    if (va != d.next_u64()) ++diff_ad;
  }
  CHECK(same_ab);
  CHECK(!same_ac);
  CHECK(!same_ad);
  CHECK(diff_ac > 990);
  CHECK(diff_ad > 990);
}

TEST_CASE("uniform ranges") {
  Philox rng(20260822);
  double lo = 1, hi = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform_pos();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("below covers all residues and stays in range") {
  Philox rng(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t v = rng.below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  for (std::uint64_t n : {1ull, 2ull, 13ull, 1000003ull})
    for (int i = 0; i < 100; ++i) CHECK(rng.below(n) < n);
}

TEST_CASE("exponential mean") {
  Philox rng(99);
  const int n = 400000;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const double w = rng.exponential(2.0);
    CHECK(w > 0);
    sum += w;
  }
  // mean 1/2, sd of the estimate (1/2)/sqrt(n) ~ 8e-4
  CHECK(std::abs(sum / n - 0.5) < 5e-3);
}
