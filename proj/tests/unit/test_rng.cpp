#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "gatedgeom/rng.hpp"

using namespace gatedgeom;

TEST_CASE("splitmix64 matches the reference sequence") {
  // First outputs of the reference SplitMix64 generator seeded with 0.
  CounterRng rng(0);
  CHECK(rng.next_u64() == 0xe220a8397b1dcdafULL);
  CHECK(rng.next_u64() == 0x6e789e6aa1b965f4ULL);
  CHECK(rng.next_u64() == 0x06c45d188009454fULL);
}

TEST_CASE("streams are independent of each other and reproducible") {
  CHECK(stream_key(0, "a", 0) != stream_key(0, "b", 0));
  CHECK(stream_key(0, "a", 0) != stream_key(0, "a", 1));
  CHECK(stream_key(0, "a", 0) != stream_key(1, "a", 0));
  CHECK(stream_key(7, "data/center", 3) == stream_key(7, "data/center", 3));

  CounterRng a(5, "x", 2), b(5, "x", 2);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(a.counter() == 100);
}

TEST_CASE("uniform and normal draws have the right moments") {
  CounterRng rng(1, "moments");
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  double lo = 1, hi = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("below is unbiased and in range") {
  CounterRng rng(2, "below");
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto k = rng.below(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("random_permutation is a permutation") {
  CounterRng rng(3, "perm");
  const auto p = random_permutation(100, rng);
  std::set<std::size_t> s(p.begin(), p.end());
  CHECK(s.size() == 100);
  CHECK(*s.rbegin() == 99);
  CounterRng again(3, "perm");
  CHECK(random_permutation(100, again) == p);
}
