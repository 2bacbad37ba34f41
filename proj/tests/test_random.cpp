#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "coreset/parallel.hpp"
#include "coreset/random.hpp"

using namespace coreset;

namespace {

// Reference xoshiro256** written straight from the published algorithm.
struct RefXoshiro {
  std::uint64_t s[4];
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t next() {
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }
};

struct RefSplitMix {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

}  // namespace

TEST_CASE("reference generators") {
  RefSplitMix sm{1234567};
  CHECK(sm.next() == 6457827717110365317ULL);
  CHECK(sm.next() == 3203168211198807973ULL);
  CHECK(splitmix64(1234567) == 6457827717110365317ULL);

  RefXoshiro x{{1, 2, 3, 4}};
  CHECK(x.next() == 11520ULL);
  CHECK(x.next() == 0ULL);
  CHECK(x.next() == 1509978240ULL);
  CHECK(x.next() == 1215971899390074240ULL);
}

TEST_CASE("Rng matches xoshiro256** seeded by splitmix64") {
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xFFFFFFFFFFFFFFFFULL}) {
    RefSplitMix sm{seed};
    RefXoshiro ref{{sm.next(), sm.next(), sm.next(), sm.next()}};
    Rng rng(seed);
    for (int i = 0; i < 1000; ++i) REQUIRE(rng.next() == ref.next());
  }
}

TEST_CASE("child streams depend only on seed and key") {
  Rng a(9);
  Rng b(9);
  for (int i = 0; i < 17; ++i) b.next();
  CHECK(a.child(3).next() == b.child(3).next());
  CHECK(a.child(3).next() != a.child(4).next());
  CHECK(Rng(9).child(3).seed() == splitmix64(9 ^ splitmix64(3 + 0x9E3779B97F4A7C15ULL)));
  CHECK(stream_key({1, 2}) != stream_key({2, 1}));
  CHECK(stream_key({1, 2}) == stream_key({1, 2}));
}

TEST_CASE("below is unbiased") {
  Rng rng(77);
  for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 7ULL, 10ULL}) {
    std::vector<double> counts(bound, 0.0);
    const int draws = 70000;
    for (int i = 0; i < draws; ++i) {
      auto v = rng.below(bound);
      REQUIRE(v < bound);
      counts[v] += 1;
    }
    double chi2 = 0.0;
    const double expected = static_cast<double>(draws) / static_cast<double>(bound);
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 99.9% quantile of chi-square with 9 dof is 27.9.
    CHECK(chi2 < 27.9);
  }
  CHECK_THROWS_AS(rng.below(0), std::invalid_argument);
  CHECK(rng.below(std::uint64_t{1} << 63) < (std::uint64_t{1} << 63));
}

TEST_CASE("uniform and normal moments") {
  Rng rng(5);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double z = rng.uniform_open_zero();
    REQUIRE(z > 0.0);
    REQUIRE(z <= 1.0);
    su += u;
    const double g = rng.normal();
    sn += g;
    sn2 += g * g;
  }
  CHECK(std::abs(su / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(sn / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(sn2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("sample without replacement") {
  std::vector<std::size_t> pool{4, 8, 15, 16, 23, 42};
  Rng rng(1);
  std::map<std::size_t, int> hits;
  const int trials = 30000;
  for (int t = 0; t < trials; ++t) {
    auto s = sample_without_replacement(pool, 2, rng);
    REQUIRE(s.size() == 2);
    REQUIRE(std::is_sorted(s.begin(), s.end()));
    REQUIRE(s[0] != s[1]);
    for (auto v : s) ++hits[v];
  }
  for (auto v : pool) {
    const double p = 2.0 / 6.0;
    const double se = std::sqrt(p * (1 - p) / trials);
    CHECK(std::abs(hits[v] / static_cast<double>(trials) - p) < 4 * se);
  }
  CHECK(sample_without_replacement(pool, 6, rng) ==
        std::vector<std::size_t>{4, 8, 15, 16, 23, 42});
  CHECK(sample_without_replacement(pool, 0, rng).empty());
  CHECK_THROWS_AS(sample_without_replacement(pool, 7, rng), std::invalid_argument);
}

TEST_CASE("shuffle is a permutation") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  Rng rng(3);
  shuffle(v, rng);
  CHECK(std::set<int>(v.begin(), v.end()).size() == 100);
  CHECK_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST_CASE("parallel_for covers every index once") {
  for (std::size_t threads : {1u, 2u, 3u, 8u, 0u}) {
    std::vector<int> seen(1001, 0);
    parallel_for(seen.size(), threads, [&](std::size_t i) { ++seen[i]; });
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
  CHECK_THROWS_AS(parallel_for(10, 4,
                               [](std::size_t i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
