#include <catch2/catch_amalgamated.hpp>

#include "linknbed/rng.hpp"

using namespace linknbed;

TEST_CASE("same seed reproduces the sequence") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("derived streams with different tags diverge") {
  Rng a(make_stream(7, "alpha").next_u64());
  uint64_t s1 = derive_seed(7, "alpha");
  uint64_t s2 = derive_seed(7, "beta");
  uint64_t s3 = derive_seed(7, "alpha", 1);
  uint64_t s4 = derive_seed(8, "alpha");
  REQUIRE(s1 != s2);
  REQUIRE(s1 != s3);
  REQUIRE(s1 != s4);
  (void)a;
}

TEST_CASE("next_below stays in range") {
  Rng rng(99);
  for (int i = 0; i < 2000; ++i) {
    uint64_t n = 1 + rng.next_u64() % 97;
    REQUIRE(rng.next_below(n) < n);
  }
}

TEST_CASE("next_unit is in [0, 1)") {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    double u = rng.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v1(50), v2(50);
  for (int i = 0; i < 50; ++i) v1[i] = v2[i] = i;
  Rng a(31), b(31);
  a.shuffle(v1);
  b.shuffle(v2);
  REQUIRE(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) REQUIRE(sorted[size_t(i)] == i);
}

TEST_CASE("sample_indices draws without replacement") {
  Rng rng(17);
  auto picked = rng.sample_indices(20, 8);
  REQUIRE(picked.size() == 8);
  std::sort(picked.begin(), picked.end());
  REQUIRE(std::adjacent_find(picked.begin(), picked.end()) == picked.end());
  for (size_t i : picked) REQUIRE(i < 20);

  auto all = rng.sample_indices(5, 50);
  REQUIRE(all.size() == 5);
}
