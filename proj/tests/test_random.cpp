#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "dpc/random.hpp"

using namespace dpc;

TEST(NoiseStream, SameKeySameSequence) {
  NoiseStream a(42), b(42);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(NoiseStream, DrawIsPureFunctionOfKeyAndCounter) {
  NoiseStream a(7);
  for (int k = 0; k < 10; ++k) a.next_u64();
  const std::uint64_t eleventh = a.next_u64();
  NoiseStream b(7);
  std::uint64_t v = 0;
  for (int k = 0; k < 11; ++k) v = b.next_u64();
  EXPECT_EQ(v, eleventh);
  EXPECT_EQ(b.counter(), 11u);
}

TEST(NoiseStream, UniformStaysInOpenInterval) {
  NoiseStream s(1);
  for (int k = 0; k < 100000; ++k) {
    const double u = s.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  for (int k = 0; k < 1000; ++k) {
    const double u = s.uniform(-2.0, 3.0);
    ASSERT_GE(u, -2.0);
    ASSERT_LE(u, 3.0);
  }
}

TEST(NoiseStream, NormalMoments) {
  NoiseStream s(99);
  const int n = 200000;
  double m1 = 0, m2 = 0, m4 = 0;
  for (int k = 0; k < n; ++k) {
    const double z = s.normal();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  // standard errors: 1/sqrt(n), sqrt(2/n), sqrt(96/n)
  EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(MakeStream, CoordinatesAndTagsSeparateStreams) {
  std::set<std::uint64_t> keys;
  for (std::uint64_t i = 0; i < 20; ++i)
    for (std::uint64_t j = 0; j < 20; ++j) {
      keys.insert(make_stream(5, StreamTag::kBrownian, {i, j}).key());
      keys.insert(make_stream(5, StreamTag::kLatent, {i, j}).key());
    }
  EXPECT_EQ(keys.size(), 800u);
  EXPECT_NE(make_stream(5, StreamTag::kParams, {1}).key(), make_stream(6, StreamTag::kParams, {1}).key());
  EXPECT_EQ(make_stream(5, StreamTag::kParams, {1}).key(), make_stream(5, StreamTag::kParams, {1}).key());
}
