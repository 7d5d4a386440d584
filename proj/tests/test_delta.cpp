#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "ztnc/container.hpp"
#include "ztnc/delta.hpp"
#include "ztnc/error.hpp"
#include "ztnc/synth.hpp"

using namespace ztnc;

namespace {

// XORs the low mantissa byte of a fraction of the elements with `mask`, or
// with random nonzero bits when mask is 0.
Bytes perturb(const Bytes& base, double fraction, std::uint64_t seed, std::uint8_t mask = 0x01) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Bytes next = base;
  for (std::size_t i = 0; i < next.size(); i += 2) {
    if (u(rng) < fraction) next[i] ^= mask != 0 ? mask : static_cast<std::uint8_t>(1 + rng() % 127);
  }
  return next;
}

TEST(XorDelta, Examples) {
  EXPECT_EQ(xor_delta(Bytes{0x3F, 0x80}, Bytes{0x3F, 0x81}), (Bytes{0x00, 0x01}));
  EXPECT_EQ(xor_delta(Bytes(10, 7), Bytes(10, 7)), Bytes(10, 0));
  EXPECT_THROW(xor_delta(Bytes(4, 0), Bytes(6, 0)), InvalidInputError);
}

TEST(XorDelta, Involution) {
  std::mt19937_64 rng(1);
  const Bytes base = oracle::random_bytes(1000, rng);
  const Bytes next = oracle::random_bytes(1000, rng);
  EXPECT_EQ(xor_delta(base, xor_delta(base, next)), next);
}

TEST(Delta, IdenticalCheckpoints) {
  synth::Rng g(2);
  const Bytes base = synth::gaussian_tensor(kBF16, 1 << 19, 0.02, g);
  const CompressResult r = compress_delta(base, base);
  EXPECT_LT(r.report.total_ratio, 0.15);
  EXPECT_LE(r.report.total_ratio, compress_tensor(base, kBF16).report.total_ratio);
  EXPECT_EQ(apply_delta(base, r.container), base);
}

TEST(Delta, OnePercentMantissaFlips) {
  synth::Rng g(3);
  const Bytes base = synth::gaussian_tensor(kBF16, 1 << 19, 0.02, g);
  const Bytes next = perturb(base, 0.01, 4);
  const CompressResult r = compress_delta(base, next);
  EXPECT_LT(r.report.total_ratio, 0.30);
  const StreamReport* e = r.report.stream(StreamKind::kExponent);
  EXPECT_EQ(e->entropy_bits, 0.0);
  EXPECT_EQ(apply_delta(base, r.container), next);
}

TEST(Delta, RatioFallsWithPerturbation) {
  synth::Rng g(5);
  const Bytes base = synth::gaussian_tensor(kBF16, 1 << 18, 0.02, g);
  double prev = 2.0;
  for (const double f : {1.0, 0.5, 0.1, 0.01, 0.0}) {
    const double ratio = compress_delta(base, perturb(base, f, 6, 0)).report.total_ratio;
    EXPECT_LE(ratio, prev) << "fraction " << f;
    prev = ratio;
  }
}

TEST(Delta, FuzzedPairs) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 * (rng() % 5000);
    const Bytes base = oracle::random_bytes(n, rng);
    Bytes next = base;
    for (std::size_t k = 0; k < n / 50; ++k) next[rng() % n] ^= static_cast<std::uint8_t>(rng());
    const CompressResult r = compress_delta(base, next, {1024, 1});
    ASSERT_EQ(apply_delta(base, r.container), next);
  }
}

TEST(Delta, WrongBaseRejected) {
  synth::Rng g(8);
  const Bytes base = synth::gaussian_tensor(kBF16, 5000, 0.02, g);
  const Bytes next = perturb(base, 0.1, 9);
  const CompressResult r = compress_delta(base, next);
  EXPECT_THROW(apply_delta(Bytes(base.begin(), base.end() - 2), r.container), InvalidInputError);
  EXPECT_THROW(apply_delta(next, r.container), InvalidInputError);
}

TEST(Delta, PlainContainerIsNotADelta) {
  const Bytes base(100, 0);
  const CompressResult plain = compress_tensor(base, kBF16);
  EXPECT_THROW(apply_delta(base, plain.container), InvalidInputError);
}

TEST(Delta, MismatchedLengths) {
  EXPECT_THROW(compress_delta(Bytes(4, 0), Bytes(6, 0)), InvalidInputError);
  EXPECT_THROW(compress_delta(Bytes(3, 0), Bytes(3, 0)), InvalidInputError);
}

}  // namespace
