#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "ztnc/checksum.hpp"
#include "ztnc/container.hpp"
#include "ztnc/error.hpp"
#include "ztnc/synth.hpp"

using namespace ztnc;

namespace {

std::uint64_t directory_bytes(const ContainerInfo& info) {
  std::uint64_t n = kHeaderBytes;
  for (const auto& s : info.streams) n += kStreamHeaderBytes + kChunkEntryBytes * s.chunks.size();
  return n;
}

TEST(Checksum, MatchesBitwiseReference) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(crc32(to_bytes("123456789")), 0xCBF43926u);
  for (int i = 0; i < 20; ++i) {
    const Bytes b = oracle::random_bytes(rng() % 5000, rng);
    EXPECT_EQ(crc32(b), oracle::crc32(b));
  }
}

TEST(Container, Bf16ZerosCompressHard) {
  const Bytes raw(1 << 20, 0);
  const CompressResult r = compress_tensor(raw, kBF16);
  // Each stream: 2 chunks of 256 KiB at one bit per symbol plus a 4-byte
  // table per chunk, over a 1 MiB input.
  const std::uint64_t bound = kHeaderBytes + 2 * (kStreamHeaderBytes + 2 * kChunkEntryBytes) +
                              2 * 2 * (262144 / 8 + 4);
  EXPECT_EQ(r.container.size(), bound);
  EXPECT_LT(r.report.total_ratio, 0.15);
  EXPECT_EQ(decompress_tensor(r.container), raw);
}

TEST(Container, UniformFallsBackToRaw) {
  std::mt19937_64 rng(2);
  const Bytes raw = oracle::random_bytes(1 << 20, rng);
  const CompressResult r = compress_tensor(raw, kBF16);
  EXPECT_LE(r.report.total_ratio, 1.01);
  for (const auto& s : inspect_container(r.container).streams) {
    for (const auto& c : s.chunks) {
      EXPECT_EQ(c.coding, ChunkCoding::kRaw);
      EXPECT_EQ(c.comp_len, c.orig_len);
      EXPECT_EQ(c.codebook_len, 0);
    }
  }
  EXPECT_EQ(decompress_tensor(r.container), raw);
}

TEST(Container, GaussianBf16ExponentBelowHalf) {
  synth::Rng rng(3);
  const Bytes raw = synth::gaussian_tensor(kBF16, 1 << 19, 0.02, rng);
  const CompressResult r = compress_tensor(raw, kBF16);
  const StreamReport* e = r.report.stream(StreamKind::kExponent);
  ASSERT_NE(e, nullptr);
  EXPECT_LT(e->ratio, 0.50);
  EXPECT_EQ(decompress_tensor(r.container), raw);
}

TEST(Container, ReportAddsUpToFileSize) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 30; ++i) {
    const Bytes raw = oracle::skewed_bytes(2 * (1 + rng() % 40000), 1 + i * 8, rng);
    const ContainerOptions opts{static_cast<std::uint32_t>(1000 + rng() % 20000), 1};
    const CompressResult r = compress_tensor(raw, i % 2 ? kBF16 : kFP8E4M3, opts);
    const ContainerInfo info = inspect_container(r.container);
    std::uint64_t sum = r.report.overhead_bytes;
    for (const auto& s : r.report.streams) sum += s.compressed_bytes;
    EXPECT_EQ(sum, r.container.size());
    EXPECT_EQ(r.report.compressed_bytes, r.container.size());
    EXPECT_EQ(r.report.overhead_bytes, directory_bytes(info));
    EXPECT_DOUBLE_EQ(r.report.total_ratio, safe_ratio(r.container.size(), raw.size()));
  }
}

TEST(Container, DirectoryInvariants) {
  std::mt19937_64 rng(5);
  const Bytes raw = oracle::skewed_bytes(100001, 30, rng);
  const ContainerOptions opts{7000, 2};
  const CompressResult r = compress_tensor(raw, kFP8E5M2, opts);
  const ContainerInfo info = inspect_container(r.container);
  EXPECT_EQ(info.header.format, PayloadFormat::kFP8E5M2);
  EXPECT_EQ(info.header.element_count, raw.size());
  EXPECT_EQ(info.header.chunk_size, 7000u);
  for (const auto& s : info.streams) {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < s.chunks.size(); ++i) {
      sum += s.chunks[i].orig_len;
      if (i + 1 < s.chunks.size()) EXPECT_EQ(s.chunks[i].orig_len, 7000u);
    }
    EXPECT_EQ(sum, s.original_len);
    EXPECT_EQ(s.chunks.size(), (s.original_len + 6999) / 7000);
  }
}

TEST(Container, ProfileMatchesCompress) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 10; ++i) {
    const Bytes raw = oracle::skewed_bytes(2 * (1 + rng() % 30000), 2 + i * 20, rng);
    const ContainerOptions opts{4096, 1};
    const CompressResult r = compress_tensor(raw, kBF16, opts);
    const CompressionReport p = profile_tensor(raw, kBF16, opts);
    EXPECT_EQ(to_json(p), to_json(r.report));
  }
}

TEST(Container, RawBytesRoundtrip) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    const Bytes raw = oracle::skewed_bytes(rng() % 50000, 1 + i * 12, rng);
    const CompressResult r = compress_bytes(raw, {3000, 2});
    EXPECT_EQ(decompress_tensor(r.container), raw);
  }
}

TEST(Container, EmptyTensor) {
  const CompressResult r = compress_tensor(Bytes{}, kBF16);
  EXPECT_TRUE(decompress_tensor(r.container).empty());
  EXPECT_EQ(r.report.total_ratio, 0.0);
}

TEST(RandomAccess, ChunksAreSlicesOfFullDecode) {
  std::mt19937_64 rng(8);
  const Bytes raw = oracle::skewed_bytes(2 * 12345, 40, rng);
  const CompressResult r = compress_tensor(raw, kBF16, {5000, 1});
  for (const StreamKind kind : {StreamKind::kExponent, StreamKind::kSignMantissa}) {
    const Bytes full = decode_stream(r.container, kind);
    ASSERT_EQ(full.size(), 12345u);
    Bytes cat;
    for (std::size_t i = 0; i < 3; ++i) {
      const Bytes c = decode_chunk(r.container, kind, i);
      const std::size_t off = i * 5000;
      EXPECT_TRUE(std::equal(c.begin(), c.end(), full.begin() + static_cast<std::ptrdiff_t>(off)));
      cat.insert(cat.end(), c.begin(), c.end());
    }
    EXPECT_EQ(decode_chunk(r.container, kind, 2).size(), 12345u - 10000u);
    EXPECT_EQ(cat, full);
    EXPECT_THROW(decode_chunk(r.container, kind, 3), InvalidInputError);
  }
}

TEST(RandomAccess, ChunkDecodeIgnoresOtherChunks) {
  std::mt19937_64 rng(9);
  const Bytes raw = oracle::skewed_bytes(40000, 20, rng);
  CompressResult r = compress_bytes(raw, {10000, 1});
  const ContainerInfo info = inspect_container(r.container);
  const auto& s = info.stream(StreamKind::kRawBytes);
  // Trash chunk 3; chunk 0 must still decode.
  for (std::uint64_t i = s.chunk_offsets[3]; i < r.container.size(); ++i) r.container[i] ^= 0x5A;
  EXPECT_EQ(decode_chunk(r.container, StreamKind::kRawBytes, 0), Bytes(raw.begin(), raw.begin() + 10000));
  EXPECT_THROW(decompress_tensor(r.container), CorruptError);
}

TEST(Corruption, BadMagicAndVersion) {
  const CompressResult r = compress_tensor(Bytes(64, 1), kBF16);
  Bytes bad = r.container;
  bad[0] = 'X';
  try {
    decompress_tensor(bad);
    FAIL();
  } catch (const CorruptError& e) {
    EXPECT_EQ(e.kind(), CorruptKind::kBadMagic);
  }
  bad = r.container;
  bad[4] = 9;
  try {
    decompress_tensor(bad);
    FAIL();
  } catch (const CorruptError& e) {
    EXPECT_EQ(e.kind(), CorruptKind::kBadVersion);
  }
}

TEST(Corruption, TruncationAtEveryLength) {
  std::mt19937_64 rng(10);
  const Bytes raw = oracle::skewed_bytes(3000, 10, rng);
  const CompressResult r = compress_tensor(raw, kBF16, {500, 1});
  for (std::size_t len = 0; len < r.container.size(); len += 7) {
    const ByteView cut(r.container.data(), len);
    try {
      decompress_tensor(cut);
      FAIL() << "len " << len;
    } catch (const CorruptError& e) {
      EXPECT_TRUE(e.kind() == CorruptKind::kTruncated || e.kind() == CorruptKind::kBadMagic)
          << "len " << len << ": " << e.what();
    }
  }
}

TEST(Corruption, TrailingBytesRejected) {
  CompressResult r = compress_tensor(Bytes(64, 1), kBF16);
  r.container.push_back(0);
  EXPECT_THROW(decompress_tensor(r.container), CorruptError);
}

TEST(Corruption, RawChunkBitFlipIsChecksumError) {
  std::mt19937_64 rng(11);
  const Bytes raw = oracle::random_bytes(20000, rng);
  CompressResult r = compress_bytes(raw, {4000, 1});
  const ContainerInfo info = inspect_container(r.container);
  const auto& s = info.stream(StreamKind::kRawBytes);
  r.container[s.chunk_offsets[2] + 17] ^= 0x04;
  try {
    decompress_tensor(r.container);
    FAIL();
  } catch (const CorruptError& e) {
    EXPECT_EQ(e.kind(), CorruptKind::kChecksum);
    EXPECT_EQ(e.stream(), "raw_bytes");
    EXPECT_EQ(e.chunk(), 2u);
  }
}

TEST(Corruption, CodedChunkBitFlipNamesStreamAndChunk) {
  synth::Rng g(12);
  const Bytes raw = synth::gaussian_tensor(kBF16, 40000, 0.02, g);
  const CompressResult r = compress_tensor(raw, kBF16, {8000, 1});
  const ContainerInfo info = inspect_container(r.container);
  const auto& s = info.stream(StreamKind::kExponent);
  ASSERT_EQ(s.chunks[1].coding, ChunkCoding::kHuffman);
  std::mt19937_64 rng(13);
  for (int t = 0; t < 40; ++t) {
    Bytes bad = r.container;
    const std::uint64_t at = s.chunk_offsets[1] + s.chunks[1].codebook_len + rng() % s.chunks[1].comp_len;
    bad[at] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
    try {
      decompress_tensor(bad);
      FAIL();
    } catch (const CorruptError& e) {
      EXPECT_EQ(e.stream(), "exponent");
      EXPECT_EQ(e.chunk(), 1u);
    }
  }
}

TEST(Determinism, ThreadCountDoesNotChangeBytes) {
  std::mt19937_64 rng(14);
  const Bytes raw = oracle::skewed_bytes(2 * 300000, 50, rng);
  const Bytes one = compress_tensor(raw, kBF16, {20000, 1}).container;
  EXPECT_EQ(compress_tensor(raw, kBF16, {20000, 4}).container, one);
  EXPECT_EQ(compress_tensor(raw, kBF16, {20000, 3}).container, one);
  EXPECT_EQ(decompress_tensor(one, {20000, 4}), raw);
}

TEST(Container, RejectsZeroChunkSize) {
  EXPECT_THROW(compress_tensor(Bytes(8, 0), kBF16, {0, 1}), InvalidInputError);
}

}  // namespace
