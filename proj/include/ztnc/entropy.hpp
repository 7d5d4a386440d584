#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ztnc/bytes.hpp"

namespace ztnc {

inline constexpr int kMaxCodeLength = 15;

// Ratio (coded bytes + codebook bytes) / original bytes below which a chunk
// is worth entropy coding.
inline constexpr double kCompressThreshold = 0.98;

struct Histogram {
  std::array<std::uint64_t, 256> counts{};
  std::uint64_t total = 0;

  void add(ByteView data);
  Histogram& operator+=(const Histogram& other);
  std::size_t distinct() const;
};

Histogram histogram(ByteView data);

// Canonical prefix code over byte symbols, fully determined by the per-symbol
// code lengths. Codewords are assigned in (length, symbol) order.
class Codebook {
 public:
  Codebook() = default;

  // Throws InvalidInputError unless the lengths form a complete prefix code
  // (Kraft sum exactly 1), or a single symbol of length 1.
  static Codebook from_lengths(const std::array<std::uint8_t, 256>& lengths);

  const std::array<std::uint8_t, 256>& lengths() const noexcept { return lengths_; }
  std::uint8_t length(std::uint8_t symbol) const noexcept { return lengths_[symbol]; }
  std::uint16_t code(std::uint8_t symbol) const noexcept { return codes_[symbol]; }
  int max_length() const noexcept { return max_length_; }
  std::size_t present_count() const noexcept { return present_; }
  bool empty() const noexcept { return present_ == 0; }

  // Coded size of data with histogram `h`, in bits. Symbols without a code
  // contribute nothing; check covers() first.
  std::uint64_t coded_bits(const Histogram& h) const noexcept;
  bool covers(const Histogram& h) const noexcept;

  friend bool operator==(const Codebook& a, const Codebook& b) noexcept {
    return a.lengths_ == b.lengths_;
  }

 private:
  std::array<std::uint8_t, 256> lengths_{};
  std::array<std::uint16_t, 256> codes_{};
  int max_length_ = 0;
  std::size_t present_ = 0;
};

// Optimal prefix code for `h` with lengths capped at kMaxCodeLength. Plain
// Huffman with ties broken toward the lower symbol; package-merge when the
// Huffman tree is deeper than the cap. A single present symbol gets length 1.
Codebook build_codebook(const Histogram& h);

struct EncodedStream {
  Bytes payload;
  std::uint64_t bit_count = 0;
  std::uint64_t symbol_count = 0;
};

// Bits are packed most-significant first; the last byte is zero padded.
EncodedStream encode(ByteView data, const Codebook& cb);

// Table-driven decoder for one codebook. Immutable after construction, so one
// instance can serve any number of threads.
class Decoder {
 public:
  explicit Decoder(const Codebook& cb);

  // Decodes exactly `n` symbols that must consume exactly `bit_count` bits.
  Bytes decode(ByteView payload, std::uint64_t bit_count, std::size_t n) const;

  // Decodes `n` symbols from a payload whose bit count is implied: the
  // payload must end in the byte holding the last code bit and the padding
  // after it must be zero.
  Bytes decode_padded(ByteView payload, std::size_t n) const;

 private:
  std::uint64_t decode_into(ByteView payload, std::size_t n, std::uint8_t* out) const;

  int table_bits_ = 0;
  // (symbol << 4) | length; length 0 marks a bit pattern with no code.
  std::vector<std::uint16_t> table_;
};

Bytes decode(const EncodedStream& stream, const Codebook& cb, std::size_t n);

double entropy_bits_per_symbol(const Histogram& h);

enum class ChunkCoding : std::uint8_t { kRaw = 0, kHuffman = 1 };

ChunkCoding should_compress(const Histogram& h, const Codebook& cb, std::size_t codebook_ser_size);

// u16 present count, then (symbol, length) pairs in ascending symbol order.
Bytes serialize_codebook(const Codebook& cb);
std::size_t serialized_codebook_size(const Codebook& cb) noexcept;
// Throws CorruptError(kMalformed) on unsorted pairs, bad lengths, trailing
// bytes, or Kraft violations, and CorruptError(kTruncated) on short input.
Codebook deserialize_codebook(ByteView bytes);

}  // namespace ztnc
