#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "ztnc/bytes.hpp"

namespace ztnc {

enum class FormatId : std::uint8_t {
  kBF16 = 0,
  kFP8E4M3 = 1,
  kFP8E5M2 = 2,
  kFP4E2M1 = 3,
};

// Static bit layout of one element format.
struct FloatFormat {
  FormatId id;
  std::string_view name;
  int sign_bits;
  int exponent_bits;
  int mantissa_bits;
  int bias;
  int element_bits;

  constexpr std::size_t element_bytes() const noexcept {
    return static_cast<std::size_t>(element_bits / 8);
  }
  friend constexpr bool operator==(const FloatFormat& a, const FloatFormat& b) noexcept {
    return a.id == b.id;
  }
};

inline constexpr FloatFormat kBF16{FormatId::kBF16, "bf16", 1, 8, 7, 127, 16};
inline constexpr FloatFormat kFP8E4M3{FormatId::kFP8E4M3, "fp8-e4m3", 1, 4, 3, 7, 8};
inline constexpr FloatFormat kFP8E5M2{FormatId::kFP8E5M2, "fp8-e5m2", 1, 5, 2, 15, 8};
inline constexpr FloatFormat kFP4E2M1{FormatId::kFP4E2M1, "fp4-e2m1", 1, 2, 1, 1, 4};

const FloatFormat& format_of(FormatId id);
std::optional<FloatFormat> parse_format(std::string_view name);

// Exponent and sign+mantissa streams of one tensor.
//
// BF16: one byte per element in each stream; the exponent byte is bits 14..7
// and the sign+mantissa byte is (sign << 7) | mantissa.
//
// FP8 (both variants): each element byte is cut at bit 3. The high part
// (bits 6..3) goes to the exponent stream and (sign << 3) | bits 2..0 goes to
// the sign+mantissa stream. Nibbles of consecutive element pairs share a byte,
// first element in the high nibble. For E4M3 the cut is exactly exponent vs
// sign+mantissa; for E5M2 the exponent LSB travels with the mantissa nibble.
// An odd element count leaves a zero pad nibble, counted in pad_elements.
struct BitPlanes {
  FloatFormat format = kBF16;
  std::size_t element_count = 0;
  Bytes exponent_stream;
  Bytes sign_mantissa_stream;
  std::size_t pad_elements = 0;
};

// Bytes per stream produced by split() for `element_count` elements.
std::size_t plane_stream_bytes(const FloatFormat& format, std::size_t element_count);

BitPlanes split(ByteView raw, const FloatFormat& format);
Bytes merge(const BitPlanes& planes);

// Numeric value of one element bit pattern. Diagnostics only: nothing in the
// codec path interprets values.
double decode_value(std::uint32_t bits, const FloatFormat& format);

}  // namespace ztnc
