#include "ztnc/format.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ztnc/error.hpp"

namespace ztnc {

const FloatFormat& format_of(FormatId id) {
  switch (id) {
    case FormatId::kBF16: return kBF16;
    case FormatId::kFP8E4M3: return kFP8E4M3;
    case FormatId::kFP8E5M2: return kFP8E5M2;
    case FormatId::kFP4E2M1: return kFP4E2M1;
  }
  throw InvalidInputError("unknown format id " + std::to_string(static_cast<int>(id)));
}

std::optional<FloatFormat> parse_format(std::string_view name) {
  for (const FloatFormat& f : {kBF16, kFP8E4M3, kFP8E5M2, kFP4E2M1}) {
    if (f.name == name) return f;
  }
  return std::nullopt;
}

std::size_t plane_stream_bytes(const FloatFormat& format, std::size_t element_count) {
  switch (format.id) {
    case FormatId::kBF16: return element_count;
    case FormatId::kFP8E4M3:
    case FormatId::kFP8E5M2: return (element_count + 1) / 2;
    case FormatId::kFP4E2M1: break;
  }
  throw InvalidInputError("fp4 tensors are split by the fp4 module");
}

namespace {

void split_bf16(ByteView raw, BitPlanes& planes) {
  const std::size_t n = raw.size() / 2;
  planes.exponent_stream.resize(n);
  planes.sign_mantissa_stream.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = raw[2 * i] | (static_cast<unsigned>(raw[2 * i + 1]) << 8);
    planes.exponent_stream[i] = static_cast<std::uint8_t>((v >> 7) & 0xFF);
    planes.sign_mantissa_stream[i] = static_cast<std::uint8_t>(((v >> 8) & 0x80) | (v & 0x7F));
  }
}

void split_fp8(ByteView raw, BitPlanes& planes) {
  const std::size_t n = raw.size();
  const std::size_t out = (n + 1) / 2;
  planes.exponent_stream.assign(out, 0);
  planes.sign_mantissa_stream.assign(out, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned b = raw[i];
    const unsigned hi = (b >> 3) & 0x0F;
    const unsigned lo = ((b >> 4) & 0x08) | (b & 0x07);
    const int shift = (i & 1) ? 0 : 4;
    planes.exponent_stream[i / 2] |= static_cast<std::uint8_t>(hi << shift);
    planes.sign_mantissa_stream[i / 2] |= static_cast<std::uint8_t>(lo << shift);
  }
  planes.pad_elements = n & 1;
}

}  // namespace

BitPlanes split(ByteView raw, const FloatFormat& format) {
  if (format.id == FormatId::kFP4E2M1) {
    throw InvalidInputError("fp4 tensors are split by the fp4 module");
  }
  const std::size_t width = format.element_bytes();
  if (raw.size() % width != 0) {
    throw InvalidInputError(std::string(format.name) + " input of " + std::to_string(raw.size()) +
                            " bytes is not a whole number of " + std::to_string(width) +
                            "-byte elements");
  }
  BitPlanes planes;
  planes.format = format;
  planes.element_count = raw.size() / width;
  if (format.id == FormatId::kBF16) {
    split_bf16(raw, planes);
  } else {
    split_fp8(raw, planes);
  }
  return planes;
}

Bytes merge(const BitPlanes& planes) {
  const FloatFormat& format = planes.format;
  const std::size_t n = planes.element_count;
  const std::size_t expected = plane_stream_bytes(format, n);
  if (planes.exponent_stream.size() != expected || planes.sign_mantissa_stream.size() != expected) {
    throw InvalidInputError("stream lengths (" + std::to_string(planes.exponent_stream.size()) +
                            ", " + std::to_string(planes.sign_mantissa_stream.size()) +
                            ") inconsistent with " + std::to_string(n) + " " +
                            std::string(format.name) + " elements");
  }
  Bytes raw(n * format.element_bytes());
  if (format.id == FormatId::kBF16) {
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned e = planes.exponent_stream[i];
      const unsigned sm = planes.sign_mantissa_stream[i];
      const unsigned v = ((sm & 0x80) << 8) | (e << 7) | (sm & 0x7F);
      raw[2 * i] = static_cast<std::uint8_t>(v);
      raw[2 * i + 1] = static_cast<std::uint8_t>(v >> 8);
    }
    return raw;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int shift = (i & 1) ? 0 : 4;
    const unsigned hi = (planes.exponent_stream[i / 2] >> shift) & 0x0F;
    const unsigned lo = (planes.sign_mantissa_stream[i / 2] >> shift) & 0x0F;
    raw[i] = static_cast<std::uint8_t>(((lo & 0x08) << 4) | (hi << 3) | (lo & 0x07));
  }
  return raw;
}

double decode_value(std::uint32_t bits, const FloatFormat& format) {
  const int m = format.mantissa_bits;
  const int e = format.exponent_bits;
  const std::uint32_t mant = bits & ((1u << m) - 1);
  const std::uint32_t exp = (bits >> m) & ((1u << e) - 1);
  const bool negative = (bits >> (m + e)) & 1u;
  const double sign = negative ? -1.0 : 1.0;
  const std::uint32_t exp_max = (1u << e) - 1;

  if (format.id == FormatId::kFP8E4M3) {
    if (exp == exp_max && mant == (1u << m) - 1) return std::numeric_limits<double>::quiet_NaN();
  } else if (format.id == FormatId::kFP8E5M2 || format.id == FormatId::kBF16) {
    if (exp == exp_max) {
      if (mant != 0) return std::numeric_limits<double>::quiet_NaN();
      return sign * std::numeric_limits<double>::infinity();
    }
  }
  // E2M1 has no special values.
  const double frac = static_cast<double>(mant) / static_cast<double>(1u << m);
  if (exp == 0) return sign * std::ldexp(frac, 1 - format.bias);
  return sign * std::ldexp(1.0 + frac, static_cast<int>(exp) - format.bias);
}

}  // namespace ztnc
