#include "ztnc/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <charconv>
#include <numbers>
#include <string>

#include "ztnc/error.hpp"

namespace ztnc::synth {

double Rng::normal(double sigma) {
  if (has_spare_) {
    has_spare_ = false;
    return spare_ * sigma;
  }
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u = 1.0 - uniform();
  const double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  spare_ = r * std::sin(2.0 * std::numbers::pi * v);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * v) * sigma;
}

std::vector<float> gaussian(std::size_t n, double sigma, Rng& rng) {
  std::vector<float> out(n);
  for (float& x : out) x = static_cast<float>(rng.normal(sigma));
  return out;
}

Bytes uniform_bytes(std::size_t n, Rng& rng) {
  Bytes out(n);
  std::size_t i = 0;
  while (i < n) {
    std::uint64_t word = rng.bits();
    for (int k = 0; k < 8 && i < n; ++k, word >>= 8) out[i++] = static_cast<std::uint8_t>(word);
  }
  return out;
}

std::uint16_t float_to_bf16(float value) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  if (std::isnan(value)) return static_cast<std::uint16_t>((bits >> 16) | 0x40);
  const std::uint32_t rounding = 0x7FFF + ((bits >> 16) & 1);
  return static_cast<std::uint16_t>((bits + rounding) >> 16);
}

std::uint8_t float_to_e4m3(float value) {
  if (std::isnan(value)) return 0x7F;
  const std::uint8_t sign = std::signbit(value) ? 0x80 : 0x00;
  const double a = std::fabs(static_cast<double>(value));
  if (a >= 448.0) return sign | 0x7E;
  // Subnormal spacing is 2^-9; normals below 2^-6 share it.
  if (a < 0x1.0p-6) {
    const auto m = static_cast<unsigned>(std::nearbyint(a * 512.0));
    return sign | static_cast<std::uint8_t>(m);  // m == 8 is the smallest normal
  }
  int e = 0;
  const double frac = std::frexp(a, &e);  // a = frac * 2^e, frac in [0.5, 1)
  int exponent = e - 1;
  auto mant = static_cast<unsigned>(std::nearbyint((frac * 2.0 - 1.0) * 8.0));
  if (mant == 8) {
    mant = 0;
    ++exponent;
  }
  const unsigned code = (static_cast<unsigned>(exponent + 7) << 3) | mant;
  return sign | static_cast<std::uint8_t>(std::min(code, 0x7Eu));
}

Bytes to_bf16(std::span<const float> values) {
  Bytes out(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint16_t b = float_to_bf16(values[i]);
    out[2 * i] = static_cast<std::uint8_t>(b);
    out[2 * i + 1] = static_cast<std::uint8_t>(b >> 8);
  }
  return out;
}

Bytes to_e4m3(std::span<const float> values) {
  Bytes out(values.size());
  std::transform(values.begin(), values.end(), out.begin(), float_to_e4m3);
  return out;
}

namespace {

constexpr double kE2M1Magnitudes[8] = {0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0};

std::uint8_t nearest_e2m1(double x) {
  const double a = std::min(std::fabs(x), 6.0);
  int best = 0;
  for (int k = 1; k < 8; ++k) {
    const double d = std::fabs(a - kE2M1Magnitudes[k]);
    const double d_best = std::fabs(a - kE2M1Magnitudes[best]);
    // Ties go to the even code.
    if (d < d_best || (d == d_best && (k & 1) == 0)) best = k;
  }
  const std::uint8_t sign = (x < 0 && best != 0) ? 0x08 : 0x00;
  return sign | static_cast<std::uint8_t>(best);
}

}  // namespace

Fp4Tensor quantize_fp4(std::span<const float> values, const Fp4Layout& layout) {
  Fp4Tensor t;
  t.layout = layout;
  t.element_count = values.size();
  t.nibbles.assign(Fp4Tensor::nibble_bytes(values.size()), 0);
  t.scales.reserve(Fp4Tensor::scale_count(values.size(), layout));
  for (std::size_t begin = 0; begin < values.size(); begin += layout.block_size) {
    const std::size_t end = std::min(values.size(), begin + layout.block_size);
    double amax = 0.0;
    for (std::size_t i = begin; i < end; ++i) amax = std::max(amax, std::fabs(double{values[i]}));
    double scale = 1.0;
    if (layout.scheme == Fp4Scheme::kMXFP4) {
      // Shared exponent floor(log2 amax) minus the E2M1 max exponent (2).
      int exponent = 0;
      if (amax > 0.0) {
        int e = 0;
        std::frexp(amax, &e);
        exponent = std::clamp(e - 1 - 2, -127, 127);
      }
      scale = std::ldexp(1.0, exponent);
      t.scales.push_back(static_cast<std::uint8_t>(exponent + 127));
    } else {
      const std::uint8_t code = float_to_e4m3(static_cast<float>(amax / 6.0));
      scale = decode_value(code, kFP8E4M3);
      t.scales.push_back(code);
    }
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint8_t q = scale > 0.0 ? nearest_e2m1(values[i] / scale) : 0;
      t.nibbles[i / 2] |= static_cast<std::uint8_t>(q << ((i & 1) ? 0 : 4));
    }
  }
  return t;
}

Bytes gaussian_tensor(const FloatFormat& format, std::size_t elements, double sigma, Rng& rng) {
  const std::vector<float> values = gaussian(elements, sigma, rng);
  if (format.id == FormatId::kBF16) return to_bf16(values);
  if (format.id == FormatId::kFP8E4M3) return to_e4m3(values);
  throw InvalidInputError(std::string("no gaussian generator for ") + std::string(format.name));
}

std::optional<KvWorkload> parse_kv_workload(std::string_view text) {
  if (text == "gaussian") return KvWorkload{KvWorkload::Kind::kGaussian, 0};
  if (text == "uniform") return KvWorkload{KvWorkload::Kind::kUniform, 0};
  constexpr std::string_view kShift = "shift:";
  if (text.starts_with(kShift)) {
    const std::string_view digits = text.substr(kShift.size());
    std::size_t step = 0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), step);
    if (ec == std::errc{} && end == digits.data() + digits.size() && !digits.empty()) {
      return KvWorkload{KvWorkload::Kind::kShift, step};
    }
  }
  return std::nullopt;
}

Bytes kv_calibration_tensor(const FloatFormat& format, std::size_t elements, Rng& rng) {
  return gaussian_tensor(format, elements, kKvSigma, rng);
}

Bytes kv_step_tensor(const FloatFormat& format, const KvWorkload& workload, std::size_t step,
                     std::size_t elements, Rng& rng) {
  switch (workload.kind) {
    case KvWorkload::Kind::kGaussian: return gaussian_tensor(format, elements, kKvSigma, rng);
    case KvWorkload::Kind::kShift:
      return gaussian_tensor(format, elements,
                             step < workload.shift_step ? kKvSigma : kKvShiftedSigma, rng);
    case KvWorkload::Kind::kUniform: return uniform_bytes(elements * format.element_bytes(), rng);
  }
  return {};
}

}  // namespace ztnc::synth
