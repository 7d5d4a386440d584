#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <random>
#include <span>
#include <vector>

#include "ztnc/bytes.hpp"
#include "ztnc/fp4.hpp"

// Synthetic tensor sources and reference quantizers for benchmarks and test
// corpora. The generators avoid std::normal_distribution so a seed gives the
// same data on every standard library.
namespace ztnc::synth {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }
  double normal(double sigma);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::vector<float> gaussian(std::size_t n, double sigma, Rng& rng);
Bytes uniform_bytes(std::size_t n, Rng& rng);

// Round to nearest even.
std::uint16_t float_to_bf16(float value);
// Round to nearest even, saturating at +-448; NaN maps to 0x7F.
std::uint8_t float_to_e4m3(float value);

Bytes to_bf16(std::span<const float> values);
Bytes to_e4m3(std::span<const float> values);

// Per-block absmax quantization to E2M1 with an E8M0 (MXFP4) or E4M3
// (NVFP4) scale per block.
Fp4Tensor quantize_fp4(std::span<const float> values, const Fp4Layout& layout);

// Gaussian tensor in a BF16 or FP8 E4M3 element format.
Bytes gaussian_tensor(const FloatFormat& format, std::size_t elements, double sigma, Rng& rng);

// Synthetic K/V step sources for benchmarking sessions.
inline constexpr double kKvSigma = 0.02;
inline constexpr double kKvShiftedSigma = 1.28;

struct KvWorkload {
  enum class Kind { kGaussian, kShift, kUniform };
  Kind kind = Kind::kGaussian;
  // First step drawn from the shifted distribution (kShift only).
  std::size_t shift_step = 0;
};

// "gaussian", "shift:K", or "uniform".
std::optional<KvWorkload> parse_kv_workload(std::string_view text);

// Calibration tensors are always N(0, kKvSigma). Steps follow the workload:
// gaussian stays there, shift:K moves to N(0, kKvShiftedSigma) from step K,
// uniform emits uniformly random bytes.
Bytes kv_calibration_tensor(const FloatFormat& format, std::size_t elements, Rng& rng);
Bytes kv_step_tensor(const FloatFormat& format, const KvWorkload& workload, std::size_t step,
                     std::size_t elements, Rng& rng);

}  // namespace ztnc::synth
