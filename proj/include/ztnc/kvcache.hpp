#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "ztnc/bytes.hpp"
#include "ztnc/entropy.hpp"
#include "ztnc/format.hpp"
#include "ztnc/report.hpp"

namespace ztnc {

struct KvConfig {
  // Step ratios averaged before the rebuild rule may fire.
  std::size_t window = 32;
  // Rebuild when the window mean exceeds the baseline by more than this.
  double rebuild_threshold = 0.05;
  // Entropy-code the sign+mantissa stream. Unset: BF16 sessions decide from
  // the calibration data, FP8 sessions store it raw.
  std::optional<bool> code_mantissa;
};

enum class RebuildDecision { kKept, kRebuilt };

struct StepResult {
  Bytes frame;
  // frame.size() / original bytes, header included.
  double ratio = 0.0;
  std::uint32_t step = 0;
  std::uint32_t generation = 0;
  // Stored bytes / original bytes per stream: exponent, sign+mantissa.
  std::array<double, 2> stream_ratios{};
};

// Streaming compressor for the K/V tensors of one layer (or any other unit
// the caller chooses). Steps are coded with static codebooks built from
// calibration data; when the realized ratio drifts above the baseline the
// codebooks are rebuilt from recent steps.
//
// Session stream: "ZTKV" | version u16 | format u8, followed by records.
//   codebook record  'G' | generation u32 |
//                    per stream: coded u8 | codebook_len u16 | codebook
//   step record      'S' | step u32 | generation u32 | orig_len u32 |
//                    modes u8 | comp_len u32 x 2 | payloads
// modes bit k set means stream k of this step is Huffman coded.
class KvSession {
 public:
  static KvSession open(const FloatFormat& format, const std::vector<ByteView>& calibration,
                        const KvConfig& config = {});

  StepResult compress_step(ByteView tensor);
  // Call after each compress_step.
  RebuildDecision maybe_rebuild();

  // Decodes a frame produced by this session, any generation.
  Bytes decompress_step(ByteView frame) const;

  // Session header plus every record emitted so far.
  const Bytes& stream() const noexcept { return log_; }

  const FloatFormat& format() const noexcept { return format_; }
  double baseline_ratio() const noexcept { return baseline_; }
  std::size_t steps_encoded() const noexcept { return steps_; }
  std::uint32_t generation() const noexcept;
  // Number of codebooks constructed so far, for asserting the static path.
  std::size_t codebook_builds() const noexcept { return codebook_builds_; }
  std::vector<double> ratio_window() const;
  const Codebook& codebook(StreamKind kind) const;
  bool stream_coded(StreamKind kind) const;

  struct Generation;

 private:
  KvSession(const FloatFormat& format, const KvConfig& config);

  struct StepStats {
    std::array<Histogram, 2> histograms;
    std::uint64_t original_bytes = 0;
  };

  void install(const std::array<Histogram, 2>& pooled, const std::vector<StepStats>& sample);
  double predicted_ratio(const StepStats& stats) const;

  FloatFormat format_;
  KvConfig config_;
  std::vector<std::shared_ptr<const Generation>> generations_;
  double baseline_ = 0.0;
  std::size_t steps_ = 0;
  std::size_t codebook_builds_ = 0;
  // Ring buffers over the last `window` steps.
  std::vector<double> ratios_;
  std::vector<StepStats> stats_;
  std::size_t ring_next_ = 0;
  Bytes log_;
};

// Offline replay of a session stream: every step tensor, in order.
std::vector<Bytes> decode_session_stream(ByteView stream);

}  // namespace ztnc
