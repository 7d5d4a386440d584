#include <gtest/gtest.h>

#include <numeric>

#include "oracle.hpp"
#include "ztnc/error.hpp"
#include "ztnc/kvcache.hpp"
#include "ztnc/synth.hpp"

using namespace ztnc;

namespace {

constexpr std::size_t kElements = 4096;

KvSession calibrated(const FloatFormat& f, synth::Rng& rng, KvConfig config = {},
                     std::size_t tensors = 4) {
  std::vector<Bytes> cal;
  for (std::size_t i = 0; i < tensors; ++i) cal.push_back(synth::kv_calibration_tensor(f, kElements, rng));
  return KvSession::open(f, {cal.begin(), cal.end()}, config);
}

TEST(KvSession, OpenRejectsEmptyCalibrationAndFp4) {
  EXPECT_THROW(KvSession::open(kBF16, {}), InvalidInputError);
  const Bytes one(64, 0);
  EXPECT_THROW(KvSession::open(kFP4E2M1, {ByteView(one)}), InvalidInputError);
}

TEST(KvSession, SingleTensorCalibrationIsEnough) {
  synth::Rng rng(1);
  KvSession s = calibrated(kBF16, rng, {}, 1);
  const Bytes t = synth::kv_calibration_tensor(kBF16, kElements, rng);
  const StepResult r = s.compress_step(t);
  EXPECT_EQ(s.decompress_step(r.frame), t);
}

TEST(KvSession, ZeroCalibrationFavorsZeroExponent) {
  const Bytes zeros(2 * 1024, 0);
  const KvSession s = KvSession::open(kBF16, {ByteView(zeros)});
  const Codebook& cb = s.codebook(StreamKind::kExponent);
  EXPECT_GE(cb.length(0x00), 1);
  EXPECT_LE(cb.length(0x00), 2);
  // Add-one smoothing leaves every symbol encodable.
  for (int sym = 0; sym < 256; ++sym) EXPECT_NE(cb.length(static_cast<std::uint8_t>(sym)), 0);
}

TEST(KvSession, StationaryStepsTrackBaseline) {
  synth::Rng rng(2);
  KvSession s = calibrated(kBF16, rng);
  const std::size_t builds = s.codebook_builds();
  for (int i = 0; i < 50; ++i) {
    const Bytes t = synth::kv_calibration_tensor(kBF16, kElements, rng);
    const StepResult r = s.compress_step(t);
    EXPECT_NEAR(r.ratio, s.baseline_ratio(), 0.05);
    EXPECT_EQ(s.maybe_rebuild(), RebuildDecision::kKept);
  }
  // Static dictionaries: nothing rebuilt on the hot path.
  EXPECT_EQ(s.codebook_builds(), builds);
}

TEST(KvSession, StepRatioIsFrameOverOriginal) {
  synth::Rng rng(3);
  KvSession s = calibrated(kFP8E4M3, rng);
  const Bytes t = synth::kv_calibration_tensor(kFP8E4M3, 1001, rng);
  const StepResult r = s.compress_step(t);
  EXPECT_DOUBLE_EQ(r.ratio, static_cast<double>(r.frame.size()) / static_cast<double>(t.size()));
  EXPECT_EQ(s.decompress_step(r.frame), t);
}

TEST(KvSession, WindowNotFullKeepsDictionary) {
  synth::Rng rng(4);
  KvConfig cfg;
  cfg.window = 8;
  KvSession s = calibrated(kBF16, rng, cfg);
  for (int i = 0; i < 7; ++i) {
    s.compress_step(synth::uniform_bytes(2 * kElements, rng));
    EXPECT_EQ(s.maybe_rebuild(), RebuildDecision::kKept);
  }
  s.compress_step(synth::uniform_bytes(2 * kElements, rng));
  EXPECT_EQ(s.maybe_rebuild(), RebuildDecision::kRebuilt);
  EXPECT_EQ(s.generation(), 1u);
}

TEST(KvSession, UniformBytesStayNearRaw) {
  synth::Rng rng(5);
  KvSession s = calibrated(kBF16, rng);
  for (int i = 0; i < 5; ++i) {
    const Bytes t = synth::uniform_bytes(2 * kElements, rng);
    const StepResult r = s.compress_step(t);
    // Per-stream raw fallback caps expansion at the step header.
    EXPECT_LE(r.ratio, 1.01);
    EXPECT_GT(r.ratio, s.baseline_ratio() + 0.05);
    EXPECT_EQ(s.decompress_step(r.frame), t);
  }
}

TEST(KvSession, OldFramesDecodeAfterRebuild) {
  synth::Rng rng(6);
  KvConfig cfg;
  cfg.window = 4;
  KvSession s = calibrated(kBF16, rng, cfg);
  std::vector<std::pair<Bytes, Bytes>> frames;
  const synth::KvWorkload shift{synth::KvWorkload::Kind::kShift, 5};
  for (std::size_t i = 0; i < 30; ++i) {
    Bytes t = synth::kv_step_tensor(kBF16, shift, i, kElements, rng);
    frames.emplace_back(s.compress_step(t).frame, t);
    s.maybe_rebuild();
  }
  EXPECT_GE(s.generation(), 1u);
  for (const auto& [frame, t] : frames) EXPECT_EQ(s.decompress_step(frame), t);
  std::vector<Bytes> originals;
  for (const auto& f : frames) originals.push_back(f.second);
  EXPECT_EQ(decode_session_stream(s.stream()), originals);
}

TEST(KvSession, CorruptStreamRejected) {
  synth::Rng rng(7);
  KvSession s = calibrated(kFP8E4M3, rng);
  s.compress_step(synth::kv_calibration_tensor(kFP8E4M3, kElements, rng));
  Bytes stream = s.stream();
  EXPECT_THROW(decode_session_stream(ByteView(stream.data(), stream.size() - 1)), CorruptError);
  stream[0] = 'Q';
  EXPECT_THROW(decode_session_stream(stream), CorruptError);
}

TEST(KvSession, Fp8MantissaStoredRaw) {
  synth::Rng rng(8);
  const KvSession s = calibrated(kFP8E4M3, rng);
  EXPECT_TRUE(s.stream_coded(StreamKind::kExponent));
  EXPECT_FALSE(s.stream_coded(StreamKind::kSignMantissa));
}

TEST(KvWorkload, Parse) {
  EXPECT_EQ(synth::parse_kv_workload("shift:100")->shift_step, 100u);
  EXPECT_EQ(synth::parse_kv_workload("uniform")->kind, synth::KvWorkload::Kind::kUniform);
  EXPECT_FALSE(synth::parse_kv_workload("shift:").has_value());
  EXPECT_FALSE(synth::parse_kv_workload("laplace").has_value());
}

}  // namespace
