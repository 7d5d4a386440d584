#include "ztnc/kvcache.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <string>

#include "ztnc/error.hpp"

namespace ztnc {

namespace {

constexpr char kMagic[4] = {'Z', 'T', 'K', 'V'};
constexpr std::uint16_t kSessionVersion = 1;
constexpr std::uint8_t kCodebookRecord = 'G';
constexpr std::uint8_t kStepRecord = 'S';
constexpr std::size_t kStepHeaderBytes = 1 + 4 + 4 + 4 + 1 + 4 + 4;

std::array<Histogram, 2> smoothed(std::array<Histogram, 2> h) {
  for (Histogram& s : h) {
    for (std::uint64_t& c : s.counts) ++c;
    s.total += 256;
  }
  return h;
}

std::size_t slot_of(StreamKind kind) {
  if (kind == StreamKind::kExponent) return 0;
  if (kind == StreamKind::kSignMantissa) return 1;
  throw InvalidInputError(std::string("kv sessions have no ") + to_string(kind) + " stream");
}

}  // namespace

struct KvSession::Generation {
  std::uint32_t id = 0;
  std::array<Codebook, 2> codebooks;
  std::array<bool, 2> coded{};
  std::array<std::unique_ptr<Decoder>, 2> decoders;

  void write(ByteWriter& w) const {
    w.u8(kCodebookRecord);
    w.u32(id);
    for (std::size_t k = 0; k < 2; ++k) {
      w.u8(coded[k] ? 1 : 0);
      const Bytes cb = coded[k] ? serialize_codebook(codebooks[k]) : Bytes{};
      w.u16(static_cast<std::uint16_t>(cb.size()));
      w.bytes(cb);
    }
  }

  static Generation read(ByteReader& r) {
    Generation g;
    g.id = r.u32();
    for (std::size_t k = 0; k < 2; ++k) {
      const std::uint8_t coded = r.u8();
      if (coded > 1) throw CorruptError(CorruptKind::kMalformed, "bad codebook record flag");
      g.coded[k] = coded == 1;
      const ByteView cb = r.bytes(r.u16());
      if (g.coded[k]) {
        g.codebooks[k] = deserialize_codebook(cb);
        g.decoders[k] = std::make_unique<Decoder>(g.codebooks[k]);
      } else if (!cb.empty()) {
        throw CorruptError(CorruptKind::kMalformed, "codebook bytes on a raw stream");
      }
    }
    return g;
  }
};

namespace {

using Generation = KvSession::Generation;

Bytes decode_frame(ByteView frame, const FloatFormat& format,
                   const std::function<const Generation*(std::uint32_t)>& lookup,
                   std::size_t* consumed) {
  ByteReader r(frame, "kv step record");
  if (r.u8() != kStepRecord) throw CorruptError(CorruptKind::kMalformed, "not a step record");
  const std::uint32_t step = r.u32();
  const std::uint32_t gen_id = r.u32();
  const std::uint32_t orig_len = r.u32();
  const std::uint8_t modes = r.u8();
  const std::array<std::uint32_t, 2> comp{r.u32(), r.u32()};
  const Generation* gen = lookup(gen_id);
  if (gen == nullptr) {
    throw CorruptError(CorruptKind::kMalformed,
                       "step " + std::to_string(step) + " uses unknown codebook generation " +
                           std::to_string(gen_id));
  }
  if (orig_len % format.element_bytes() != 0 || (modes & ~0x3u) != 0) {
    throw CorruptError(CorruptKind::kMalformed, "bad step header");
  }
  BitPlanes planes;
  planes.format = format;
  planes.element_count = orig_len / format.element_bytes();
  const std::size_t stream_len = plane_stream_bytes(format, planes.element_count);
  std::array<Bytes*, 2> targets{&planes.exponent_stream, &planes.sign_mantissa_stream};
  for (std::size_t k = 0; k < 2; ++k) {
    const ByteView stored = r.bytes(comp[k]);
    const bool huffman = (modes >> k) & 1u;
    if (huffman) {
      if (!gen->coded[k]) throw CorruptError(CorruptKind::kMalformed, "coded step on a raw stream");
      *targets[k] = gen->decoders[k]->decode_padded(stored, stream_len);
    } else {
      if (stored.size() != stream_len) {
        throw CorruptError(CorruptKind::kMalformed, "raw stream length mismatch");
      }
      targets[k]->assign(stored.begin(), stored.end());
    }
  }
  if (consumed != nullptr) *consumed = r.position();
  planes.pad_elements = format.id == FormatId::kBF16 ? 0 : planes.element_count & 1;
  return merge(planes);
}

}  // namespace

KvSession::KvSession(const FloatFormat& format, const KvConfig& config)
    : format_(format), config_(config) {}

KvSession KvSession::open(const FloatFormat& format, const std::vector<ByteView>& calibration,
                          const KvConfig& config) {
  if (format.id == FormatId::kFP4E2M1) throw InvalidInputError("kv sessions need bf16 or fp8");
  if (calibration.empty()) throw InvalidInputError("calibration batch is empty");
  if (config.window == 0) throw InvalidInputError("ratio window must be positive");
  KvSession session(format, config);
  ByteWriter w(session.log_);
  w.bytes(ByteView(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.u16(kSessionVersion);
  w.u8(static_cast<std::uint8_t>(format.id));

  std::vector<StepStats> sample;
  std::array<Histogram, 2> pooled;
  for (const ByteView tensor : calibration) {
    const BitPlanes planes = split(tensor, format);
    StepStats s;
    s.histograms = {histogram(planes.exponent_stream), histogram(planes.sign_mantissa_stream)};
    s.original_bytes = tensor.size();
    pooled[0] += s.histograms[0];
    pooled[1] += s.histograms[1];
    sample.push_back(std::move(s));
  }
  session.install(pooled, sample);
  return session;
}

void KvSession::install(const std::array<Histogram, 2>& pooled, const std::vector<StepStats>& sample) {
  const std::array<Histogram, 2> h = smoothed(pooled);
  auto gen = std::make_shared<Generation>();
  gen->id = static_cast<std::uint32_t>(generations_.size());
  for (std::size_t k = 0; k < 2; ++k) {
    gen->codebooks[k] = build_codebook(h[k]);
    ++codebook_builds_;
  }
  gen->coded[0] = true;
  if (config_.code_mantissa.has_value()) {
    gen->coded[1] = *config_.code_mantissa;
  } else if (format_.id == FormatId::kBF16) {
    gen->coded[1] = pooled[1].total > 0 &&
                    should_compress(pooled[1], gen->codebooks[1],
                                    serialized_codebook_size(gen->codebooks[1])) ==
                        ChunkCoding::kHuffman;
  } else {
    gen->coded[1] = false;
  }
  for (std::size_t k = 0; k < 2; ++k) {
    if (gen->coded[k]) gen->decoders[k] = std::make_unique<Decoder>(gen->codebooks[k]);
  }
  ByteWriter w(log_);
  gen->write(w);
  generations_.push_back(std::move(gen));

  double sum = 0.0;
  for (const StepStats& s : sample) sum += predicted_ratio(s);
  baseline_ = sample.empty() ? 0.0 : sum / static_cast<double>(sample.size());
  ratios_.clear();
  stats_.clear();
  ring_next_ = 0;
}

// Ratio compress_step reports for a tensor with these statistics under the
// current generation.
double KvSession::predicted_ratio(const StepStats& stats) const {
  const Generation& gen = *generations_.back();
  std::uint64_t bytes = kStepHeaderBytes;
  for (std::size_t k = 0; k < 2; ++k) {
    const std::uint64_t raw = stats.histograms[k].total;
    if (gen.coded[k] && gen.codebooks[k].covers(stats.histograms[k])) {
      bytes += std::min(raw, (gen.codebooks[k].coded_bits(stats.histograms[k]) + 7) / 8);
    } else {
      bytes += raw;
    }
  }
  return safe_ratio(bytes, stats.original_bytes);
}

std::uint32_t KvSession::generation() const noexcept { return generations_.back()->id; }

const Codebook& KvSession::codebook(StreamKind kind) const {
  return generations_.back()->codebooks[slot_of(kind)];
}

bool KvSession::stream_coded(StreamKind kind) const {
  return generations_.back()->coded[slot_of(kind)];
}

std::vector<double> KvSession::ratio_window() const {
  if (ratios_.size() < config_.window) return ratios_;
  std::vector<double> ordered;
  ordered.reserve(ratios_.size());
  for (std::size_t i = 0; i < ratios_.size(); ++i) {
    ordered.push_back(ratios_[(ring_next_ + i) % ratios_.size()]);
  }
  return ordered;
}

StepResult KvSession::compress_step(ByteView tensor) {
  const BitPlanes planes = split(tensor, format_);
  if (tensor.size() > UINT32_MAX) throw InvalidInputError("step tensor too large");
  const Generation& gen = *generations_.back();

  StepStats stats;
  stats.original_bytes = tensor.size();
  std::array<const Bytes*, 2> streams{&planes.exponent_stream, &planes.sign_mantissa_stream};
  std::array<Bytes, 2> stored;
  std::uint8_t modes = 0;
  for (std::size_t k = 0; k < 2; ++k) {
    stats.histograms[k] = histogram(*streams[k]);
    if (gen.coded[k]) {
      EncodedStream coded = encode(*streams[k], gen.codebooks[k]);
      if (coded.payload.size() < streams[k]->size()) {
        stored[k] = std::move(coded.payload);
        modes |= static_cast<std::uint8_t>(1u << k);
        continue;
      }
    }
    stored[k] = *streams[k];
  }

  StepResult result;
  result.step = static_cast<std::uint32_t>(steps_);
  result.generation = gen.id;
  ByteWriter w(result.frame);
  w.u8(kStepRecord);
  w.u32(result.step);
  w.u32(gen.id);
  w.u32(static_cast<std::uint32_t>(tensor.size()));
  w.u8(modes);
  w.u32(static_cast<std::uint32_t>(stored[0].size()));
  w.u32(static_cast<std::uint32_t>(stored[1].size()));
  w.bytes(stored[0]);
  w.bytes(stored[1]);
  result.ratio = safe_ratio(result.frame.size(), tensor.size());
  for (std::size_t k = 0; k < 2; ++k) {
    result.stream_ratios[k] = safe_ratio(stored[k].size(), streams[k]->size());
  }
  log_.insert(log_.end(), result.frame.begin(), result.frame.end());

  if (ratios_.size() < config_.window) {
    ratios_.push_back(result.ratio);
    stats_.push_back(std::move(stats));
  } else {
    ratios_[ring_next_] = result.ratio;
    stats_[ring_next_] = std::move(stats);
  }
  ring_next_ = (ring_next_ + 1) % config_.window;
  ++steps_;
  return result;
}

RebuildDecision KvSession::maybe_rebuild() {
  if (ratios_.size() < config_.window) return RebuildDecision::kKept;
  const double mean =
      std::accumulate(ratios_.begin(), ratios_.end(), 0.0) / static_cast<double>(ratios_.size());
  if (mean <= baseline_ + config_.rebuild_threshold) return RebuildDecision::kKept;
  std::array<Histogram, 2> pooled;
  for (const StepStats& s : stats_) {
    pooled[0] += s.histograms[0];
    pooled[1] += s.histograms[1];
  }
  const std::vector<StepStats> sample = std::move(stats_);
  install(pooled, sample);
  return RebuildDecision::kRebuilt;
}

Bytes KvSession::decompress_step(ByteView frame) const {
  auto lookup = [this](std::uint32_t id) -> const Generation* {
    return id < generations_.size() ? generations_[id].get() : nullptr;
  };
  std::size_t consumed = 0;
  Bytes out = decode_frame(frame, format_, lookup, &consumed);
  if (consumed != frame.size()) throw CorruptError(CorruptKind::kMalformed, "trailing bytes after step");
  return out;
}

std::vector<Bytes> decode_session_stream(ByteView stream) {
  if (stream.size() < 4 || !std::equal(kMagic, kMagic + 4, stream.begin())) {
    throw CorruptError(CorruptKind::kBadMagic, "not a kv session stream");
  }
  ByteReader r(stream.subspan(4), "kv session header");
  const std::uint16_t version = r.u16();
  if (version != kSessionVersion) {
    throw CorruptError(CorruptKind::kBadVersion, "kv session version " + std::to_string(version));
  }
  const std::uint8_t format_id = r.u8();
  if (format_id > static_cast<std::uint8_t>(FormatId::kFP8E5M2)) {
    throw CorruptError(CorruptKind::kMalformed, "unknown kv session format");
  }
  const FloatFormat& format = format_of(static_cast<FormatId>(format_id));

  std::vector<std::unique_ptr<Generation>> generations;
  auto lookup = [&](std::uint32_t id) -> const Generation* {
    return id < generations.size() ? generations[id].get() : nullptr;
  };
  std::vector<Bytes> steps;
  std::size_t pos = 4 + r.position();
  while (pos < stream.size()) {
    const ByteView rest = stream.subspan(pos);
    if (rest[0] == kCodebookRecord) {
      ByteReader rec(rest.subspan(1), "kv codebook record");
      auto gen = std::make_unique<Generation>(Generation::read(rec));
      if (gen->id != generations.size()) {
        throw CorruptError(CorruptKind::kMalformed, "codebook generations out of order");
      }
      generations.push_back(std::move(gen));
      pos += 1 + rec.position();
    } else if (rest[0] == kStepRecord) {
      std::size_t consumed = 0;
      steps.push_back(decode_frame(rest, format, lookup, &consumed));
      pos += consumed;
    } else {
      throw CorruptError(CorruptKind::kMalformed, "unknown kv record tag");
    }
  }
  return steps;
}

}  // namespace ztnc
