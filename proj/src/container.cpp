#include "ztnc/container.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "ztnc/checksum.hpp"
#include "ztnc/error.hpp"
#include "ztnc/parallel.hpp"

namespace ztnc {

namespace {

constexpr char kMagic[4] = {'Z', 'T', 'N', 'C'};

std::size_t chunk_count(std::uint64_t len, std::uint32_t chunk_size) {
  return static_cast<std::size_t>((len + chunk_size - 1) / chunk_size);
}

struct ChunkJob {
  std::size_t stream;
  std::size_t chunk;
  ByteView data;
  bool force_raw;
};

struct ChunkOutput {
  ChunkEntry entry;
  Bytes stored;  // codebook followed by payload, or the raw bytes
  Histogram histogram;
};

// Histogram, codebook, and coding decision for one chunk. Shared by the
// writer and the profiler so their sizes agree exactly.
struct ChunkPlan {
  Histogram histogram;
  Codebook codebook;
  ChunkEntry entry;
};

ChunkPlan plan_chunk(const ChunkJob& job) {
  ChunkPlan plan;
  plan.histogram = histogram(job.data);
  plan.entry.orig_len = static_cast<std::uint32_t>(job.data.size());
  plan.entry.coding = ChunkCoding::kRaw;
  plan.entry.comp_len = plan.entry.orig_len;
  if (!job.force_raw) {
    plan.codebook = build_codebook(plan.histogram);
    const std::size_t cb_size = serialized_codebook_size(plan.codebook);
    if (should_compress(plan.histogram, plan.codebook, cb_size) == ChunkCoding::kHuffman) {
      plan.entry.coding = ChunkCoding::kHuffman;
      plan.entry.codebook_len = static_cast<std::uint16_t>(cb_size);
      plan.entry.comp_len =
          static_cast<std::uint32_t>((plan.codebook.coded_bits(plan.histogram) + 7) / 8);
    }
  }
  return plan;
}

ChunkOutput encode_chunk(const ChunkJob& job) {
  ChunkPlan plan = plan_chunk(job);
  ChunkOutput out;
  out.entry = plan.entry;
  out.entry.crc = crc32(job.data);
  out.histogram = plan.histogram;
  if (plan.entry.coding == ChunkCoding::kHuffman) {
    out.stored = serialize_codebook(plan.codebook);
    const EncodedStream coded = encode(job.data, plan.codebook);
    out.stored.insert(out.stored.end(), coded.payload.begin(), coded.payload.end());
  } else {
    out.stored.assign(job.data.begin(), job.data.end());
  }
  return out;
}

std::vector<ChunkJob> chunk_jobs(const std::vector<StreamInput>& streams, std::uint32_t chunk_size,
                                 std::vector<std::size_t>& first_job) {
  std::vector<ChunkJob> jobs;
  first_job.assign(streams.size() + 1, 0);
  for (std::size_t s = 0; s < streams.size(); ++s) {
    first_job[s] = jobs.size();
    const ByteView data = streams[s].data;
    for (std::size_t c = 0; c < chunk_count(data.size(), chunk_size); ++c) {
      const std::size_t begin = c * chunk_size;
      const std::size_t len = std::min<std::size_t>(chunk_size, data.size() - begin);
      jobs.push_back({s, c, data.subspan(begin, len), streams[s].force_raw});
    }
  }
  first_job[streams.size()] = jobs.size();
  return jobs;
}

std::uint64_t directory_bytes(const std::vector<StreamInput>& streams, std::uint32_t chunk_size) {
  std::uint64_t n = kHeaderBytes;
  for (const StreamInput& s : streams) {
    n += kStreamHeaderBytes + kChunkEntryBytes * chunk_count(s.data.size(), chunk_size);
  }
  return n;
}

void finish_stream_report(StreamReport& sr, const Histogram& h) {
  sr.ratio = safe_ratio(sr.compressed_bytes, sr.original_bytes);
  sr.entropy_bits = h.total == 0 ? 0.0 : entropy_bits_per_symbol(h);
  sr.top_symbols = top_symbols(h);
}

bool known_format(std::uint8_t v) { return v <= static_cast<std::uint8_t>(PayloadFormat::kRaw); }
bool known_kind(std::uint8_t v) { return v <= static_cast<std::uint8_t>(StreamKind::kRawBytes); }

Bytes decode_chunk_at(ByteView container, const StreamDirectory& dir, std::size_t chunk) {
  const ChunkEntry& e = dir.chunks[chunk];
  const std::uint64_t offset = dir.chunk_offsets[chunk];
  const ByteView stored = container.subspan(offset, std::size_t{e.codebook_len} + e.comp_len);
  const std::string name = to_string(dir.kind);
  Bytes out;
  try {
    if (e.coding == ChunkCoding::kRaw) {
      out.assign(stored.begin(), stored.end());
    } else {
      const Codebook cb = deserialize_codebook(stored.first(e.codebook_len));
      out = Decoder(cb).decode_padded(stored.subspan(e.codebook_len), e.orig_len);
    }
  } catch (const CorruptError& err) {
    throw CorruptError(err.kind(), err.what(), name, chunk);
  }
  if (crc32(out) != e.crc) {
    throw CorruptError(CorruptKind::kChecksum, "chunk CRC-32 does not match", name, chunk);
  }
  return out;
}

void decode_streams(ByteView container, const ContainerInfo& info,
                    const std::vector<std::size_t>& which, std::vector<Bytes>& out,
                    unsigned threads) {
  struct Job {
    std::size_t slot;
    std::size_t chunk;
  };
  std::vector<Job> jobs;
  out.assign(which.size(), {});
  for (std::size_t slot = 0; slot < which.size(); ++slot) {
    const StreamDirectory& dir = info.streams[which[slot]];
    out[slot].resize(dir.original_len);
    for (std::size_t c = 0; c < dir.chunks.size(); ++c) jobs.push_back({slot, c});
  }
  const std::uint32_t chunk_size = info.header.chunk_size;
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const Job& job = jobs[j];
    const StreamDirectory& dir = info.streams[which[job.slot]];
    const Bytes chunk = decode_chunk_at(container, dir, job.chunk);
    std::memcpy(out[job.slot].data() + job.chunk * std::size_t{chunk_size}, chunk.data(),
                chunk.size());
  });
}

}  // namespace

const char* to_string(PayloadFormat f) noexcept {
  switch (f) {
    case PayloadFormat::kBF16: return "bf16";
    case PayloadFormat::kFP8E4M3: return "fp8-e4m3";
    case PayloadFormat::kFP8E5M2: return "fp8-e5m2";
    case PayloadFormat::kMXFP4: return "mxfp4";
    case PayloadFormat::kNVFP4: return "nvfp4";
    case PayloadFormat::kRaw: return "raw";
  }
  return "unknown";
}

PayloadFormat payload_format_of(const FloatFormat& f) {
  switch (f.id) {
    case FormatId::kBF16: return PayloadFormat::kBF16;
    case FormatId::kFP8E4M3: return PayloadFormat::kFP8E4M3;
    case FormatId::kFP8E5M2: return PayloadFormat::kFP8E5M2;
    case FormatId::kFP4E2M1: break;
  }
  throw InvalidInputError("fp4 tensors need a block-scaling scheme (mxfp4 or nvfp4)");
}

const StreamDirectory& ContainerInfo::stream(StreamKind kind) const {
  return streams[stream_index(kind)];
}

std::size_t ContainerInfo::stream_index(StreamKind kind) const {
  for (std::size_t i = 0; i < streams.size(); ++i) {
    if (streams[i].kind == kind) return i;
  }
  throw InvalidInputError(std::string("container has no ") + to_string(kind) + " stream");
}

CompressResult write_container(const ContainerHeader& header, const std::vector<StreamInput>& streams,
                               const ContainerOptions& options) {
  if (header.chunk_size == 0) throw InvalidInputError("chunk size must be positive");
  if (streams.size() > 255) throw InvalidInputError("too many streams");

  std::vector<std::size_t> first_job;
  const std::vector<ChunkJob> jobs = chunk_jobs(streams, header.chunk_size, first_job);

  std::vector<ChunkOutput> outputs(jobs.size());
  parallel_for(jobs.size(), options.threads,
               [&](std::size_t i) { outputs[i] = encode_chunk(jobs[i]); });

  CompressResult result;
  Bytes& out = result.container;
  ByteWriter w(out);
  w.bytes(ByteView(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.u16(kContainerVersion);
  w.u8(static_cast<std::uint8_t>(header.format));
  w.u8(header.flags);
  w.u32(header.chunk_size);
  w.u8(static_cast<std::uint8_t>(streams.size()));
  w.u64(header.element_count);
  w.u32(header.aux);
  for (std::size_t s = 0; s < streams.size(); ++s) {
    w.u8(static_cast<std::uint8_t>(streams[s].kind));
    w.u64(streams[s].data.size());
    for (std::size_t j = first_job[s]; j < first_job[s + 1]; ++j) {
      const ChunkEntry& e = outputs[j].entry;
      w.u8(static_cast<std::uint8_t>(e.coding));
      w.u16(e.codebook_len);
      w.u32(e.comp_len);
      w.u32(e.orig_len);
      w.u32(e.crc);
    }
  }
  CompressionReport& report = result.report;
  report.format = to_string(header.format);
  report.element_count = header.element_count;
  report.overhead_bytes = out.size();
  for (std::size_t s = 0; s < streams.size(); ++s) {
    StreamReport sr;
    sr.kind = streams[s].kind;
    sr.original_bytes = streams[s].data.size();
    Histogram h;
    for (std::size_t j = first_job[s]; j < first_job[s + 1]; ++j) {
      const ChunkOutput& c = outputs[j];
      w.bytes(c.stored);
      sr.compressed_bytes += c.stored.size();
      h += c.histogram;
      ++sr.chunks;
      if (c.entry.coding == ChunkCoding::kHuffman) ++sr.huffman_chunks;
    }
    finish_stream_report(sr, h);
    report.streams.push_back(std::move(sr));
  }
  report.compressed_bytes = out.size();
  return result;
}

CompressionReport profile_container(const ContainerHeader& header,
                                    const std::vector<StreamInput>& streams,
                                    const ContainerOptions& options) {
  if (header.chunk_size == 0) throw InvalidInputError("chunk size must be positive");
  std::vector<std::size_t> first_job;
  const std::vector<ChunkJob> jobs = chunk_jobs(streams, header.chunk_size, first_job);
  std::vector<ChunkPlan> plans(jobs.size());
  parallel_for(jobs.size(), options.threads, [&](std::size_t i) { plans[i] = plan_chunk(jobs[i]); });

  CompressionReport report;
  report.format = to_string(header.format);
  report.element_count = header.element_count;
  report.overhead_bytes = directory_bytes(streams, header.chunk_size);
  report.compressed_bytes = report.overhead_bytes;
  for (std::size_t s = 0; s < streams.size(); ++s) {
    StreamReport sr;
    sr.kind = streams[s].kind;
    sr.original_bytes = streams[s].data.size();
    Histogram h;
    for (std::size_t j = first_job[s]; j < first_job[s + 1]; ++j) {
      const ChunkEntry& e = plans[j].entry;
      sr.compressed_bytes += std::uint64_t{e.codebook_len} + e.comp_len;
      h += plans[j].histogram;
      ++sr.chunks;
      if (e.coding == ChunkCoding::kHuffman) ++sr.huffman_chunks;
    }
    finish_stream_report(sr, h);
    report.compressed_bytes += sr.compressed_bytes;
    report.streams.push_back(std::move(sr));
  }
  return report;
}

ContainerInfo inspect_container(ByteView container) {
  if (container.size() < 4) {
    if (!std::equal(container.begin(), container.end(), kMagic)) {
      throw CorruptError(CorruptKind::kBadMagic, "not a ZTNC container");
    }
    throw CorruptError(CorruptKind::kTruncated, "container header cut short");
  }
  if (!std::equal(kMagic, kMagic + 4, container.begin())) {
    throw CorruptError(CorruptKind::kBadMagic, "not a ZTNC container");
  }
  ByteReader r(container.subspan(4), "container header");
  const std::uint16_t version = r.u16();
  if (version != kContainerVersion) {
    throw CorruptError(CorruptKind::kBadVersion, "container version " + std::to_string(version));
  }
  ContainerInfo info;
  const std::uint8_t format = r.u8();
  if (!known_format(format)) {
    throw CorruptError(CorruptKind::kMalformed, "unknown payload format " + std::to_string(format));
  }
  info.header.format = static_cast<PayloadFormat>(format);
  info.header.flags = r.u8();
  info.header.chunk_size = r.u32();
  if (info.header.chunk_size == 0) throw CorruptError(CorruptKind::kMalformed, "zero chunk size");
  const std::size_t stream_count = r.u8();
  info.header.element_count = r.u64();
  info.header.aux = r.u32();

  const std::uint32_t chunk_size = info.header.chunk_size;
  std::uint64_t payload_bytes = 0;
  for (std::size_t s = 0; s < stream_count; ++s) {
    StreamDirectory dir;
    const std::uint8_t kind = r.u8();
    if (!known_kind(kind)) {
      throw CorruptError(CorruptKind::kMalformed, "unknown stream kind " + std::to_string(kind));
    }
    dir.kind = static_cast<StreamKind>(kind);
    dir.original_len = r.u64();
    const std::uint64_t chunks = (dir.original_len + chunk_size - 1) / chunk_size;
    if (chunks > r.remaining() / kChunkEntryBytes) {
      throw CorruptError(CorruptKind::kTruncated, "stream directory cut short");
    }
    dir.chunks.resize(static_cast<std::size_t>(chunks));
    for (std::size_t c = 0; c < dir.chunks.size(); ++c) {
      ChunkEntry& e = dir.chunks[c];
      const std::uint8_t coding = r.u8();
      if (coding > 1) {
        throw CorruptError(CorruptKind::kMalformed, "unknown chunk coding", to_string(dir.kind), c);
      }
      e.coding = static_cast<ChunkCoding>(coding);
      e.codebook_len = r.u16();
      e.comp_len = r.u32();
      e.orig_len = r.u32();
      e.crc = r.u32();
      const std::uint64_t expect =
          c + 1 < dir.chunks.size() ? chunk_size : dir.original_len - c * std::uint64_t{chunk_size};
      if (e.orig_len != expect) {
        throw CorruptError(CorruptKind::kMalformed, "chunk length disagrees with chunk size",
                           to_string(dir.kind), c);
      }
      if (e.coding == ChunkCoding::kRaw && (e.codebook_len != 0 || e.comp_len != e.orig_len)) {
        throw CorruptError(CorruptKind::kMalformed, "raw chunk with coded lengths",
                           to_string(dir.kind), c);
      }
      payload_bytes += std::uint64_t{e.codebook_len} + e.comp_len;
    }
    info.streams.push_back(std::move(dir));
  }
  std::uint64_t offset = 4 + r.position();
  const std::uint64_t end = offset + payload_bytes;
  if (end > container.size()) {
    throw CorruptError(CorruptKind::kTruncated, "payloads need " + std::to_string(end) +
                                                    " bytes, container has " +
                                                    std::to_string(container.size()));
  }
  if (end < container.size()) {
    throw CorruptError(CorruptKind::kMalformed, "trailing bytes after the last payload");
  }
  for (StreamDirectory& dir : info.streams) {
    dir.chunk_offsets.reserve(dir.chunks.size());
    for (const ChunkEntry& e : dir.chunks) {
      dir.chunk_offsets.push_back(offset);
      offset += std::uint64_t{e.codebook_len} + e.comp_len;
    }
  }
  return info;
}

CompressResult compress_tensor(ByteView raw, const FloatFormat& format,
                               const ContainerOptions& options) {
  const BitPlanes planes = split(raw, format);
  ContainerHeader header;
  header.format = payload_format_of(format);
  header.chunk_size = options.chunk_size;
  header.element_count = planes.element_count;
  CompressResult result = write_container(
      header,
      {{StreamKind::kExponent, planes.exponent_stream}, {StreamKind::kSignMantissa, planes.sign_mantissa_stream}},
      options);
  result.report.original_bytes = raw.size();
  result.report.total_ratio = safe_ratio(result.report.compressed_bytes, raw.size());
  return result;
}

CompressResult compress_bytes(ByteView raw, const ContainerOptions& options) {
  ContainerHeader header;
  header.format = PayloadFormat::kRaw;
  header.chunk_size = options.chunk_size;
  header.element_count = raw.size();
  CompressResult result = write_container(header, {{StreamKind::kRawBytes, raw}}, options);
  result.report.original_bytes = raw.size();
  result.report.total_ratio = safe_ratio(result.report.compressed_bytes, raw.size());
  return result;
}

CompressionReport profile_tensor(ByteView raw, const FloatFormat& format,
                                 const ContainerOptions& options) {
  const BitPlanes planes = split(raw, format);
  ContainerHeader header;
  header.format = payload_format_of(format);
  header.chunk_size = options.chunk_size;
  header.element_count = planes.element_count;
  CompressionReport report = profile_container(
      header,
      {{StreamKind::kExponent, planes.exponent_stream},
       {StreamKind::kSignMantissa, planes.sign_mantissa_stream}},
      options);
  report.original_bytes = raw.size();
  report.total_ratio = safe_ratio(report.compressed_bytes, raw.size());
  return report;
}

CompressionReport profile_bytes(ByteView raw, const ContainerOptions& options) {
  ContainerHeader header;
  header.format = PayloadFormat::kRaw;
  header.chunk_size = options.chunk_size;
  header.element_count = raw.size();
  CompressionReport report = profile_container(header, {{StreamKind::kRawBytes, raw}}, options);
  report.original_bytes = raw.size();
  report.total_ratio = safe_ratio(report.compressed_bytes, raw.size());
  return report;
}

Bytes decode_stream(ByteView container, StreamKind kind, const ContainerOptions& options) {
  const ContainerInfo info = inspect_container(container);
  std::vector<Bytes> out;
  decode_streams(container, info, {info.stream_index(kind)}, out, options.threads);
  return std::move(out[0]);
}

Bytes decode_chunk(ByteView container, StreamKind kind, std::size_t chunk_index) {
  const ContainerInfo info = inspect_container(container);
  const StreamDirectory& dir = info.stream(kind);
  if (chunk_index >= dir.chunks.size()) {
    throw InvalidInputError("chunk " + std::to_string(chunk_index) + " out of range: stream " +
                            to_string(kind) + " has " + std::to_string(dir.chunks.size()) +
                            " chunk(s)");
  }
  return decode_chunk_at(container, dir, chunk_index);
}

Bytes decompress_tensor(ByteView container, const ContainerOptions& options) {
  const ContainerInfo info = inspect_container(container);
  const std::uint64_t n = info.header.element_count;
  std::vector<Bytes> streams;
  auto expect_len = [&](StreamKind kind, std::uint64_t len) {
    if (info.stream(kind).original_len != len) {
      throw CorruptError(CorruptKind::kMalformed,
                         std::string(to_string(kind)) + " stream length disagrees with element count");
    }
  };
  try {
    switch (info.header.format) {
      case PayloadFormat::kBF16:
      case PayloadFormat::kFP8E4M3:
      case PayloadFormat::kFP8E5M2: {
        const FloatFormat& format =
            info.header.format == PayloadFormat::kBF16
                ? kBF16
                : (info.header.format == PayloadFormat::kFP8E4M3 ? kFP8E4M3 : kFP8E5M2);
        const std::uint64_t len = plane_stream_bytes(format, static_cast<std::size_t>(n));
        expect_len(StreamKind::kExponent, len);
        expect_len(StreamKind::kSignMantissa, len);
        decode_streams(container, info,
                       {info.stream_index(StreamKind::kExponent),
                        info.stream_index(StreamKind::kSignMantissa)},
                       streams, options.threads);
        BitPlanes planes;
        planes.format = format;
        planes.element_count = static_cast<std::size_t>(n);
        planes.exponent_stream = std::move(streams[0]);
        planes.sign_mantissa_stream = std::move(streams[1]);
        planes.pad_elements = format.id == FormatId::kBF16 ? 0 : n & 1;
        return merge(planes);
      }
      case PayloadFormat::kMXFP4:
      case PayloadFormat::kNVFP4: {
        decode_streams(container, info,
                       {info.stream_index(StreamKind::kRawNibbles),
                        info.stream_index(StreamKind::kScale)},
                       streams, options.threads);
        Bytes out = std::move(streams[0]);
        out.insert(out.end(), streams[1].begin(), streams[1].end());
        return out;
      }
      case PayloadFormat::kRaw: {
        expect_len(StreamKind::kRawBytes, n);
        decode_streams(container, info, {info.stream_index(StreamKind::kRawBytes)}, streams,
                       options.threads);
        return std::move(streams[0]);
      }
    }
  } catch (const InvalidInputError& e) {
    // A directory missing a required stream is a damaged container.
    throw CorruptError(CorruptKind::kMalformed, e.what());
  }
  throw CorruptError(CorruptKind::kMalformed, "unknown payload format");
}

}  // namespace ztnc
