#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ztnc/bytes.hpp"
#include "ztnc/entropy.hpp"
#include "ztnc/format.hpp"
#include "ztnc/report.hpp"

namespace ztnc {

// On-disk layout, little-endian throughout:
//
//   header     "ZTNC" | version u16 | payload format u8 | flags u8 |
//              chunk_size u32 | stream_count u8 | element_count u64 | aux u32
//   directory  per stream: kind u8 | original_len u64 |
//              per chunk: coding u8 | codebook_len u16 | comp_len u32 |
//                         orig_len u32 | crc32 u32
//   payloads   per stream, per chunk: codebook bytes then coded bytes
//
// The chunk count of a stream is ceil(original_len / chunk_size). aux holds
// the CRC-32 of the base tensor in delta containers and is zero otherwise.

inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::uint32_t kDefaultChunkSize = 256 * 1024;
inline constexpr std::size_t kHeaderBytes = 25;
inline constexpr std::size_t kStreamHeaderBytes = 9;
inline constexpr std::size_t kChunkEntryBytes = 15;

enum class PayloadFormat : std::uint8_t {
  kBF16 = 0,
  kFP8E4M3 = 1,
  kFP8E5M2 = 2,
  kMXFP4 = 3,
  kNVFP4 = 4,
  kRaw = 5,
};

const char* to_string(PayloadFormat f) noexcept;
PayloadFormat payload_format_of(const FloatFormat& f);

inline constexpr std::uint8_t kFlagDelta = 0x01;

struct ContainerOptions {
  std::uint32_t chunk_size = kDefaultChunkSize;
  // 0 = hardware concurrency. Output does not depend on this.
  unsigned threads = 0;
};

struct ChunkEntry {
  ChunkCoding coding = ChunkCoding::kRaw;
  std::uint16_t codebook_len = 0;
  std::uint32_t comp_len = 0;
  std::uint32_t orig_len = 0;
  std::uint32_t crc = 0;
};

struct StreamDirectory {
  StreamKind kind = StreamKind::kExponent;
  std::uint64_t original_len = 0;
  std::vector<ChunkEntry> chunks;
  // Offsets into the container of each chunk's codebook, filled by parsing.
  std::vector<std::uint64_t> chunk_offsets;
};

struct ContainerHeader {
  PayloadFormat format = PayloadFormat::kRaw;
  std::uint8_t flags = 0;
  std::uint32_t chunk_size = kDefaultChunkSize;
  std::uint64_t element_count = 0;
  std::uint32_t aux = 0;
};

// Parsed header and directories, validated against the container size.
struct ContainerInfo {
  ContainerHeader header;
  std::vector<StreamDirectory> streams;

  const StreamDirectory& stream(StreamKind kind) const;
  std::size_t stream_index(StreamKind kind) const;
};

ContainerInfo inspect_container(ByteView container);

struct CompressResult {
  Bytes container;
  CompressionReport report;
};

// One stream to be chunked and coded. Streams with force_raw set are never
// entropy coded.
struct StreamInput {
  StreamKind kind;
  ByteView data;
  bool force_raw = false;
};

// Low-level writer shared by the tensor, delta, and fp4 front ends.
CompressResult write_container(const ContainerHeader& header, const std::vector<StreamInput>& streams,
                               const ContainerOptions& options);

// Report that write_container would produce for these streams, computed from
// chunk histograms and codebooks without encoding anything.
CompressionReport profile_container(const ContainerHeader& header,
                                    const std::vector<StreamInput>& streams,
                                    const ContainerOptions& options);
CompressionReport profile_tensor(ByteView raw, const FloatFormat& format,
                                 const ContainerOptions& options = {});
CompressionReport profile_bytes(ByteView raw, const ContainerOptions& options = {});

// BF16 / FP8 tensors: split into exponent and sign+mantissa streams.
CompressResult compress_tensor(ByteView raw, const FloatFormat& format,
                               const ContainerOptions& options = {});

// Opaque bytes: one entropy-coded stream.
CompressResult compress_bytes(ByteView raw, const ContainerOptions& options = {});

// Inverse of compress_tensor / compress_bytes. FP4 containers come back as
// the packed nibble payload followed by the scale bytes. Every chunk CRC is
// verified; nothing is returned unless the whole container checks out.
Bytes decompress_tensor(ByteView container, const ContainerOptions& options = {});

// Full decoded stream of one kind.
Bytes decode_stream(ByteView container, StreamKind kind, const ContainerOptions& options = {});

// One chunk of one stream, touching no other chunk's bytes.
Bytes decode_chunk(ByteView container, StreamKind kind, std::size_t chunk_index);

}  // namespace ztnc
