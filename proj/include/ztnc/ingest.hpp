#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ztnc/bytes.hpp"
#include "ztnc/container.hpp"

namespace ztnc {

// One tensor of a safetensors file. begin/end are offsets into the data
// region that follows the JSON header.
struct TensorEntry {
  std::string name;
  std::string dtype;
  std::vector<std::uint64_t> shape;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  std::uint64_t element_count() const;
};

// Codec route for a safetensors dtype token, if we compress it.
// BF16, F8_E4M3, F8_E5M2 go through the float splitter; U8 is coded as bytes.
std::optional<PayloadFormat> payload_format_for_dtype(std::string_view dtype);

// A parsed safetensors file: u64 header length, JSON header, data region.
class SafetensorsFile {
 public:
  // Throws CorruptError on a malformed header or overlapping/out-of-range
  // tensors. Tensors with unsupported dtypes are listed in skipped().
  static SafetensorsFile parse(Bytes file);
  static SafetensorsFile read(const std::filesystem::path& path);

  // Supported tensors, in header order.
  const std::vector<TensorEntry>& entries() const noexcept { return entries_; }
  const std::vector<TensorEntry>& skipped() const noexcept { return skipped_; }
  ByteView data(const TensorEntry& entry) const;
  const TensorEntry* find(std::string_view name) const;

  const Bytes& bytes() const noexcept { return file_; }
  std::uint64_t data_offset() const noexcept { return data_offset_; }
  const nlohmann::ordered_json& metadata() const noexcept { return metadata_; }

 private:
  Bytes file_;
  std::uint64_t data_offset_ = 0;
  std::vector<TensorEntry> entries_;
  std::vector<TensorEntry> skipped_;
  nlohmann::ordered_json metadata_;
};

struct TensorData {
  std::string name;
  std::string dtype;
  std::vector<std::uint64_t> shape;
  Bytes data;
};

// Serializes tensors back-to-back in the given order; the header is padded
// with spaces to a multiple of 8 bytes.
Bytes build_safetensors(const std::vector<TensorData>& tensors,
                        const nlohmann::ordered_json& metadata = nullptr);
void write_model(const std::filesystem::path& path, const std::vector<TensorData>& tensors,
                 const nlohmann::ordered_json& metadata = nullptr);

struct TensorReport {
  std::string name;
  std::string dtype;
  CompressionReport report;
};

struct ArchiveReport {
  std::vector<TensorReport> tensors;
  std::vector<std::string> skipped;
  // Over compressed tensors only.
  std::uint64_t tensor_original_bytes = 0;
  std::uint64_t tensor_compressed_bytes = 0;
  double tensor_ratio = 0.0;
  // Whole file, manifest and verbatim bytes included.
  std::uint64_t file_original_bytes = 0;
  std::uint64_t file_compressed_bytes = 0;
  double file_ratio = 0.0;
};

nlohmann::json to_json(const ArchiveReport& r);

struct ArchiveResult {
  Bytes archive;
  ArchiveReport report;
};

// Archive layout: "ZTNA" | version u16 | manifest_len u64 | manifest JSON |
// blobs. The manifest lists segments that tile the source file in order:
// verbatim byte runs (header, padding, unsupported tensors) and tensor
// containers, each with its blob offset and length.
inline constexpr std::uint16_t kArchiveVersion = 1;

ArchiveResult write_archive(const SafetensorsFile& model, const ContainerOptions& options = {});
// Rebuilds the original file byte for byte.
Bytes read_archive(ByteView archive, const ContainerOptions& options = {});
nlohmann::json archive_manifest(ByteView archive);
// Decoded bytes of one tensor, touching only its own container.
Bytes extract_tensor(ByteView archive, std::string_view name, const ContainerOptions& options = {});

bool is_archive(ByteView bytes) noexcept;
bool is_container(ByteView bytes) noexcept;

}  // namespace ztnc
