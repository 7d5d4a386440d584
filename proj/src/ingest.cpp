#include "ztnc/ingest.hpp"

#include <algorithm>
#include <string>

#include "ztnc/error.hpp"
#include "ztnc/io.hpp"

namespace ztnc {

namespace {

constexpr char kArchiveMagic[4] = {'Z', 'T', 'N', 'A'};
constexpr char kContainerMagic[4] = {'Z', 'T', 'N', 'C'};

std::size_t dtype_size(std::string_view dtype) {
  if (dtype == "BF16") return 2;
  return 1;  // F8_E4M3, F8_E5M2, U8
}

[[noreturn]] void malformed(const std::string& what) {
  throw CorruptError(CorruptKind::kMalformed, what);
}

std::uint64_t as_u64(const nlohmann::ordered_json& v, const std::string& what) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    malformed(what + " is not a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

CorruptError in_tensor(const CorruptError& e, const std::string& name) {
  const std::string what = "tensor " + name + ": " + e.what();
  if (e.stream() && e.chunk()) return CorruptError(e.kind(), what, *e.stream(), *e.chunk());
  return CorruptError(e.kind(), what);
}

struct ParsedArchive {
  nlohmann::json manifest;
  ByteView blobs;
};

ParsedArchive parse_archive(ByteView archive) {
  if (!is_archive(archive)) throw CorruptError(CorruptKind::kBadMagic, "not a ZTNA archive");
  ByteReader r(archive.subspan(4), "archive header");
  const std::uint16_t version = r.u16();
  if (version != kArchiveVersion) {
    throw CorruptError(CorruptKind::kBadVersion, "archive version " + std::to_string(version));
  }
  const std::uint64_t manifest_len = r.u64();
  if (manifest_len > r.remaining()) throw CorruptError(CorruptKind::kTruncated, "archive manifest cut short");
  const ByteView text = r.bytes(static_cast<std::size_t>(manifest_len));
  ParsedArchive parsed;
  try {
    parsed.manifest = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    malformed(std::string("archive manifest: ") + e.what());
  }
  parsed.blobs = archive.subspan(4 + r.position());
  if (!parsed.manifest.is_object() || !parsed.manifest.contains("segments")) {
    malformed("archive manifest has no segments");
  }
  return parsed;
}

ByteView blob_of(const ParsedArchive& a, const nlohmann::json& seg) {
  const std::uint64_t offset = seg.at("offset").get<std::uint64_t>();
  const std::uint64_t length = seg.at("length").get<std::uint64_t>();
  if (offset > a.blobs.size() || length > a.blobs.size() - offset) {
    throw CorruptError(CorruptKind::kTruncated, "archive blob extends past the end of the file");
  }
  return a.blobs.subspan(static_cast<std::size_t>(offset), static_cast<std::size_t>(length));
}

Bytes decode_tensor_segment(const ParsedArchive& a, const nlohmann::json& seg,
                            const ContainerOptions& options) {
  const std::string name = seg.at("name").get<std::string>();
  Bytes out;
  try {
    out = decompress_tensor(blob_of(a, seg), options);
  } catch (const CorruptError& e) {
    throw in_tensor(e, name);
  }
  if (out.size() != seg.at("original_size").get<std::uint64_t>()) {
    malformed("tensor " + name + " decoded to the wrong size");
  }
  return out;
}

}  // namespace

std::uint64_t TensorEntry::element_count() const {
  std::uint64_t n = 1;
  for (const std::uint64_t d : shape) n *= d;
  return n;
}

std::optional<PayloadFormat> payload_format_for_dtype(std::string_view dtype) {
  if (dtype == "BF16") return PayloadFormat::kBF16;
  if (dtype == "F8_E4M3") return PayloadFormat::kFP8E4M3;
  if (dtype == "F8_E5M2") return PayloadFormat::kFP8E5M2;
  if (dtype == "U8") return PayloadFormat::kRaw;
  return std::nullopt;
}

SafetensorsFile SafetensorsFile::read(const std::filesystem::path& path) {
  return parse(read_file(path));
}

SafetensorsFile SafetensorsFile::parse(Bytes file) {
  SafetensorsFile f;
  f.file_ = std::move(file);
  ByteReader r(f.file_, "safetensors header");
  const std::uint64_t header_len = r.u64();
  if (header_len > r.remaining()) {
    throw CorruptError(CorruptKind::kTruncated, "safetensors header length exceeds file size");
  }
  const ByteView text = r.bytes(static_cast<std::size_t>(header_len));
  f.data_offset_ = 8 + header_len;
  const std::uint64_t data_size = f.file_.size() - f.data_offset_;

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    malformed(std::string("safetensors header: ") + e.what());
  }
  if (!header.is_object()) malformed("safetensors header is not a JSON object");

  std::vector<TensorEntry> all;
  for (const auto& [name, info] : header.items()) {
    if (name == "__metadata__") {
      f.metadata_ = info;
      continue;
    }
    if (!info.is_object() || !info.contains("dtype") || !info.contains("shape") ||
        !info.contains("data_offsets")) {
      malformed("tensor " + name + " lacks dtype, shape or data_offsets");
    }
    TensorEntry e;
    e.name = name;
    if (!info["dtype"].is_string()) malformed("tensor " + name + " dtype is not a string");
    e.dtype = info["dtype"].get<std::string>();
    if (!info["shape"].is_array()) malformed("tensor " + name + " shape is not an array");
    for (const auto& d : info["shape"]) e.shape.push_back(as_u64(d, "tensor " + name + " shape"));
    const auto& offsets = info["data_offsets"];
    if (!offsets.is_array() || offsets.size() != 2) {
      malformed("tensor " + name + " data_offsets must be [begin, end]");
    }
    e.begin = as_u64(offsets[0], "tensor " + name + " offset");
    e.end = as_u64(offsets[1], "tensor " + name + " offset");
    if (e.begin > e.end || e.end > data_size) {
      malformed("tensor " + name + " byte range lies outside the data region");
    }
    if (payload_format_for_dtype(e.dtype)) {
      if (e.end - e.begin != e.element_count() * dtype_size(e.dtype)) {
        malformed("tensor " + name + " byte length does not match its shape");
      }
      f.entries_.push_back(e);
    } else {
      f.skipped_.push_back(e);
    }
    all.push_back(std::move(e));
  }
  std::sort(all.begin(), all.end(),
            [](const TensorEntry& a, const TensorEntry& b) { return a.begin < b.begin; });
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (all[i].begin < all[i - 1].end) {
      malformed("tensors " + all[i - 1].name + " and " + all[i].name + " overlap");
    }
  }
  return f;
}

ByteView SafetensorsFile::data(const TensorEntry& entry) const {
  return ByteView(file_).subspan(static_cast<std::size_t>(data_offset_ + entry.begin),
                                 static_cast<std::size_t>(entry.end - entry.begin));
}

const TensorEntry* SafetensorsFile::find(std::string_view name) const {
  for (const TensorEntry& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

Bytes build_safetensors(const std::vector<TensorData>& tensors,
                        const nlohmann::ordered_json& metadata) {
  nlohmann::ordered_json header = nlohmann::ordered_json::object();
  if (!metadata.is_null()) header["__metadata__"] = metadata;
  std::uint64_t offset = 0;
  for (const TensorData& t : tensors) {
    header[t.name] = {{"dtype", t.dtype},
                      {"shape", t.shape},
                      {"data_offsets", {offset, offset + t.data.size()}}};
    offset += t.data.size();
  }
  std::string text = header.dump();
  text.append((8 - text.size() % 8) % 8, ' ');
  Bytes out;
  ByteWriter w(out);
  w.u64(text.size());
  w.text(text);
  for (const TensorData& t : tensors) w.bytes(t.data);
  return out;
}

void write_model(const std::filesystem::path& path, const std::vector<TensorData>& tensors,
                 const nlohmann::ordered_json& metadata) {
  write_file(path, build_safetensors(tensors, metadata));
}

nlohmann::json to_json(const ArchiveReport& r) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const TensorReport& t : r.tensors) {
    nlohmann::json j = to_json(t.report);
    j["name"] = t.name;
    j["dtype"] = t.dtype;
    tensors.push_back(std::move(j));
  }
  return {
      {"tensors", tensors},
      {"skipped", r.skipped},
      {"tensor_original_bytes", r.tensor_original_bytes},
      {"tensor_compressed_bytes", r.tensor_compressed_bytes},
      {"tensor_ratio", r.tensor_ratio},
      {"file_original_bytes", r.file_original_bytes},
      {"file_compressed_bytes", r.file_compressed_bytes},
      {"file_ratio", r.file_ratio},
  };
}

ArchiveResult write_archive(const SafetensorsFile& model, const ContainerOptions& options) {
  std::vector<const TensorEntry*> order;
  for (const TensorEntry& e : model.entries()) order.push_back(&e);
  std::sort(order.begin(), order.end(),
            [](const TensorEntry* a, const TensorEntry* b) { return a->begin < b->begin; });

  ArchiveResult result;
  ArchiveReport& report = result.report;
  for (const TensorEntry& e : model.skipped()) report.skipped.push_back(e.name);

  Bytes blobs;
  nlohmann::json segments = nlohmann::json::array();
  const ByteView file = model.bytes();
  std::uint64_t cursor = 0;
  auto verbatim = [&](std::uint64_t until) {
    if (until <= cursor) return;
    segments.push_back({{"kind", "verbatim"},
                        {"source_offset", cursor},
                        {"offset", blobs.size()},
                        {"length", until - cursor}});
    blobs.insert(blobs.end(), file.begin() + static_cast<std::ptrdiff_t>(cursor),
                 file.begin() + static_cast<std::ptrdiff_t>(until));
    cursor = until;
  };
  for (const TensorEntry* e : order) {
    const std::uint64_t begin = model.data_offset() + e->begin;
    verbatim(begin);
    const ByteView data = model.data(*e);
    const PayloadFormat format = *payload_format_for_dtype(e->dtype);
    CompressResult c;
    switch (format) {
      case PayloadFormat::kBF16: c = compress_tensor(data, kBF16, options); break;
      case PayloadFormat::kFP8E4M3: c = compress_tensor(data, kFP8E4M3, options); break;
      case PayloadFormat::kFP8E5M2: c = compress_tensor(data, kFP8E5M2, options); break;
      default: c = compress_bytes(data, options); break;
    }
    segments.push_back({{"kind", "tensor"},
                        {"name", e->name},
                        {"dtype", e->dtype},
                        {"format", to_string(format)},
                        {"source_offset", begin},
                        {"original_size", data.size()},
                        {"offset", blobs.size()},
                        {"length", c.container.size()},
                        {"ratio", c.report.total_ratio}});
    blobs.insert(blobs.end(), c.container.begin(), c.container.end());
    report.tensor_original_bytes += data.size();
    report.tensor_compressed_bytes += c.container.size();
    report.tensors.push_back({e->name, e->dtype, std::move(c.report)});
    cursor = begin + data.size();
  }
  verbatim(file.size());

  const nlohmann::json manifest = {{"version", kArchiveVersion},
                                   {"container_version", kContainerVersion},
                                   {"source_bytes", file.size()},
                                   {"skipped", report.skipped},
                                   {"segments", segments}};
  const std::string text = manifest.dump();
  ByteWriter w(result.archive);
  w.bytes(ByteView(reinterpret_cast<const std::uint8_t*>(kArchiveMagic), 4));
  w.u16(kArchiveVersion);
  w.u64(text.size());
  w.text(text);
  w.bytes(blobs);

  report.tensor_ratio = safe_ratio(report.tensor_compressed_bytes, report.tensor_original_bytes);
  report.file_original_bytes = file.size();
  report.file_compressed_bytes = result.archive.size();
  report.file_ratio = safe_ratio(report.file_compressed_bytes, report.file_original_bytes);
  return result;
}

Bytes read_archive(ByteView archive, const ContainerOptions& options) {
  const ParsedArchive a = parse_archive(archive);
  Bytes out;
  try {
    out.reserve(a.manifest.at("source_bytes").get<std::size_t>());
    for (const nlohmann::json& seg : a.manifest.at("segments")) {
      if (seg.at("source_offset").get<std::uint64_t>() != out.size()) {
        malformed("archive segments do not tile the source file");
      }
      const std::string kind = seg.at("kind").get<std::string>();
      if (kind == "verbatim") {
        const ByteView bytes = blob_of(a, seg);
        out.insert(out.end(), bytes.begin(), bytes.end());
      } else if (kind == "tensor") {
        const Bytes bytes = decode_tensor_segment(a, seg, options);
        out.insert(out.end(), bytes.begin(), bytes.end());
      } else {
        malformed("unknown archive segment kind " + kind);
      }
    }
    if (out.size() != a.manifest.at("source_bytes").get<std::uint64_t>()) {
      malformed("archive reassembled to the wrong size");
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(std::string("archive manifest: ") + e.what());
  }
  return out;
}

nlohmann::json archive_manifest(ByteView archive) { return parse_archive(archive).manifest; }

Bytes extract_tensor(ByteView archive, std::string_view name, const ContainerOptions& options) {
  const ParsedArchive a = parse_archive(archive);
  try {
    for (const nlohmann::json& seg : a.manifest.at("segments")) {
      if (seg.at("kind") == "tensor" && seg.at("name").get<std::string>() == name) {
        return decode_tensor_segment(a, seg, options);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(std::string("archive manifest: ") + e.what());
  }
  throw InvalidInputError("archive has no tensor named " + std::string(name));
}

bool is_archive(ByteView bytes) noexcept {
  return bytes.size() >= 4 && std::equal(kArchiveMagic, kArchiveMagic + 4, bytes.begin());
}

bool is_container(ByteView bytes) noexcept {
  return bytes.size() >= 4 && std::equal(kContainerMagic, kContainerMagic + 4, bytes.begin());
}

}  // namespace ztnc
