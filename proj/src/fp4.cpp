#include "ztnc/fp4.hpp"

#include <string>

#include "ztnc/error.hpp"

namespace ztnc {

std::optional<Fp4Scheme> parse_fp4_scheme(std::string_view name) {
  if (name == "mxfp4") return Fp4Scheme::kMXFP4;
  if (name == "nvfp4") return Fp4Scheme::kNVFP4;
  return std::nullopt;
}

void Fp4Tensor::validate() const {
  if (nibbles.size() != nibble_bytes(element_count)) {
    throw InvalidInputError("fp4 payload has " + std::to_string(nibbles.size()) + " bytes, " +
                            std::to_string(element_count) + " elements need " +
                            std::to_string(nibble_bytes(element_count)));
  }
  if (scales.size() != scale_count(element_count, layout)) {
    throw InvalidInputError("fp4 tensor has " + std::to_string(scales.size()) + " scales, " +
                            std::to_string(element_count) + " elements in blocks of " +
                            std::to_string(layout.block_size) + " need " +
                            std::to_string(scale_count(element_count, layout)));
  }
}

CompressResult compress_fp4(const Fp4Tensor& tensor, const ContainerOptions& options) {
  tensor.validate();
  ContainerHeader header;
  header.format =
      tensor.layout.scheme == Fp4Scheme::kMXFP4 ? PayloadFormat::kMXFP4 : PayloadFormat::kNVFP4;
  header.chunk_size = options.chunk_size;
  header.element_count = tensor.element_count;
  CompressResult result = write_container(
      header,
      {{StreamKind::kRawNibbles, tensor.nibbles, /*force_raw=*/true},
       {StreamKind::kScale, tensor.scales}},
      options);
  const std::uint64_t original = tensor.nibbles.size() + tensor.scales.size();
  result.report.original_bytes = original;
  result.report.total_ratio = safe_ratio(result.report.compressed_bytes, original);
  return result;
}

CompressionReport profile_fp4(const Fp4Tensor& tensor, const ContainerOptions& options) {
  tensor.validate();
  ContainerHeader header;
  header.format =
      tensor.layout.scheme == Fp4Scheme::kMXFP4 ? PayloadFormat::kMXFP4 : PayloadFormat::kNVFP4;
  header.chunk_size = options.chunk_size;
  header.element_count = tensor.element_count;
  CompressionReport report = profile_container(
      header,
      {{StreamKind::kRawNibbles, tensor.nibbles, /*force_raw=*/true},
       {StreamKind::kScale, tensor.scales}},
      options);
  report.original_bytes = tensor.nibbles.size() + tensor.scales.size();
  report.total_ratio = safe_ratio(report.compressed_bytes, report.original_bytes);
  return report;
}

Fp4Tensor decompress_fp4(ByteView container, const ContainerOptions& options) {
  const ContainerInfo info = inspect_container(container);
  Fp4Tensor t;
  if (info.header.format == PayloadFormat::kMXFP4) {
    t.layout = Fp4Layout::mxfp4();
  } else if (info.header.format == PayloadFormat::kNVFP4) {
    t.layout = Fp4Layout::nvfp4();
  } else {
    throw InvalidInputError(std::string("container holds ") + to_string(info.header.format) +
                            ", not fp4");
  }
  t.element_count = static_cast<std::size_t>(info.header.element_count);
  const Bytes combined = decompress_tensor(container, options);
  const std::size_t nibble_len = Fp4Tensor::nibble_bytes(t.element_count);
  if (info.stream(StreamKind::kRawNibbles).original_len != nibble_len ||
      combined.size() != nibble_len + Fp4Tensor::scale_count(t.element_count, t.layout)) {
    throw CorruptError(CorruptKind::kMalformed, "fp4 stream lengths disagree with element count");
  }
  t.nibbles.assign(combined.begin(), combined.begin() + static_cast<std::ptrdiff_t>(nibble_len));
  t.scales.assign(combined.begin() + static_cast<std::ptrdiff_t>(nibble_len), combined.end());
  return t;
}

RegroupResult regroup_bits_experiment(ByteView nibbles, std::size_t element_count,
                                      int bits_per_element) {
  if (bits_per_element != 1 && bits_per_element != 2 && bits_per_element != 4) {
    throw InvalidInputError("bits per element must divide 8 and fit in a nibble");
  }
  if (nibbles.size() < Fp4Tensor::nibble_bytes(element_count)) {
    throw InvalidInputError("payload too short for element count");
  }
  const std::size_t per_byte = static_cast<std::size_t>(8 / bits_per_element);
  const unsigned mask = (1u << bits_per_element) - 1;
  const int drop = 4 - bits_per_element;

  RegroupResult result;
  Bytes& out = result.regrouped;
  out.reserve(element_count / per_byte);
  for (std::size_t base = 0; base + per_byte <= element_count; base += per_byte) {
    unsigned byte = 0;
    for (std::size_t k = 0; k < per_byte; ++k) {
      const std::size_t i = base + k;
      const unsigned nibble = (nibbles[i / 2] >> ((i & 1) ? 0 : 4)) & 0x0F;
      byte = (byte << bits_per_element) | ((nibble >> drop) & mask);
    }
    out.push_back(static_cast<std::uint8_t>(byte));
  }

  CompressionReport& report = result.report;
  report.format = "fp4-regroup";
  report.element_count = element_count;
  report.original_bytes = out.size();
  StreamReport s;
  s.kind = StreamKind::kRawBytes;
  s.original_bytes = out.size();
  if (!out.empty()) {
    const Histogram h = histogram(out);
    const Codebook cb = build_codebook(h);
    s.compressed_bytes = serialized_codebook_size(cb) + (cb.coded_bits(h) + 7) / 8;
    s.entropy_bits = entropy_bits_per_symbol(h);
    s.top_symbols = top_symbols(h);
    s.chunks = 1;
    s.huffman_chunks = 1;
  }
  s.ratio = safe_ratio(s.compressed_bytes, s.original_bytes);
  report.compressed_bytes = s.compressed_bytes;
  report.total_ratio = s.ratio;
  report.streams.push_back(std::move(s));
  return result;
}

}  // namespace ztnc
