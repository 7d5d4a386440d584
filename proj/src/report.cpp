#include "ztnc/report.hpp"

#include <algorithm>

namespace ztnc {

const char* to_string(StreamKind kind) noexcept {
  switch (kind) {
    case StreamKind::kExponent: return "exponent";
    case StreamKind::kSignMantissa: return "sign_mantissa";
    case StreamKind::kScale: return "scale";
    case StreamKind::kRawNibbles: return "raw_nibbles";
    case StreamKind::kRawBytes: return "raw_bytes";
  }
  return "unknown";
}

std::vector<SymbolCount> top_symbols(const Histogram& h, std::size_t k) {
  std::vector<SymbolCount> all;
  for (int s = 0; s < 256; ++s) {
    if (h.counts[s] != 0) all.push_back({static_cast<std::uint8_t>(s), h.counts[s]});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const SymbolCount& a, const SymbolCount& b) { return a.count > b.count; });
  if (all.size() > k) all.resize(k);
  return all;
}

const StreamReport* CompressionReport::stream(StreamKind kind) const noexcept {
  for (const StreamReport& s : streams) {
    if (s.kind == kind) return &s;
  }
  return nullptr;
}

nlohmann::json to_json(const StreamReport& s) {
  nlohmann::json top = nlohmann::json::array();
  for (const SymbolCount& c : s.top_symbols) top.push_back({{"symbol", c.symbol}, {"count", c.count}});
  return {
      {"kind", to_string(s.kind)},
      {"original_bytes", s.original_bytes},
      {"compressed_bytes", s.compressed_bytes},
      {"ratio", s.ratio},
      {"entropy_bits_per_symbol", s.entropy_bits},
      {"top_symbols", top},
      {"chunks", s.chunks},
      {"huffman_chunks", s.huffman_chunks},
  };
}

nlohmann::json to_json(const CompressionReport& r) {
  nlohmann::json streams = nlohmann::json::array();
  for (const StreamReport& s : r.streams) streams.push_back(to_json(s));
  return {
      {"format", r.format},
      {"element_count", r.element_count},
      {"streams", streams},
      {"overhead_bytes", r.overhead_bytes},
      {"original_bytes", r.original_bytes},
      {"compressed_bytes", r.compressed_bytes},
      {"total_ratio", r.total_ratio},
  };
}

}  // namespace ztnc
