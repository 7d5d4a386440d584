#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ztnc/entropy.hpp"

namespace ztnc {

enum class StreamKind : std::uint8_t {
  kExponent = 0,
  kSignMantissa = 1,
  kScale = 2,
  kRawNibbles = 3,
  kRawBytes = 4,
};

const char* to_string(StreamKind kind) noexcept;

struct SymbolCount {
  std::uint8_t symbol;
  std::uint64_t count;
};

// The eight most frequent symbols, most frequent first, ties by symbol.
std::vector<SymbolCount> top_symbols(const Histogram& h, std::size_t k = 8);

// Ratios are compressed / original throughout; lower is better.
struct StreamReport {
  StreamKind kind = StreamKind::kExponent;
  std::uint64_t original_bytes = 0;
  // Codebooks plus payloads of every chunk of this stream.
  std::uint64_t compressed_bytes = 0;
  double ratio = 0.0;
  double entropy_bits = 0.0;
  std::vector<SymbolCount> top_symbols;
  std::size_t chunks = 0;
  std::size_t huffman_chunks = 0;
};

struct CompressionReport {
  std::string format;
  std::uint64_t element_count = 0;
  std::vector<StreamReport> streams;
  // Header and stream directory bytes.
  std::uint64_t overhead_bytes = 0;
  std::uint64_t original_bytes = 0;
  // Whole container size: overhead plus every stream's compressed bytes.
  std::uint64_t compressed_bytes = 0;
  double total_ratio = 0.0;

  const StreamReport* stream(StreamKind kind) const noexcept;
};

inline double safe_ratio(std::uint64_t compressed, std::uint64_t original) noexcept {
  return original == 0 ? 0.0 : static_cast<double>(compressed) / static_cast<double>(original);
}

nlohmann::json to_json(const StreamReport& s);
nlohmann::json to_json(const CompressionReport& r);

}  // namespace ztnc
