#include "ztnc/error.hpp"

#include <string>
#include <utility>

#include "ztnc/bytes.hpp"

namespace ztnc {

MissingSymbolError::MissingSymbolError(std::uint8_t symbol)
    : Error("symbol " + std::to_string(symbol) + " has no code in the codebook"),
      symbol_(symbol) {}

const char* to_string(CorruptKind kind) noexcept {
  switch (kind) {
    case CorruptKind::kBadMagic: return "bad magic";
    case CorruptKind::kBadVersion: return "unsupported version";
    case CorruptKind::kTruncated: return "truncated";
    case CorruptKind::kChecksum: return "checksum mismatch";
    case CorruptKind::kMalformed: return "malformed";
  }
  return "corrupt";
}

CorruptError::CorruptError(CorruptKind kind, const std::string& what)
    : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

CorruptError::CorruptError(CorruptKind kind, const std::string& what, std::string stream,
                           std::size_t chunk)
    : Error(std::string(to_string(kind)) + ": " + what + " (stream " + stream + ", chunk " +
            std::to_string(chunk) + ")"),
      kind_(kind),
      stream_(std::move(stream)),
      chunk_(chunk) {}

std::uint8_t ByteReader::u8() {
  require(1);
  return data_[pos_++];
}

ByteView ByteReader::bytes(std::size_t n) {
  require(n);
  ByteView out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint64_t ByteReader::get(int n) {
  require(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += static_cast<std::size_t>(n);
  return v;
}

void ByteReader::require(std::size_t n) const {
  if (n > data_.size() - pos_) {
    throw CorruptError(CorruptKind::kTruncated,
                       std::string(what_) + " ends " + std::to_string(n - (data_.size() - pos_)) +
                           " byte(s) early");
  }
}

}  // namespace ztnc
