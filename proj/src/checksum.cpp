#include "ztnc/checksum.hpp"

#include <zlib.h>

#include <algorithm>

namespace ztnc {

std::uint32_t crc32(ByteView data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  constexpr std::size_t kStep = std::size_t{1} << 30;
  for (std::size_t pos = 0; pos < data.size(); pos += kStep) {
    const std::size_t n = std::min(kStep, data.size() - pos);
    crc = ::crc32(crc, data.data() + pos, static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace ztnc
