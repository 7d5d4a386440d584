#pragma once

#include <cstdint>

#include "ztnc/bytes.hpp"

namespace ztnc {

// CRC-32 with the IEEE 802.3 polynomial (the zlib/PNG checksum).
std::uint32_t crc32(ByteView data);

}  // namespace ztnc
