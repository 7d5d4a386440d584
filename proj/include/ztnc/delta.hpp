#pragma once

#include "ztnc/bytes.hpp"
#include "ztnc/container.hpp"

namespace ztnc {

// Positionwise XOR of two equal-length checkpoints.
Bytes xor_delta(ByteView base, ByteView next);

// XOR delta of two BF16 checkpoints, split and coded like any BF16 tensor.
// The container carries the delta flag and the CRC-32 of `base`, so pairing
// it with the wrong base is caught by apply_delta.
CompressResult compress_delta(ByteView base, ByteView next, const ContainerOptions& options = {});

// Rebuilds `next` from `base` and a delta container. The base length and
// checksum are checked before any payload is decoded.
Bytes apply_delta(ByteView base, ByteView delta_container, const ContainerOptions& options = {});

}  // namespace ztnc
