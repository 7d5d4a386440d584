#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "ztnc/bytes.hpp"
#include "ztnc/container.hpp"
#include "ztnc/format.hpp"

namespace ztnc {

enum class Fp4Scheme : std::uint8_t { kMXFP4, kNVFP4 };

// Block-scaled FP4: E2M1 elements sharing one scale byte per block.
struct Fp4Layout {
  Fp4Scheme scheme = Fp4Scheme::kMXFP4;
  std::size_t block_size = 32;
  // E8M0 (a bare power-of-two exponent) for MXFP4, E4M3 for NVFP4.
  std::string_view scale_format = "e8m0";

  static constexpr Fp4Layout mxfp4() noexcept { return {Fp4Scheme::kMXFP4, 32, "e8m0"}; }
  static constexpr Fp4Layout nvfp4() noexcept { return {Fp4Scheme::kNVFP4, 16, "fp8-e4m3"}; }
  static Fp4Layout of(Fp4Scheme scheme) noexcept {
    return scheme == Fp4Scheme::kMXFP4 ? mxfp4() : nvfp4();
  }
  std::string_view name() const noexcept {
    return scheme == Fp4Scheme::kMXFP4 ? "mxfp4" : "nvfp4";
  }
};

std::optional<Fp4Scheme> parse_fp4_scheme(std::string_view name);

// Two elements per nibble byte, first element in the high nibble; an odd
// element count leaves a zero pad nibble. One scale per block, the last
// block possibly short.
struct Fp4Tensor {
  Fp4Layout layout;
  std::size_t element_count = 0;
  Bytes nibbles;
  Bytes scales;

  static std::size_t nibble_bytes(std::size_t elements) noexcept { return (elements + 1) / 2; }
  static std::size_t scale_count(std::size_t elements, const Fp4Layout& layout) noexcept {
    return (elements + layout.block_size - 1) / layout.block_size;
  }
  // Throws InvalidInputError when the byte counts do not fit element_count.
  void validate() const;
};

// Nibble payload stored raw, scale stream entropy coded with fallback.
CompressResult compress_fp4(const Fp4Tensor& tensor, const ContainerOptions& options = {});
CompressionReport profile_fp4(const Fp4Tensor& tensor, const ContainerOptions& options = {});
Fp4Tensor decompress_fp4(ByteView container, const ContainerOptions& options = {});

struct RegroupResult {
  Bytes regrouped;
  // One raw_bytes stream; its ratio is what a single Huffman code over the
  // regrouped bytes would achieve, codebook included, with no raw fallback.
  CompressionReport report;
};

// Packs the top `bits_per_element` bits of consecutive FP4 elements into
// bytes, in element order, dropping a trailing partial group. With 2 bits,
// each byte holds the sign and high exponent bit of four elements.
RegroupResult regroup_bits_experiment(ByteView nibbles, std::size_t element_count,
                                      int bits_per_element = 2);

}  // namespace ztnc
