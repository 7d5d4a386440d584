#include "ztnc/delta.hpp"

#include <string>

#include "ztnc/checksum.hpp"
#include "ztnc/error.hpp"
#include "ztnc/parallel.hpp"

namespace ztnc {

namespace {

void xor_into(ByteView other, Bytes& inout, const ContainerOptions& options) {
  const std::size_t block = options.chunk_size == 0 ? kDefaultChunkSize : options.chunk_size;
  const std::size_t blocks = (inout.size() + block - 1) / block;
  parallel_for(blocks, options.threads, [&](std::size_t b) {
    const std::size_t end = std::min(inout.size(), (b + 1) * block);
    for (std::size_t i = b * block; i < end; ++i) inout[i] ^= other[i];
  });
}

}  // namespace

Bytes xor_delta(ByteView base, ByteView next) {
  if (base.size() != next.size()) {
    throw InvalidInputError("checkpoint sizes differ: " + std::to_string(base.size()) + " vs " +
                            std::to_string(next.size()));
  }
  Bytes out(next.begin(), next.end());
  xor_into(base, out, ContainerOptions{kDefaultChunkSize, 1});
  return out;
}

CompressResult compress_delta(ByteView base, ByteView next, const ContainerOptions& options) {
  if (base.size() != next.size()) {
    throw InvalidInputError("checkpoint sizes differ: " + std::to_string(base.size()) + " vs " +
                            std::to_string(next.size()));
  }
  Bytes delta(next.begin(), next.end());
  xor_into(base, delta, options);

  const BitPlanes planes = split(delta, kBF16);
  ContainerHeader header;
  header.format = PayloadFormat::kBF16;
  header.flags = kFlagDelta;
  header.chunk_size = options.chunk_size;
  header.element_count = planes.element_count;
  header.aux = crc32(base);
  CompressResult result = write_container(
      header,
      {{StreamKind::kExponent, planes.exponent_stream},
       {StreamKind::kSignMantissa, planes.sign_mantissa_stream}},
      options);
  result.report.original_bytes = next.size();
  result.report.total_ratio = safe_ratio(result.report.compressed_bytes, next.size());
  return result;
}

Bytes apply_delta(ByteView base, ByteView delta_container, const ContainerOptions& options) {
  const ContainerInfo info = inspect_container(delta_container);
  if ((info.header.flags & kFlagDelta) == 0) {
    throw InvalidInputError("container is not a delta container");
  }
  if (info.header.format != PayloadFormat::kBF16) {
    throw CorruptError(CorruptKind::kMalformed, "delta container must hold bf16");
  }
  if (base.size() != info.header.element_count * 2) {
    throw InvalidInputError("base has " + std::to_string(base.size()) + " bytes, delta expects " +
                            std::to_string(info.header.element_count * 2));
  }
  if (crc32(base) != info.header.aux) {
    throw InvalidInputError("base checksum does not match the one recorded in the delta");
  }
  Bytes next = decompress_tensor(delta_container, options);
  xor_into(base, next, options);
  return next;
}

}  // namespace ztnc
