#include "ztnc/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <tuple>

#include "ztnc/error.hpp"

namespace ztnc {

void Histogram::add(ByteView data) {
  // Four interleaved tables break the store-to-load dependency on runs.
  std::array<std::array<std::uint64_t, 256>, 4> partial{};
  std::size_t i = 0;
  for (; i + 4 <= data.size(); i += 4) {
    ++partial[0][data[i]];
    ++partial[1][data[i + 1]];
    ++partial[2][data[i + 2]];
    ++partial[3][data[i + 3]];
  }
  for (; i < data.size(); ++i) ++partial[0][data[i]];
  for (int s = 0; s < 256; ++s) {
    counts[s] += partial[0][s] + partial[1][s] + partial[2][s] + partial[3][s];
  }
  total += data.size();
}

Histogram& Histogram::operator+=(const Histogram& other) {
  for (int s = 0; s < 256; ++s) counts[s] += other.counts[s];
  total += other.total;
  return *this;
}

std::size_t Histogram::distinct() const {
  return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(),
                                                [](std::uint64_t c) { return c != 0; }));
}

Histogram histogram(ByteView data) {
  Histogram h;
  h.add(data);
  return h;
}

Codebook Codebook::from_lengths(const std::array<std::uint8_t, 256>& lengths) {
  Codebook cb;
  cb.lengths_ = lengths;
  std::array<std::uint32_t, kMaxCodeLength + 1> per_length{};
  std::uint64_t kraft = 0;  // in units of 2^-kMaxCodeLength
  for (int s = 0; s < 256; ++s) {
    const int len = lengths[s];
    if (len == 0) continue;
    if (len > kMaxCodeLength) {
      throw InvalidInputError("code length " + std::to_string(len) + " for symbol " +
                              std::to_string(s) + " exceeds the cap");
    }
    ++per_length[len];
    ++cb.present_;
    cb.max_length_ = std::max(cb.max_length_, len);
    kraft += std::uint64_t{1} << (kMaxCodeLength - len);
  }
  const bool single = cb.present_ == 1 && cb.max_length_ == 1;
  if (cb.present_ == 0) throw InvalidInputError("codebook has no symbols");
  if (!single && kraft != (std::uint64_t{1} << kMaxCodeLength)) {
    throw InvalidInputError("code lengths do not form a complete prefix code");
  }

  std::array<std::uint32_t, kMaxCodeLength + 2> next{};
  std::uint32_t code = 0;
  for (int len = 1; len <= kMaxCodeLength; ++len) {
    code = (code + per_length[len - 1]) << 1;
    next[len] = code;
  }
  // per_length[0] counts nothing, so the first tier starts at 0.
  for (int s = 0; s < 256; ++s) {
    const int len = lengths[s];
    if (len != 0) cb.codes_[s] = static_cast<std::uint16_t>(next[len]++);
  }
  return cb;
}

std::uint64_t Codebook::coded_bits(const Histogram& h) const noexcept {
  std::uint64_t bits = 0;
  for (int s = 0; s < 256; ++s) bits += h.counts[s] * lengths_[s];
  return bits;
}

bool Codebook::covers(const Histogram& h) const noexcept {
  for (int s = 0; s < 256; ++s) {
    if (h.counts[s] != 0 && lengths_[s] == 0) return false;
  }
  return true;
}

namespace {

struct Symbol {
  std::uint64_t weight;
  int symbol;
};

// Huffman depths; ties go to the lower symbol, and leaves sort before
// internal nodes of equal weight.
std::array<int, 256> huffman_depths(const std::vector<Symbol>& symbols) {
  struct Node {
    std::uint64_t weight;
    int order;
    int parent = -1;
  };
  std::vector<Node> nodes;
  nodes.reserve(2 * symbols.size());
  using Key = std::tuple<std::uint64_t, int, int>;  // weight, order, node index
  std::priority_queue<Key, std::vector<Key>, std::greater<>> queue;
  for (const Symbol& s : symbols) {
    nodes.push_back({s.weight, s.symbol});
    queue.emplace(s.weight, s.symbol, static_cast<int>(nodes.size() - 1));
  }
  int next_order = 256;
  while (queue.size() > 1) {
    const auto [wa, oa, a] = queue.top();
    queue.pop();
    const auto [wb, ob, b] = queue.top();
    queue.pop();
    nodes.push_back({wa + wb, next_order});
    const int parent = static_cast<int>(nodes.size() - 1);
    nodes[a].parent = parent;
    nodes[b].parent = parent;
    queue.emplace(wa + wb, next_order++, parent);
  }
  std::array<int, 256> depth{};
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    int d = 0;
    for (int p = nodes[i].parent; p != -1; p = nodes[p].parent) ++d;
    depth[symbols[i].symbol] = d;
  }
  return depth;
}

// Package-merge (coin collector) for lengths capped at `limit`.
std::array<int, 256> package_merge_lengths(std::vector<Symbol> symbols, int limit) {
  std::sort(symbols.begin(), symbols.end(), [](const Symbol& a, const Symbol& b) {
    return std::tie(a.weight, a.symbol) < std::tie(b.weight, b.symbol);
  });
  struct Item {
    std::uint64_t weight;
    int leaf;  // index into symbols, or -1 for a package
    int left = -1;
    int right = -1;  // indices into the list one level deeper
  };
  const int n = static_cast<int>(symbols.size());
  std::vector<std::vector<Item>> levels(static_cast<std::size_t>(limit));
  auto leaves = [&] {
    std::vector<Item> out;
    for (int i = 0; i < n; ++i) out.push_back({symbols[i].weight, i});
    return out;
  };
  levels[limit - 1] = leaves();
  for (int level = limit - 2; level >= 0; --level) {
    const std::vector<Item>& deeper = levels[level + 1];
    std::vector<Item> packages;
    for (std::size_t i = 0; i + 1 < deeper.size(); i += 2) {
      packages.push_back({deeper[i].weight + deeper[i + 1].weight, -1, static_cast<int>(i),
                          static_cast<int>(i + 1)});
    }
    std::vector<Item> base = leaves();
    std::vector<Item>& merged = levels[level];
    merged.reserve(base.size() + packages.size());
    std::size_t a = 0, b = 0;
    while (a < base.size() || b < packages.size()) {
      if (b == packages.size() || (a < base.size() && base[a].weight <= packages[b].weight)) {
        merged.push_back(base[a++]);
      } else {
        merged.push_back(packages[b++]);
      }
    }
  }
  std::array<int, 256> lengths{};
  // Each appearance of a leaf among the selected items adds one to its length.
  std::vector<std::pair<int, int>> stack;  // (level, index)
  for (int i = 0; i < 2 * n - 2; ++i) stack.emplace_back(0, i);
  while (!stack.empty()) {
    const auto [level, index] = stack.back();
    stack.pop_back();
    const Item& item = levels[level][index];
    if (item.leaf >= 0) {
      ++lengths[symbols[item.leaf].symbol];
    } else {
      stack.emplace_back(level + 1, item.left);
      stack.emplace_back(level + 1, item.right);
    }
  }
  return lengths;
}

}  // namespace

Codebook build_codebook(const Histogram& h) {
  std::vector<Symbol> symbols;
  for (int s = 0; s < 256; ++s) {
    if (h.counts[s] != 0) symbols.push_back({h.counts[s], s});
  }
  if (symbols.empty()) throw InvalidInputError("cannot build a codebook from an empty histogram");

  std::array<std::uint8_t, 256> lengths{};
  if (symbols.size() == 1) {
    lengths[symbols[0].symbol] = 1;
    return Codebook::from_lengths(lengths);
  }
  std::array<int, 256> depth = huffman_depths(symbols);
  if (*std::max_element(depth.begin(), depth.end()) > kMaxCodeLength) {
    depth = package_merge_lengths(symbols, kMaxCodeLength);
  }
  for (int s = 0; s < 256; ++s) lengths[s] = static_cast<std::uint8_t>(depth[s]);
  return Codebook::from_lengths(lengths);
}

EncodedStream encode(ByteView data, const Codebook& cb) {
  EncodedStream out;
  out.symbol_count = data.size();
  Bytes& payload = out.payload;
  payload.reserve(data.size() * static_cast<std::size_t>(std::max(cb.max_length(), 1)) / 8 + 8);
  std::uint64_t acc = 0;
  int pending = 0;
  std::uint64_t bits = 0;
  for (const std::uint8_t s : data) {
    const int len = cb.length(s);
    if (len == 0) throw MissingSymbolError(s);
    acc = (acc << len) | cb.code(s);
    pending += len;
    bits += static_cast<std::uint64_t>(len);
    while (pending >= 8) {
      pending -= 8;
      payload.push_back(static_cast<std::uint8_t>(acc >> pending));
    }
  }
  if (pending > 0) payload.push_back(static_cast<std::uint8_t>(acc << (8 - pending)));
  out.bit_count = bits;
  return out;
}

Decoder::Decoder(const Codebook& cb) : table_bits_(cb.max_length()) {
  if (cb.empty()) throw InvalidInputError("cannot decode with an empty codebook");
  table_.assign(std::size_t{1} << table_bits_, 0);
  for (int s = 0; s < 256; ++s) {
    const int len = cb.length(static_cast<std::uint8_t>(s));
    if (len == 0) continue;
    const int spare = table_bits_ - len;
    const std::size_t first = static_cast<std::size_t>(cb.code(static_cast<std::uint8_t>(s)))
                              << spare;
    const std::uint16_t entry = static_cast<std::uint16_t>((s << 4) | len);
    std::fill_n(table_.begin() + static_cast<std::ptrdiff_t>(first), std::size_t{1} << spare,
                entry);
  }
}

std::uint64_t Decoder::decode_into(ByteView payload, std::size_t n, std::uint8_t* out) const {
  // MSB-aligned bit buffer; bytes past the end read as zero and are caught
  // by the caller's bit accounting.
  std::uint64_t buffer = 0;
  int buffered = 0;
  std::size_t next_byte = 0;
  std::uint64_t consumed = 0;
  const std::uint64_t available = static_cast<std::uint64_t>(payload.size()) * 8;
  const int shift = 64 - table_bits_;
  for (std::size_t i = 0; i < n; ++i) {
    while (buffered <= 56) {
      const std::uint64_t byte = next_byte < payload.size() ? payload[next_byte] : 0;
      buffer |= byte << (56 - buffered);
      ++next_byte;
      buffered += 8;
    }
    const std::uint16_t entry = table_[buffer >> shift];
    const int len = entry & 0x0F;
    if (len == 0) {
      throw CorruptError(CorruptKind::kMalformed,
                         "invalid code at bit " + std::to_string(consumed));
    }
    consumed += static_cast<std::uint64_t>(len);
    if (consumed > available) {
      throw CorruptError(CorruptKind::kMalformed, "bit stream exhausted after " +
                                                      std::to_string(i) + " of " +
                                                      std::to_string(n) + " symbols");
    }
    out[i] = static_cast<std::uint8_t>(entry >> 4);
    buffer <<= len;
    buffered -= len;
  }
  return consumed;
}

Bytes Decoder::decode(ByteView payload, std::uint64_t bit_count, std::size_t n) const {
  if (bit_count > static_cast<std::uint64_t>(payload.size()) * 8) {
    throw CorruptError(CorruptKind::kTruncated, "payload shorter than its bit count");
  }
  Bytes out(n);
  const std::uint64_t consumed = decode_into(payload.first((bit_count + 7) / 8), n, out.data());
  if (consumed != bit_count) {
    throw CorruptError(CorruptKind::kMalformed, "decoded " + std::to_string(consumed) +
                                                    " bits, stream holds " +
                                                    std::to_string(bit_count));
  }
  return out;
}

Bytes Decoder::decode_padded(ByteView payload, std::size_t n) const {
  Bytes out(n);
  const std::uint64_t consumed = decode_into(payload, n, out.data());
  if ((consumed + 7) / 8 != payload.size()) {
    throw CorruptError(CorruptKind::kMalformed,
                       "payload has " + std::to_string(payload.size()) + " bytes but codes end at bit " +
                           std::to_string(consumed));
  }
  const int pad = static_cast<int>(payload.size() * 8 - consumed);
  if (pad > 0 && (payload.back() & ((1u << pad) - 1)) != 0) {
    throw CorruptError(CorruptKind::kMalformed, "nonzero bits after the last code");
  }
  return out;
}

Bytes decode(const EncodedStream& stream, const Codebook& cb, std::size_t n) {
  if (n == 0) {
    if (stream.bit_count != 0) throw CorruptError(CorruptKind::kMalformed, "leftover bits");
    return {};
  }
  return Decoder(cb).decode(stream.payload, stream.bit_count, n);
}

double entropy_bits_per_symbol(const Histogram& h) {
  if (h.total == 0) throw InvalidInputError("entropy of an empty histogram");
  const double total = static_cast<double>(h.total);
  double bits = 0.0;
  for (const std::uint64_t c : h.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    bits -= p * std::log2(p);
  }
  return bits;
}

ChunkCoding should_compress(const Histogram& h, const Codebook& cb, std::size_t codebook_ser_size) {
  if (h.total == 0 || !cb.covers(h)) return ChunkCoding::kRaw;
  const std::uint64_t payload = (cb.coded_bits(h) + 7) / 8;
  const double ratio = static_cast<double>(payload + codebook_ser_size) / static_cast<double>(h.total);
  return ratio < kCompressThreshold ? ChunkCoding::kHuffman : ChunkCoding::kRaw;
}

std::size_t serialized_codebook_size(const Codebook& cb) noexcept {
  return 2 + 2 * cb.present_count();
}

Bytes serialize_codebook(const Codebook& cb) {
  Bytes out;
  out.reserve(serialized_codebook_size(cb));
  ByteWriter w(out);
  w.u16(static_cast<std::uint16_t>(cb.present_count()));
  for (int s = 0; s < 256; ++s) {
    if (cb.length(static_cast<std::uint8_t>(s)) == 0) continue;
    w.u8(static_cast<std::uint8_t>(s));
    w.u8(cb.length(static_cast<std::uint8_t>(s)));
  }
  return out;
}

Codebook deserialize_codebook(ByteView bytes) {
  ByteReader r(bytes, "codebook");
  const std::size_t count = r.u16();
  if (count == 0 || count > 256) {
    throw CorruptError(CorruptKind::kMalformed, "codebook symbol count " + std::to_string(count));
  }
  std::array<std::uint8_t, 256> lengths{};
  int previous = -1;
  for (std::size_t i = 0; i < count; ++i) {
    const int symbol = r.u8();
    const int len = r.u8();
    if (symbol <= previous) {
      throw CorruptError(CorruptKind::kMalformed, "codebook symbols not strictly ascending");
    }
    if (len == 0 || len > kMaxCodeLength) {
      throw CorruptError(CorruptKind::kMalformed, "codebook length " + std::to_string(len));
    }
    lengths[symbol] = static_cast<std::uint8_t>(len);
    previous = symbol;
  }
  if (!r.at_end()) throw CorruptError(CorruptKind::kMalformed, "trailing bytes after codebook");
  try {
    return Codebook::from_lengths(lengths);
  } catch (const InvalidInputError& e) {
    throw CorruptError(CorruptKind::kMalformed, e.what());
  }
}

}  // namespace ztnc
