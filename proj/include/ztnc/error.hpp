#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace ztnc {

// Base of every error the library throws. Callers that only care about
// "did it work" catch this; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller handed us something structurally invalid: wrong byte length for the
// element format, mismatched buffer sizes, bad parameters.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// A symbol has no code in the codebook. Raised by encode(); with a static
// dictionary this means the dictionary no longer covers the data.
class MissingSymbolError : public Error {
 public:
  explicit MissingSymbolError(std::uint8_t symbol);
  std::uint8_t symbol() const noexcept { return symbol_; }

 private:
  std::uint8_t symbol_;
};

enum class CorruptKind {
  kBadMagic,
  kBadVersion,
  kTruncated,
  kChecksum,
  kMalformed,
};

const char* to_string(CorruptKind kind) noexcept;

// Stored data failed validation. `stream()` and `chunk()` are set when the
// failure is localized to one chunk of one stream.
class CorruptError : public Error {
 public:
  CorruptError(CorruptKind kind, const std::string& what);
  CorruptError(CorruptKind kind, const std::string& what, std::string stream,
               std::size_t chunk);

  CorruptKind kind() const noexcept { return kind_; }
  const std::optional<std::string>& stream() const noexcept { return stream_; }
  const std::optional<std::size_t>& chunk() const noexcept { return chunk_; }

 private:
  CorruptKind kind_;
  std::optional<std::string> stream_;
  std::optional<std::size_t> chunk_;
};

}  // namespace ztnc
