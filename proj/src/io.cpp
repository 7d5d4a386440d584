#include "ztnc/io.hpp"

#include <fstream>
#include <system_error>

#include "ztnc/error.hpp"

namespace ztnc {

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw InvalidInputError("cannot open " + path.string());
  const std::streamsize size = in.tellg();
  Bytes out(static_cast<std::size_t>(size));
  in.seekg(0);
  if (size > 0 && !in.read(reinterpret_cast<char*>(out.data()), size)) {
    throw InvalidInputError("cannot read " + path.string());
  }
  return out;
}

void write_file(const std::filesystem::path& path, ByteView data) {
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInputError("cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("cannot move output into place at " + path.string());
  }
}

}  // namespace ztnc
