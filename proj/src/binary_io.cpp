#include "gamic/binary_io.h"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace gamic::io {

void ByteWriter::short_string(std::string_view s) {
  if (s.size() > UINT16_MAX) throw FormatError("string too long for u16 length prefix");
  u16(static_cast<std::uint16_t>(s.size()));
  bytes(s);
}

void ByteWriter::long_string(std::string_view s) {
  if (s.size() > UINT32_MAX) throw FormatError("string too long for u32 length prefix");
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s);
}

void ByteReader::expect_magic(std::string_view magic) {
  if (data_.size() - pos_ < magic.size() || data_.substr(pos_, magic.size()) != magic) {
    throw FormatError("bad magic/version header");
  }
  pos_ += magic.size();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for " + tmp);
  }
  fs::rename(tmp, target);
}

}  // namespace gamic::io
