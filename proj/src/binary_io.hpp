#pragma once

// Little-endian primitives shared by the index and store file formats.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace kgv::bin {

void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f32(std::ostream& out, float v);
void put_bytes(std::ostream& out, std::string_view bytes);

// Sequential reader that reports the absolute byte offset on failure.
class Reader {
 public:
  explicit Reader(std::istream& in, std::size_t base_offset = 0) : in_(in), offset_(base_offset) {}

  std::uint32_t u32(const char* what);
  std::uint64_t u64(const char* what);
  float f32(const char* what);
  std::string bytes(std::size_t n, const char* what);
  // Throws FormatError unless the next bytes equal `magic`.
  void expect_magic(std::string_view magic);
  std::size_t offset() const { return offset_; }

 private:
  void read(char* dst, std::size_t n, const char* what);

  std::istream& in_;
  std::size_t offset_;
};

}  // namespace kgv::bin
