#include "binary_io.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "kgv/error.hpp"

namespace kgv::bin {

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, sizeof(T));
}

template <typename T>
T get_le(const char* buf) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

}  // namespace

void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
void put_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
void put_bytes(std::ostream& out, std::string_view bytes) {
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void Reader::read(char* dst, std::size_t n, const char* what) {
  in_.read(dst, static_cast<std::streamsize>(n));
  auto got = static_cast<std::size_t>(in_.gcount());
  if (got != n) throw FormatError(offset_ + got, std::string("truncated while reading ") + what);
  offset_ += n;
}

std::uint32_t Reader::u32(const char* what) {
  char buf[4];
  read(buf, 4, what);
  return get_le<std::uint32_t>(buf);
}

std::uint64_t Reader::u64(const char* what) {
  char buf[8];
  read(buf, 8, what);
  return get_le<std::uint64_t>(buf);
}

float Reader::f32(const char* what) { return std::bit_cast<float>(u32(what)); }

std::string Reader::bytes(std::size_t n, const char* what) {
  std::string out;
  // Grow in bounded chunks so a corrupt length cannot force a huge allocation.
  constexpr std::size_t kChunk = 1 << 16;
  while (out.size() < n) {
    std::size_t step = std::min(kChunk, n - out.size());
    std::size_t old = out.size();
    out.resize(old + step);
    read(out.data() + old, step, what);
  }
  return out;
}

void Reader::expect_magic(std::string_view magic) {
  std::size_t at = offset_;
  std::string got = bytes(magic.size(), "magic");
  if (got != magic) throw FormatError(at, "bad magic, expected \"" + std::string(magic) + "\"");
}

}  // namespace kgv::bin
