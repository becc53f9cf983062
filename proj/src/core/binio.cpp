#include "pmf/core/binio.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "pmf/core/errors.hpp"

namespace pmf {

void BinaryWriter::bytes(const unsigned char* data, std::size_t n) {
  out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw Error("binary write failed");
}

void BinaryWriter::magic(std::string_view tag) {
  bytes(reinterpret_cast<const unsigned char*>(tag.data()), tag.size());
}

void BinaryWriter::u16(std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF), static_cast<unsigned char>(v >> 8)};
  bytes(b, 2);
}

void BinaryWriter::u32(std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  bytes(b, 4);
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void BinaryWriter::f32s(std::span<const float> values) {
  for (const float v : values) f32(v);
}

void BinaryWriter::f32s(std::span<const double> values) {
  for (const double v : values) f32(static_cast<float>(v));
}

void BinaryReader::bytes(unsigned char* data, std::size_t n) {
  in_.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(container_ + ": truncated payload");
}

void BinaryReader::expect_magic(std::string_view tag) {
  std::string found(tag.size(), '\0');
  bytes(reinterpret_cast<unsigned char*>(found.data()), found.size());
  if (found != tag) throw FormatError(container_ + ": bad magic, expected " + std::string(tag));
}

std::uint16_t BinaryReader::expect_version(std::uint16_t expected) {
  const std::uint16_t v = u16();
  if (v != expected) throw VersionError(container_, v, expected);
  return v;
}

std::uint16_t BinaryReader::u16() {
  unsigned char b[2];
  bytes(b, 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t BinaryReader::u32() {
  unsigned char b[4];
  bytes(b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }

std::vector<float> BinaryReader::f32s(std::size_t count) {
  std::vector<float> out(count);
  for (auto& v : out) v = f32();
  return out;
}

std::vector<double> BinaryReader::f32s_as_double(std::size_t count) {
  std::vector<double> out(count);
  for (auto& v : out) v = static_cast<double>(f32());
  return out;
}

void BinaryReader::expect_end() {
  if (in_.peek() != std::char_traits<char>::eof()) throw FormatError(container_ + ": trailing bytes");
}

}  // namespace pmf
