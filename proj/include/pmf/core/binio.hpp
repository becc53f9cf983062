#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pmf {

/// Little-endian writer for the versioned binary containers (TVLM, WSPN,
/// AMAP, CEMB). Byte order is fixed regardless of host endianness.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void magic(std::string_view tag);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f32(float v);
  void f32s(std::span<const float> values);
  /// Doubles are narrowed to f32 on disk.
  void f32s(std::span<const double> values);

 private:
  void bytes(const unsigned char* data, std::size_t n);
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string container) : in_(in), container_(std::move(container)) {}

  /// Throws FormatError when the next four bytes are not `tag`.
  void expect_magic(std::string_view tag);
  /// Reads a u16 version and throws VersionError when it differs.
  std::uint16_t expect_version(std::uint16_t expected);
  std::uint16_t u16();
  std::uint32_t u32();
  float f32();
  std::vector<float> f32s(std::size_t count);
  std::vector<double> f32s_as_double(std::size_t count);
  /// Throws FormatError when trailing bytes remain.
  void expect_end();

 private:
  void bytes(unsigned char* data, std::size_t n);
  std::istream& in_;
  std::string container_;
};

}  // namespace pmf
