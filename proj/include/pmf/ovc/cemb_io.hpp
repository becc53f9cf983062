#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pmf::ovc {

inline constexpr std::uint16_t kCembVersion = 1;

struct ClassEmbedding {
  int category_id = 0;
  std::vector<double> vector;
  friend bool operator==(const ClassEmbedding&, const ClassEmbedding&) = default;
};

/// "CEMB" container: magic, u16 version, u32 count, then per entry
/// {u32 category_id, u32 d, d little-endian f32}. Category ids are unique and
/// every entry has the same d.
void write_cemb(std::ostream& out, const std::vector<ClassEmbedding>& entries);
std::vector<ClassEmbedding> read_cemb(std::istream& in);
void save_cemb(const std::string& path, const std::vector<ClassEmbedding>& entries);
std::vector<ClassEmbedding> load_cemb(const std::string& path);

}  // namespace pmf::ovc
