#include "pmf/ovc/cemb_io.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "pmf/core/binio.hpp"
#include "pmf/core/errors.hpp"

namespace pmf::ovc {

namespace {

void check_entries(const std::vector<ClassEmbedding>& entries) {
  std::set<int> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.category_id).second) {
      throw InvalidArgument("CEMB: duplicate category id " + std::to_string(e.category_id));
    }
    if (e.category_id < 0) throw InvalidArgument("CEMB: category ids must be non-negative");
    if (e.vector.empty() || e.vector.size() != entries.front().vector.size()) {
      throw ShapeError("CEMB: embeddings must share one non-zero dimension");
    }
    for (const double v : e.vector) {
      if (!std::isfinite(v)) throw InvalidArgument("CEMB: non-finite embedding value");
    }
  }
}

}  // namespace

void write_cemb(std::ostream& out, const std::vector<ClassEmbedding>& entries) {
  check_entries(entries);
  BinaryWriter w(out);
  w.magic("CEMB");
  w.u16(kCembVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.u32(static_cast<std::uint32_t>(e.category_id));
    w.u32(static_cast<std::uint32_t>(e.vector.size()));
    w.f32s(std::span<const double>(e.vector));
  }
}

std::vector<ClassEmbedding> read_cemb(std::istream& in) {
  BinaryReader r(in, "CEMB");
  r.expect_magic("CEMB");
  r.expect_version(kCembVersion);
  const std::uint32_t count = r.u32();
  std::vector<ClassEmbedding> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    ClassEmbedding e;
    e.category_id = static_cast<int>(r.u32());
    const std::uint32_t d = r.u32();
    if (d == 0 || d > 65536) throw FormatError("CEMB entry " + std::to_string(i) + " has invalid dimension");
    e.vector = r.f32s_as_double(d);
    out.push_back(std::move(e));
  }
  r.expect_end();
  try {
    check_entries(out);
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
  return out;
}

void save_cemb(const std::string& path, const std::vector<ClassEmbedding>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  write_cemb(out, entries);
}

std::vector<ClassEmbedding> load_cemb(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("missing input file: " + path);
  return read_cemb(in);
}

}  // namespace pmf::ovc
