#include "pmf/actmap/amap_io.hpp"

#include <fstream>
#include <map>

#include "pmf/core/binio.hpp"

namespace pmf::actmap {

void write_amap(std::ostream& out, std::span<const ActivationMap> maps) {
  BinaryWriter w(out);
  w.magic("AMAP");
  w.u16(kAmapVersion);
  w.u32(static_cast<std::uint32_t>(maps.size()));
  for (const auto& m : maps) {
    m.validate();
    if (m.category_id < 0) throw InvalidArgument("AMAP category ids must be non-negative");
    w.u32(static_cast<std::uint32_t>(m.category_id));
    w.u32(static_cast<std::uint32_t>(m.height()));
    w.u32(static_cast<std::uint32_t>(m.width()));
    w.f32s(m.values.values());
  }
}

std::vector<ActivationMap> read_amap(std::istream& in) {
  BinaryReader r(in, "AMAP");
  r.expect_magic("AMAP");
  r.expect_version(kAmapVersion);
  const std::uint32_t count = r.u32();
  std::vector<ActivationMap> maps;
  std::map<int, int> seen;
  for (std::uint32_t e = 0; e < count; ++e) {
    ActivationMap m;
    m.category_id = static_cast<int>(r.u32());
    const std::uint32_t h = r.u32(), w = r.u32();
    if (h == 0 || w == 0 || h > 4096 || w > 4096) {
      throw FormatError("AMAP entry " + std::to_string(e) + " has invalid grid size");
    }
    m.values = Grid<float>(static_cast<int>(h), static_cast<int>(w),
                           r.f32s(static_cast<std::size_t>(h) * w));
    m.iteration = seen[m.category_id]++;
    try {
      m.validate();
    } catch (const InvalidArgument& ex) {
      throw FormatError("AMAP entry " + std::to_string(e) + ": " + ex.what());
    }
    maps.push_back(std::move(m));
  }
  r.expect_end();
  return maps;
}

void save_amap(const std::string& path, std::span<const ActivationMap> maps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  write_amap(out, maps);
  if (!out) throw Error("write failed: " + path);
}

std::vector<ActivationMap> load_amap(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("missing input file: " + path);
  return read_amap(in);
}

void validate_amap(const std::string& path) { (void)load_amap(path); }

}  // namespace pmf::actmap
