#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pmf/core/activation.hpp"

namespace pmf::actmap {

inline constexpr std::uint16_t kAmapVersion = 1;

/// "AMAP" container: magic, u16 version, u32 count, then per entry
/// {u32 category_id, u32 h_f, u32 w_f, h_f*w_f little-endian f32 row-major}.
/// Entries carry no iteration field; readers number consecutive entries of
/// the same category 0, 1, 2, ... in file order.
void write_amap(std::ostream& out, std::span<const ActivationMap> maps);
std::vector<ActivationMap> read_amap(std::istream& in);
void save_amap(const std::string& path, std::span<const ActivationMap> maps);
std::vector<ActivationMap> load_amap(const std::string& path);

/// Parses and checks every entry (non-negative, finite, non-empty grid).
/// Throws FormatError / VersionError / InvalidArgument.
void validate_amap(const std::string& path);

}  // namespace pmf::actmap
