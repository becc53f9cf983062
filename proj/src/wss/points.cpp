#include "pmf/wss/points.hpp"

#include <algorithm>
#include <numeric>

namespace pmf::wss {

PointLabels sample_points(const Grid<float>& activation, int Z, RngStream& rng) {
  if (Z < 1) throw InvalidArgument("sample_points: Z must be >= 1");
  const std::size_t n = activation.size();
  if (n == 0) throw PatchTooSmallError("sample_points: empty patch");
  if (n < 2 * static_cast<std::size_t>(Z)) {
    throw PatchTooSmallError("sample_points: patch has " + std::to_string(n) + " pixels, need " +
                             std::to_string(2 * Z));
  }
  const auto [lo, hi] = std::minmax_element(activation.values().begin(), activation.values().end());
  if (*lo == *hi) throw UninformativeActivationError("sample_points: activation is constant inside the box");

  std::vector<std::uint64_t> key(n);
  for (auto& k : key) k = rng.next_u64();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (activation[a] != activation[b]) return activation[a] > activation[b];
    if (key[a] != key[b]) return key[a] < key[b];
    return a < b;
  });
  PointLabels out;
  out.Z = Z;
  const int w = activation.width();
  for (int k = 0; k < Z; ++k) {
    const std::size_t p = order[k];
    out.points.push_back({static_cast<int>(p % w), static_cast<int>(p / w), 1});
  }
  for (int k = 0; k < Z; ++k) {
    const std::size_t p = order[n - 1 - k];
    out.points.push_back({static_cast<int>(p % w), static_cast<int>(p / w), 0});
  }
  return out;
}

}  // namespace pmf::wss
