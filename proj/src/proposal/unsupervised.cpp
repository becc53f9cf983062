#include <algorithm>
#include <cmath>
#include <set>

#include "pmf/core/annotations.hpp"
#include "pmf/proposal/proposals.hpp"

namespace pmf::proposal {

std::string to_string(ProposalSource source) {
  switch (source) {
    case ProposalSource::kUnsupervised: return "unsupervised";
    case ProposalSource::kWspn: return "wspn";
    case ProposalSource::kProxy: return "proxy";
  }
  return "unknown";
}

ProposalSource parse_proposal_source(const std::string& text) {
  if (text == "unsupervised") return ProposalSource::kUnsupervised;
  if (text == "wspn") return ProposalSource::kWspn;
  if (text == "proxy") return ProposalSource::kProxy;
  throw FormatError("unknown proposal source '" + text + "'");
}

namespace {

struct Component {
  int area = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive

  BBox box() const {
    return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 - x0 + 1),
            static_cast<double>(y1 - y0 + 1)};
  }
};

bool similar(const ImageGrid& img, int a, int b, double tol) {
  const auto data = img.data();
  for (int c = 0; c < 3; ++c) {
    if (std::abs(data[static_cast<std::size_t>(a) * 3 + c] - data[static_cast<std::size_t>(b) * 3 + c]) > tol) {
      return false;
    }
  }
  return true;
}

/// Boxes of the components at one tolerance plus unions of adjacent pairs.
void component_boxes(const ImageGrid& img, double tol, const UnsupervisedOptions& opt, std::vector<BBox>& singles,
                     std::vector<BBox>& pairs) {
  const int H = img.height(), W = img.width();
  std::vector<int> label(static_cast<std::size_t>(H) * W, -1);
  std::vector<Component> comps;
  std::vector<int> stack;
  for (int start = 0; start < H * W; ++start) {
    if (label[start] >= 0) continue;
    const int id = static_cast<int>(comps.size());
    Component c;
    c.x0 = c.x1 = start % W;
    c.y0 = c.y1 = start / W;
    label[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % W, y = p / W;
      ++c.area;
      c.x0 = std::min(c.x0, x);
      c.x1 = std::max(c.x1, x);
      c.y0 = std::min(c.y0, y);
      c.y1 = std::max(c.y1, y);
      const int nbr[4] = {x > 0 ? p - 1 : -1, x + 1 < W ? p + 1 : -1, y > 0 ? p - W : -1, y + 1 < H ? p + W : -1};
      for (const int q : nbr) {
        if (q < 0 || label[q] >= 0 || !similar(img, p, q, tol)) continue;
        label[q] = id;
        stack.push_back(q);
      }
    }
    comps.push_back(c);
  }

  const double image_area = static_cast<double>(H) * W;
  std::vector<char> keep(comps.size(), 0);
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const BBox b = comps[i].box();
    keep[i] = comps[i].area >= opt.min_component_area && b.area() <= opt.max_cover_fraction * image_area;
    if (keep[i]) singles.push_back(b);
  }
  std::set<std::pair<int, int>> adjacent;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const int a = label[static_cast<std::size_t>(y) * W + x];
      if (!keep[a]) continue;
      for (const int b : {x + 1 < W ? label[static_cast<std::size_t>(y) * W + x + 1] : a,
                          y + 1 < H ? label[static_cast<std::size_t>(y + 1) * W + x] : a}) {
        if (b != a && keep[b]) adjacent.emplace(std::min(a, b), std::max(a, b));
      }
    }
  }
  for (const auto& [a, b] : adjacent) {
    const Component& ca = comps[a];
    const Component& cb = comps[b];
    Component u;
    u.x0 = std::min(ca.x0, cb.x0);
    u.y0 = std::min(ca.y0, cb.y0);
    u.x1 = std::max(ca.x1, cb.x1);
    u.y1 = std::max(ca.y1, cb.y1);
    const BBox box = u.box();
    if (box.area() <= opt.max_cover_fraction * image_area) pairs.push_back(box);
  }
}

}  // namespace

std::vector<BBox> sliding_windows(int image_height, int image_width, const std::vector<int>& sizes) {
  std::vector<BBox> out;
  auto positions = [](int extent, int size, int stride) {
    std::vector<int> pos;
    if (size >= extent) return std::vector<int>{0};
    for (int p = 0; p + size <= extent; p += stride) pos.push_back(p);
    if (pos.back() + size < extent) pos.push_back(extent - size);
    return pos;
  };
  for (const int s : sizes) {
    const int shapes[3][2] = {{s, s}, {s, std::max(1, s / 2)}, {std::max(1, s / 2), s}};
    for (const auto& wh : shapes) {
      const int w = std::min(wh[0], image_width), h = std::min(wh[1], image_height);
      for (const int y : positions(image_height, h, std::max(1, h / 2))) {
        for (const int x : positions(image_width, w, std::max(1, w / 2))) {
          out.push_back({static_cast<double>(x), static_cast<double>(y), static_cast<double>(w),
                         static_cast<double>(h)});
        }
      }
    }
  }
  return out;
}

std::vector<BBox> deduplicate(const std::vector<BBox>& boxes, double iou_threshold) {
  std::vector<BBox> kept;
  kept.reserve(boxes.size());
  for (const auto& b : boxes) {
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const BBox& k) { return iou(k, b) >= iou_threshold; });
    if (!dup) kept.push_back(b);
  }
  return kept;
}

ProposalSet unsupervised_proposals(const ImageGrid& image, RngStream& rng, const UnsupervisedOptions& options) {
  if (image.empty()) throw InvalidArgument("unsupervised_proposals: empty image");
  const int H = image.height(), W = image.width();
  std::vector<BBox> singles, pairs;
  for (const double tol : options.color_tolerances) component_boxes(image, tol, options, singles, pairs);

  std::vector<BBox> all = singles;
  all.insert(all.end(), pairs.begin(), pairs.end());
  for (const auto& b : singles) {
    for (int j = 0; j < options.jitter_per_box; ++j) {
      const double x0 = b.x + rng.normal(0.0, options.jitter_scale * b.w);
      const double y0 = b.y + rng.normal(0.0, options.jitter_scale * b.h);
      const double x1 = b.x2() + rng.normal(0.0, options.jitter_scale * b.w);
      const double y1 = b.y2() + rng.normal(0.0, options.jitter_scale * b.h);
      const BBox jb = clip_box({x0, y0, x1 - x0, y1 - y0}, H, W);
      if (jb.w >= 4.0 && jb.h >= 4.0) all.push_back(jb);
    }
  }
  const auto windows = sliding_windows(H, W, options.window_sizes);
  all.insert(all.end(), windows.begin(), windows.end());

  ProposalSet out;
  out.source = ProposalSource::kUnsupervised;
  out.boxes = deduplicate(all, options.dedup_iou);
  return out;
}

nlohmann::json proposals_to_json(const std::map<int, ProposalSet>& by_image) {
  nlohmann::json images = nlohmann::json::array();
  std::string source = "unsupervised";
  for (const auto& [id, set] : by_image) {
    source = to_string(set.source);
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < set.boxes.size(); ++i) {
      const auto& b = set.boxes[i];
      nlohmann::json e{{"bbox", {b.x, b.y, b.w, b.h}}};
      if (!set.scores.empty()) e["score"] = set.scores[i];
      list.push_back(std::move(e));
    }
    images.push_back({{"image_id", id}, {"proposals", std::move(list)}});
  }
  return {{"source", source}, {"images", std::move(images)}};
}

std::map<int, ProposalSet> proposals_from_json(const nlohmann::json& j) {
  std::map<int, ProposalSet> out;
  try {
    const ProposalSource source = parse_proposal_source(j.at("source").get<std::string>());
    for (const auto& img : j.at("images")) {
      ProposalSet set;
      set.source = source;
      for (const auto& p : img.at("proposals")) {
        const auto& b = p.at("bbox");
        if (!b.is_array() || b.size() != 4) throw FormatError("proposal bbox must have 4 numbers");
        set.boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
        if (p.contains("score")) set.scores.push_back(p["score"].get<double>());
      }
      if (!set.scores.empty() && set.scores.size() != set.boxes.size()) {
        throw FormatError("proposal scores must be given for all boxes or none");
      }
      out[img.at("image_id").get<int>()] = std::move(set);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed proposals file: ") + e.what());
  }
  return out;
}

void write_proposals(const std::string& path, const std::map<int, ProposalSet>& by_image) {
  write_text_file(path, proposals_to_json(by_image).dump(1) + "\n");
}

std::map<int, ProposalSet> read_proposals(const std::string& path) { return proposals_from_json(read_json_file(path)); }

}  // namespace pmf::proposal
