#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pmf/core/activation.hpp"
#include "pmf/core/matrix.hpp"
#include "pmf/core/rng.hpp"

namespace pmf::vlm {

/// Region representations on the feature grid, one row per cell (row-major
/// over the h_f x w_f grid).
struct FeatureGrid {
  int grid_height = 0;
  int grid_width = 0;
  int downsample = 16;
  Matrix regions;  // N_R x d

  int num_regions() const noexcept { return regions.rows(); }
  int dim() const noexcept { return regions.cols(); }
  void validate() const;
};

/// Token sequence of a caption, including start/end markers.
struct TextSeq {
  std::vector<int> tokens;
  Matrix embeddings;     // N_c x d
  int object_index = 0;  // position of the object-of-interest token

  void validate() const;
};

struct LayerParams {
  Matrix query;  // d x d
  Matrix key;    // d x d
  Matrix value;  // d x d
};

/// Multi-modal encoder of M single-head cross-attention layers followed by
/// a linear similarity head S = w . h^M + b.
///
/// Layer l:  X^l = softmax( (Wq h^{l-1}) . (Wk r_i) / sqrt(d) )  over regions i
///           h^l = h^{l-1} + sum_i X^l_i (Wv r_i)
/// with h^0 the embedding of the object token.
struct VlmParams {
  static constexpr std::uint16_t kVersion = 1;

  int dim = 0;
  std::vector<LayerParams> layers;
  std::vector<double> similarity_weights;
  double similarity_bias = 0.0;
  Matrix token_embeddings;  // vocab x d

  int num_layers() const noexcept { return static_cast<int>(layers.size()); }
  double scale() const;
  void validate() const;

  /// Gaussian-initialised parameters; projections have std 1/sqrt(d).
  static VlmParams random(int num_layers, int dim, int vocab, RngStream& rng);
  TextSeq embed_tokens(std::vector<int> tokens, int object_index) const;
};

struct AttentionTrace {
  std::vector<std::vector<double>> attention;  // attention[l-1] = X^l, l = 1..M
  std::vector<std::vector<double>> hidden;     // hidden[l] = h^l, l = 0..M
  double similarity = 0.0;
};

/// Throws ShapeError on inconsistent dimensions.
AttentionTrace forward(const VlmParams& params, const FeatureGrid& features, const TextSeq& text);

/// S recomputed with X^layer replaced by `attention` (taken as free variables,
/// not renormalised), propagating through layers layer+1..M. Uses the
/// trace's h^{layer-1}.
double similarity_with_attention(const VlmParams& params, const FeatureGrid& features,
                                 const AttentionTrace& trace, int layer,
                                 std::span<const double> attention);

/// dS/dX^layer by reverse-mode differentiation through layers layer..M.
std::vector<double> attention_gradient(const VlmParams& params, const FeatureGrid& features,
                                       const AttentionTrace& trace, int layer);

/// phi = X^layer * max(dS/dX^layer, 0), reshaped onto the feature grid.
/// Throws InvalidArgument when layer is outside [1, M].
ActivationMap gradcam(const VlmParams& params, const FeatureGrid& features, const TextSeq& text,
                      int layer, int category_id = 0);

/// "TVLM" container: magic, u16 version, u32 layers, u32 dim, u32 vocab,
/// then little-endian f32 payload (per layer q,k,v; similarity weights;
/// bias; token embeddings).
void write_vlm(std::ostream& out, const VlmParams& params);
VlmParams read_vlm(std::istream& in);
void save_vlm(const std::string& path, const VlmParams& params);
VlmParams load_vlm(const std::string& path);

}  // namespace pmf::vlm
