#include "pmf/vlm/toyvlm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pmf/core/binio.hpp"

namespace pmf::vlm {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (const double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + " contains a non-finite entry");
  }
}

void require_square(const Matrix& m, int dim, const char* what) {
  if (m.rows() != dim || m.cols() != dim) throw ShapeError(std::string(what) + " must be d x d");
}

/// Rows of `regions` mapped through `proj`: out_i = proj r_i.
Matrix project_regions(const Matrix& proj, const Matrix& regions) {
  Matrix out(regions.rows(), proj.rows());
  for (int i = 0; i < regions.rows(); ++i) {
    const auto r = regions.row(i);
    auto o = out.row(i);
    for (int a = 0; a < proj.rows(); ++a) o[a] = dot(proj.row(a), r);
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

struct LayerStep {
  std::vector<double> attention;
  std::vector<double> hidden;
};

/// One cross-attention layer applied to h_prev.
LayerStep attend(const VlmParams& params, const LayerParams& layer, const Matrix& keys,
                 const Matrix& values, std::span<const double> h_prev) {
  const std::vector<double> q = matvec(layer.query, h_prev);
  std::vector<double> logits(static_cast<std::size_t>(keys.rows()));
  const double scale = params.scale();
  for (int i = 0; i < keys.rows(); ++i) logits[i] = dot(q, keys.row(i)) / scale;
  LayerStep step;
  step.attention = softmax(logits);
  step.hidden.assign(h_prev.begin(), h_prev.end());
  for (int i = 0; i < values.rows(); ++i) {
    const auto v = values.row(i);
    for (int a = 0; a < params.dim; ++a) step.hidden[a] += step.attention[i] * v[a];
  }
  return step;
}

double similarity_head(const VlmParams& params, std::span<const double> h) {
  return dot(params.similarity_weights, h) + params.similarity_bias;
}

void check_inputs(const VlmParams& params, const FeatureGrid& features) {
  params.validate();
  features.validate();
  if (features.dim() != params.dim) throw ShapeError("region dimension differs from model dimension");
}

void check_layer(const VlmParams& params, int layer) {
  if (layer < 1 || layer > params.num_layers()) {
    throw InvalidArgument("cross-attention layer " + std::to_string(layer) + " outside [1, " +
                          std::to_string(params.num_layers()) + "]");
  }
}

}  // namespace

void FeatureGrid::validate() const {
  if (grid_height <= 0 || grid_width <= 0) throw ShapeError("feature grid must be non-empty");
  if (regions.rows() != grid_height * grid_width) throw ShapeError("N_R must equal h_f * w_f");
  if (regions.cols() <= 0) throw ShapeError("region dimension must be positive");
  require_finite(regions.data(), "region representations");
}

void TextSeq::validate() const {
  if (object_index < 0 || object_index >= embeddings.rows()) {
    throw InvalidArgument("object token index outside the caption");
  }
  if (!tokens.empty() && static_cast<int>(tokens.size()) != embeddings.rows()) {
    throw ShapeError("token count differs from embedding rows");
  }
  require_finite(embeddings.data(), "text embeddings");
}

double VlmParams::scale() const { return std::sqrt(static_cast<double>(dim)); }

void VlmParams::validate() const {
  if (dim <= 0) throw ShapeError("model dimension must be positive");
  if (layers.empty()) throw ShapeError("model needs at least one cross-attention layer");
  for (const auto& l : layers) {
    require_square(l.query, dim, "query projection");
    require_square(l.key, dim, "key projection");
    require_square(l.value, dim, "value projection");
  }
  if (static_cast<int>(similarity_weights.size()) != dim) throw ShapeError("similarity head must have d weights");
  if (token_embeddings.rows() > 0 && token_embeddings.cols() != dim) {
    throw ShapeError("token embeddings must have d columns");
  }
}

VlmParams VlmParams::random(int num_layers, int dim, int vocab, RngStream& rng) {
  VlmParams p;
  p.dim = dim;
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  auto fill = [&](Matrix& m, double stddev) {
    for (auto& v : m.data()) v = rng.normal(0.0, stddev);
  };
  for (int l = 0; l < num_layers; ++l) {
    LayerParams lp{Matrix(dim, dim), Matrix(dim, dim), Matrix(dim, dim)};
    fill(lp.query, s);
    fill(lp.key, s);
    fill(lp.value, s);
    p.layers.push_back(std::move(lp));
  }
  p.similarity_weights.resize(static_cast<std::size_t>(dim));
  for (auto& w : p.similarity_weights) w = rng.normal(0.0, s);
  p.similarity_bias = rng.normal(0.0, 0.1);
  p.token_embeddings = Matrix(vocab, dim);
  fill(p.token_embeddings, 1.0);
  return p;
}

TextSeq VlmParams::embed_tokens(std::vector<int> tokens, int object_index) const {
  TextSeq text;
  text.embeddings = Matrix(static_cast<int>(tokens.size()), dim);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= token_embeddings.rows()) {
      throw InvalidArgument("token id " + std::to_string(tokens[i]) + " outside the vocabulary");
    }
    const auto src = token_embeddings.row(tokens[i]);
    std::copy(src.begin(), src.end(), text.embeddings.row(static_cast<int>(i)).begin());
  }
  text.tokens = std::move(tokens);
  text.object_index = object_index;
  text.validate();
  return text;
}

AttentionTrace forward(const VlmParams& params, const FeatureGrid& features, const TextSeq& text) {
  check_inputs(params, features);
  text.validate();
  if (text.embeddings.cols() != params.dim) throw ShapeError("text dimension differs from model dimension");

  AttentionTrace trace;
  const auto h0 = text.embeddings.row(text.object_index);
  trace.hidden.emplace_back(h0.begin(), h0.end());
  for (const auto& layer : params.layers) {
    const Matrix keys = project_regions(layer.key, features.regions);
    const Matrix values = project_regions(layer.value, features.regions);
    LayerStep step = attend(params, layer, keys, values, trace.hidden.back());
    trace.attention.push_back(std::move(step.attention));
    trace.hidden.push_back(std::move(step.hidden));
  }
  trace.similarity = similarity_head(params, trace.hidden.back());
  return trace;
}

double similarity_with_attention(const VlmParams& params, const FeatureGrid& features,
                                 const AttentionTrace& trace, int layer,
                                 std::span<const double> attention) {
  check_inputs(params, features);
  check_layer(params, layer);
  if (static_cast<int>(attention.size()) != features.num_regions()) {
    throw ShapeError("attention vector length differs from N_R");
  }
  const auto& at_layer = params.layers[static_cast<std::size_t>(layer - 1)];
  const Matrix values = project_regions(at_layer.value, features.regions);
  std::vector<double> h = trace.hidden[static_cast<std::size_t>(layer - 1)];
  for (int i = 0; i < values.rows(); ++i) {
    const auto v = values.row(i);
    for (int a = 0; a < params.dim; ++a) h[a] += attention[i] * v[a];
  }
  for (int l = layer + 1; l <= params.num_layers(); ++l) {
    const auto& lp = params.layers[static_cast<std::size_t>(l - 1)];
    const Matrix keys = project_regions(lp.key, features.regions);
    const Matrix vals = project_regions(lp.value, features.regions);
    h = attend(params, lp, keys, vals, h).hidden;
  }
  return similarity_head(params, h);
}

std::vector<double> attention_gradient(const VlmParams& params, const FeatureGrid& features,
                                       const AttentionTrace& trace, int layer) {
  check_inputs(params, features);
  check_layer(params, layer);
  if (static_cast<int>(trace.attention.size()) != params.num_layers()) {
    throw ShapeError("trace does not match the model depth");
  }
  // g holds dS/dh^l while walking down from the top layer.
  std::vector<double> g = params.similarity_weights;
  const double scale = params.scale();
  for (int l = params.num_layers(); l > layer; --l) {
    const auto& lp = params.layers[static_cast<std::size_t>(l - 1)];
    const Matrix keys = project_regions(lp.key, features.regions);
    const Matrix values = project_regions(lp.value, features.regions);
    const auto& x = trace.attention[static_cast<std::size_t>(l - 1)];

    std::vector<double> g_x(x.size());
    double weighted = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      g_x[i] = dot(g, values.row(static_cast<int>(i)));
      weighted += x[i] * g_x[i];
    }
    std::vector<double> g_q(static_cast<std::size_t>(params.dim), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double g_logit = x[i] * (g_x[i] - weighted) / scale;
      const auto k = keys.row(static_cast<int>(i));
      for (int a = 0; a < params.dim; ++a) g_q[a] += g_logit * k[a];
    }
    const std::vector<double> through_query = matvec_transposed(lp.query, g_q);
    for (int a = 0; a < params.dim; ++a) g[a] += through_query[a];  // residual + query path
  }
  const auto& lp = params.layers[static_cast<std::size_t>(layer - 1)];
  const Matrix values = project_regions(lp.value, features.regions);
  std::vector<double> grad(static_cast<std::size_t>(features.num_regions()));
  for (int i = 0; i < features.num_regions(); ++i) grad[i] = dot(g, values.row(i));
  return grad;
}

ActivationMap gradcam(const VlmParams& params, const FeatureGrid& features, const TextSeq& text,
                      int layer, int category_id) {
  check_layer(params, layer);
  const AttentionTrace trace = forward(params, features, text);
  const std::vector<double> grad = attention_gradient(params, features, trace, layer);
  const auto& x = trace.attention[static_cast<std::size_t>(layer - 1)];
  ActivationMap map;
  map.category_id = category_id;
  map.values = Grid<float>(features.grid_height, features.grid_width, 0.0f);
  for (std::size_t i = 0; i < x.size(); ++i) {
    map.values[i] = static_cast<float>(x[i] * std::max(grad[i], 0.0));
  }
  return map;
}

void write_vlm(std::ostream& out, const VlmParams& params) {
  params.validate();
  BinaryWriter w(out);
  w.magic("TVLM");
  w.u16(VlmParams::kVersion);
  w.u32(static_cast<std::uint32_t>(params.num_layers()));
  w.u32(static_cast<std::uint32_t>(params.dim));
  w.u32(static_cast<std::uint32_t>(params.token_embeddings.rows()));
  for (const auto& l : params.layers) {
    w.f32s(l.query.data());
    w.f32s(l.key.data());
    w.f32s(l.value.data());
  }
  w.f32s(std::span<const double>(params.similarity_weights));
  w.f32(static_cast<float>(params.similarity_bias));
  w.f32s(params.token_embeddings.data());
}

VlmParams read_vlm(std::istream& in) {
  BinaryReader r(in, "TVLM");
  r.expect_magic("TVLM");
  r.expect_version(VlmParams::kVersion);
  const auto layers = r.u32();
  const auto dim = r.u32();
  const auto vocab = r.u32();
  if (layers == 0 || dim == 0 || dim > 4096 || layers > 256 || vocab > (1u << 20)) {
    throw FormatError("TVLM: implausible dimensions");
  }
  VlmParams p;
  p.dim = static_cast<int>(dim);
  auto read_matrix = [&](int rows, int cols) {
    Matrix m(rows, cols);
    const auto vals = r.f32s_as_double(static_cast<std::size_t>(rows) * cols);
    std::copy(vals.begin(), vals.end(), m.data().begin());
    return m;
  };
  for (std::uint32_t l = 0; l < layers; ++l) {
    LayerParams lp;
    lp.query = read_matrix(p.dim, p.dim);
    lp.key = read_matrix(p.dim, p.dim);
    lp.value = read_matrix(p.dim, p.dim);
    p.layers.push_back(std::move(lp));
  }
  p.similarity_weights = r.f32s_as_double(dim);
  p.similarity_bias = r.f32();
  p.token_embeddings = read_matrix(static_cast<int>(vocab), p.dim);
  r.expect_end();
  p.validate();
  return p;
}

void save_vlm(const std::string& path, const VlmParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  write_vlm(out, params);
}

VlmParams load_vlm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("missing input file: " + path);
  return read_vlm(in);
}

}  // namespace pmf::vlm
