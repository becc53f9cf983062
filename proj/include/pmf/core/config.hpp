#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace pmf {

enum class UpsampleMode { kNearest, kBilinear };
enum class GuidanceSum { kBinary, kSoft };
enum class BgWeightMode { kLogit, kLoss };
enum class ActivationSource { kToyVlm, kOracleStub, kFile };

std::string to_string(UpsampleMode mode);
std::string to_string(GuidanceSum mode);
std::string to_string(BgWeightMode mode);
std::string to_string(ActivationSource source);
UpsampleMode parse_upsample_mode(const std::string& text);
GuidanceSum parse_guidance_sum(const std::string& text);
BgWeightMode parse_bg_weight_mode(const std::string& text);
ActivationSource parse_activation_source(const std::string& text);

struct TrainSchedule {
  int iters = 0;
  double lr = 0.0;
  double weight_decay = 0.0;
  double momentum = 0.0;
};

/// Every tunable of the pseudo-annotation pipeline. Defaults follow the
/// reference hyper-parameters, with training schedules scaled to desk size.
struct PipelineConfig {
  static constexpr int kVersion = 1;

  std::uint64_t seed = 0;

  int m = 8;                 // cross-attention layer used for GradCAM
  int G = 3;                 // masking iterations after the unmasked pass
  int K = 50;                // top proposals kept as pseudo-box candidates
  int Z = 10;                // sampled points per polarity
  double threshold = 0.5;    // activation cutoff after max-normalization
  double bg_weight = 0.2;
  BgWeightMode bg_weight_mode = BgWeightMode::kLogit;

  UpsampleMode box_upsample = UpsampleMode::kNearest;
  UpsampleMode point_upsample = UpsampleMode::kBilinear;
  GuidanceSum guidance_sum = GuidanceSum::kBinary;
  ActivationSource activation_source = ActivationSource::kOracleStub;
  int downsample = 16;       // pixels per feature-grid cell

  double oracle_noise = 0.1;
  double oracle_spread = 0.35;

  TrainSchedule wspn{2000, 0.001, 0.0001, 0.9};
  int wspn_hidden = 32;
  TrainSchedule wss{500, 0.25, 0.0, 0.0};
  TrainSchedule embed{1500, 0.05, 0.0001, 0.9};

  double max_skip_fraction = 0.5;

  // Synthetic data generation.
  int image_size = 128;
  int num_images = 50;
  double occlusion_rate = 0.0;

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;

  nlohmann::json to_json() const;
  /// Flat JSON with a "version" field; unknown keys are rejected. Missing keys
  /// keep their defaults. The result is validated.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::string& path);

  /// Applies the keys present in `overrides` on top of this config.
  PipelineConfig merged(const nlohmann::json& overrides) const;
};

}  // namespace pmf
