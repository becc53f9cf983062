#include "pmf/core/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "pmf/core/errors.hpp"

namespace pmf {

std::string to_string(UpsampleMode mode) {
  return mode == UpsampleMode::kNearest ? "nearest" : "bilinear";
}
std::string to_string(GuidanceSum mode) { return mode == GuidanceSum::kBinary ? "binary" : "soft"; }
std::string to_string(BgWeightMode mode) { return mode == BgWeightMode::kLogit ? "logit" : "loss"; }
std::string to_string(ActivationSource source) {
  switch (source) {
    case ActivationSource::kToyVlm: return "toy-vlm";
    case ActivationSource::kOracleStub: return "oracle-stub";
    case ActivationSource::kFile: return "file";
  }
  return "unknown";
}

UpsampleMode parse_upsample_mode(const std::string& text) {
  if (text == "nearest") return UpsampleMode::kNearest;
  if (text == "bilinear") return UpsampleMode::kBilinear;
  throw ConfigError("upsample", "unknown mode '" + text + "'");
}
GuidanceSum parse_guidance_sum(const std::string& text) {
  if (text == "binary") return GuidanceSum::kBinary;
  if (text == "soft") return GuidanceSum::kSoft;
  throw ConfigError("guidance_sum", "unknown mode '" + text + "'");
}
BgWeightMode parse_bg_weight_mode(const std::string& text) {
  if (text == "logit") return BgWeightMode::kLogit;
  if (text == "loss") return BgWeightMode::kLoss;
  throw ConfigError("bg_weight_mode", "unknown mode '" + text + "'");
}
ActivationSource parse_activation_source(const std::string& text) {
  if (text == "toy-vlm") return ActivationSource::kToyVlm;
  if (text == "oracle-stub") return ActivationSource::kOracleStub;
  if (text == "file") return ActivationSource::kFile;
  throw ConfigError("activation_source", "unknown source '" + text + "'");
}

namespace {

void check_schedule(const TrainSchedule& s, const std::string& prefix) {
  if (s.iters < 0) throw ConfigError(prefix + "_iters", "must be >= 0");
  if (!(s.lr >= 0.0)) throw ConfigError(prefix + "_lr", "must be >= 0");
  if (!(s.weight_decay >= 0.0)) throw ConfigError(prefix + "_weight_decay", "must be >= 0");
  if (!(s.momentum >= 0.0 && s.momentum < 1.0)) throw ConfigError(prefix + "_momentum", "must be in [0,1)");
}

using Setter = std::function<void(PipelineConfig&, const nlohmann::json&)>;

template <typename T>
Setter assign(T PipelineConfig::*field) {
  return [field](PipelineConfig& c, const nlohmann::json& v) { c.*field = v.get<T>(); };
}

Setter assign_schedule(TrainSchedule PipelineConfig::*sched, int TrainSchedule::*field) {
  return [=](PipelineConfig& c, const nlohmann::json& v) { (c.*sched).*field = v.get<int>(); };
}
Setter assign_schedule(TrainSchedule PipelineConfig::*sched, double TrainSchedule::*field) {
  return [=](PipelineConfig& c, const nlohmann::json& v) { (c.*sched).*field = v.get<double>(); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", assign(&PipelineConfig::seed)},
      {"m", assign(&PipelineConfig::m)},
      {"G", assign(&PipelineConfig::G)},
      {"K", assign(&PipelineConfig::K)},
      {"Z", assign(&PipelineConfig::Z)},
      {"threshold", assign(&PipelineConfig::threshold)},
      {"bg_weight", assign(&PipelineConfig::bg_weight)},
      {"bg_weight_mode",
       [](PipelineConfig& c, const nlohmann::json& v) { c.bg_weight_mode = parse_bg_weight_mode(v.get<std::string>()); }},
      {"box_upsample",
       [](PipelineConfig& c, const nlohmann::json& v) { c.box_upsample = parse_upsample_mode(v.get<std::string>()); }},
      {"point_upsample",
       [](PipelineConfig& c, const nlohmann::json& v) { c.point_upsample = parse_upsample_mode(v.get<std::string>()); }},
      {"guidance_sum",
       [](PipelineConfig& c, const nlohmann::json& v) { c.guidance_sum = parse_guidance_sum(v.get<std::string>()); }},
      {"activation_source",
       [](PipelineConfig& c, const nlohmann::json& v) {
         c.activation_source = parse_activation_source(v.get<std::string>());
       }},
      {"downsample", assign(&PipelineConfig::downsample)},
      {"oracle_noise", assign(&PipelineConfig::oracle_noise)},
      {"oracle_spread", assign(&PipelineConfig::oracle_spread)},
      {"wspn_iters", assign_schedule(&PipelineConfig::wspn, &TrainSchedule::iters)},
      {"wspn_lr", assign_schedule(&PipelineConfig::wspn, &TrainSchedule::lr)},
      {"wspn_weight_decay", assign_schedule(&PipelineConfig::wspn, &TrainSchedule::weight_decay)},
      {"wspn_momentum", assign_schedule(&PipelineConfig::wspn, &TrainSchedule::momentum)},
      {"wspn_hidden", assign(&PipelineConfig::wspn_hidden)},
      {"wss_iters", assign_schedule(&PipelineConfig::wss, &TrainSchedule::iters)},
      {"wss_lr", assign_schedule(&PipelineConfig::wss, &TrainSchedule::lr)},
      {"embed_iters", assign_schedule(&PipelineConfig::embed, &TrainSchedule::iters)},
      {"embed_lr", assign_schedule(&PipelineConfig::embed, &TrainSchedule::lr)},
      {"embed_weight_decay", assign_schedule(&PipelineConfig::embed, &TrainSchedule::weight_decay)},
      {"embed_momentum", assign_schedule(&PipelineConfig::embed, &TrainSchedule::momentum)},
      {"max_skip_fraction", assign(&PipelineConfig::max_skip_fraction)},
      {"image_size", assign(&PipelineConfig::image_size)},
      {"num_images", assign(&PipelineConfig::num_images)},
      {"occlusion_rate", assign(&PipelineConfig::occlusion_rate)},
  };
  return table;
}

}  // namespace

void PipelineConfig::validate() const {
  if (m < 1) throw ConfigError("m", "cross-attention layer index must be >= 1");
  if (G < 0) throw ConfigError("G", "masking iterations must be >= 0");
  if (K < 1) throw ConfigError("K", "top proposal count must be >= 1");
  if (Z < 1) throw ConfigError("Z", "points per polarity must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold", "must satisfy 0 < threshold < 1");
  if (!(bg_weight > 0.0 && bg_weight <= 1.0)) throw ConfigError("bg_weight", "must be in (0,1]");
  if (downsample < 1) throw ConfigError("downsample", "must be >= 1");
  if (!(oracle_noise >= 0.0)) throw ConfigError("oracle_noise", "must be >= 0");
  if (!(oracle_spread > 0.0)) throw ConfigError("oracle_spread", "must be > 0");
  check_schedule(wspn, "wspn");
  if (wspn_hidden < 1) throw ConfigError("wspn_hidden", "must be >= 1");
  check_schedule(wss, "wss");
  check_schedule(embed, "embed");
  if (!(max_skip_fraction >= 0.0 && max_skip_fraction <= 1.0)) {
    throw ConfigError("max_skip_fraction", "must be in [0,1]");
  }
  if (image_size < 32) throw ConfigError("image_size", "must be >= 32");
  if (num_images < 1) throw ConfigError("num_images", "must be >= 1");
  if (!(occlusion_rate >= 0.0 && occlusion_rate <= 1.0)) {
    throw ConfigError("occlusion_rate", "must be in [0,1]");
  }
}

nlohmann::json PipelineConfig::to_json() const {
  return {
      {"version", kVersion},
      {"seed", seed},
      {"m", m},
      {"G", G},
      {"K", K},
      {"Z", Z},
      {"threshold", threshold},
      {"bg_weight", bg_weight},
      {"bg_weight_mode", to_string(bg_weight_mode)},
      {"box_upsample", to_string(box_upsample)},
      {"point_upsample", to_string(point_upsample)},
      {"guidance_sum", to_string(guidance_sum)},
      {"activation_source", to_string(activation_source)},
      {"downsample", downsample},
      {"oracle_noise", oracle_noise},
      {"oracle_spread", oracle_spread},
      {"wspn_iters", wspn.iters},
      {"wspn_lr", wspn.lr},
      {"wspn_weight_decay", wspn.weight_decay},
      {"wspn_momentum", wspn.momentum},
      {"wspn_hidden", wspn_hidden},
      {"wss_iters", wss.iters},
      {"wss_lr", wss.lr},
      {"embed_iters", embed.iters},
      {"embed_lr", embed.lr},
      {"embed_weight_decay", embed.weight_decay},
      {"embed_momentum", embed.momentum},
      {"max_skip_fraction", max_skip_fraction},
      {"image_size", image_size},
      {"num_images", num_images},
      {"occlusion_rate", occlusion_rate},
  };
}

PipelineConfig PipelineConfig::merged(const nlohmann::json& overrides) const {
  if (!overrides.is_object()) throw FormatError("config must be a JSON object");
  PipelineConfig out = *this;
  for (const auto& [key, value] : overrides.items()) {
    if (key == "version") continue;
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(key, "unknown config key");
    try {
      it->second(out, value);
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError(key, std::string("wrong value type: ") + ex.what());
    }
  }
  out.validate();
  return out;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  if (!j.contains("version")) throw ConfigError("version", "missing version field");
  const auto& v = j.at("version");
  if (!v.is_number_integer()) throw ConfigError("version", "must be an integer");
  if (v.get<int>() != kVersion) throw VersionError("config", v.get<unsigned>(), kVersion);
  return PipelineConfig{}.merged(j);
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("config " + path + ": " + ex.what());
  }
  return from_json(j);
}

}  // namespace pmf
