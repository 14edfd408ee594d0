#pragma once

#include "semsds/core/init.hpp"
#include "semsds/semantic/codec.hpp"
#include "semsds/semantic/embedding.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace semsds {

struct LearningRates {
  double mean = 2e-4;
  double scale = 1e-3;  // on log scale
  double rotation = 1e-3;
  double opacity = 5e-2;  // on the opacity logit
  double color = 1e-2;
  double semantic = 1e-3;  // used only when semantic_trainable
  double transform_scale = 1e-4;
  double transform_rotation = 1e-4;
  double transform_translation = 1e-4;
};

struct DensifyConfig {
  int interval = 100;
  int start = 100;
  int until = 1500;
  double grad_threshold = 2.0;        // T_pos, mean view-space gradient norm in NDC units
  double clone_scale_fraction = 0.01;  // clone when world max scale <= this x scene diagonal
  double split_factor = 1.6;
  int split_samples = 2;
  int compactness_interval = 2000;
  int max_gaussians_per_object = 20000;
};

struct PruneConfig {
  int interval = 200;
  double alpha_min = 0.3;
  double world_radius_fraction = 0.1;   // of the scene bounding-box diagonal
  double screen_radius_fraction = 0.2;  // of the image diagonal
};

struct CameraConfig {
  double elevation_min = -10.0;  // degrees
  double elevation_max = 70.0;
  double azimuth_min = -180.0;
  double azimuth_max = 180.0;
  double fov_min = 40.0;
  double fov_max = 70.0;
  double distance_min = 1.0;  // multiples of radius / sin(fov / 2)
  double distance_max = 1.3;
  int width = 128;
  int height = 128;
};

struct ViewConfig {
  double overhead_elevation = 60.0;
  double front_half_angle = 45.0;
  bool object_frame = false;  // measure azimuth in the object's rotated frame
};

struct OracleConfig {
  std::string kind = "analytic";  // analytic, remote, recorded
  std::string url;                // remote; GUIDANCE_URL when empty
  std::string recording;          // recorded: JSON-lines fixture
  std::string record_to;          // append every call to this fixture
  double cfg_scale = 7.5;
  std::map<std::string, std::vector<double>> analytic_targets;  // prompt -> RGB
  std::vector<double> analytic_default = {0.0, 0.0, 0.0};
};

struct GuidanceConfig {
  int steps = 1000;
  double beta_start = 8.5e-4;
  double beta_end = 1.2e-2;
  std::string weighting = "one_minus_alpha_bar";  // or "constant"
  int t_min = 20;
  int t_max = 980;
  double tau = 0.01;
  int pool_dilation = 5;
  double background_alpha = 0.05;
  OracleConfig oracle;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  int iterations = 2000;
  int local_steps = 1;  // per alternation cycle
  int global_steps = 1;
  double pair_fraction = 0.5;  // share of global steps that render an object pair
  bool semantic_trainable = false;
  LearningRates lr;
  DensifyConfig densify;
  PruneConfig prune;
  CameraConfig camera;
  ViewConfig view;
  GuidanceConfig guidance;
  InitOptions init;
  EmbeddingConfig embedding;
  CodecTrainOptions codec;
  int checkpoint_every = 0;  // 0 disables intermediate checkpoints
  int preview_every = 0;     // 0 disables intermediate turntables
  int preview_size = 128;

  /// Throws Error(Configuration) naming the first offending field.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" overrides. The value is parsed as JSON when
/// possible and taken as a string otherwise.
TrainConfig apply_overrides(const TrainConfig& config, const std::vector<std::string>& overrides);

}  // namespace semsds
