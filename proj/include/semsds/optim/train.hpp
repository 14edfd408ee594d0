#pragma once

#include "semsds/guidance/oracle.hpp"
#include "semsds/guidance/sds.hpp"
#include "semsds/guidance/schedule.hpp"
#include "semsds/layout/plan.hpp"
#include "semsds/optim/adam.hpp"
#include "semsds/optim/camera.hpp"
#include "semsds/optim/config.hpp"
#include "semsds/optim/density.hpp"
#include "semsds/semantic/codec.hpp"
#include "semsds/semantic/masks.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace semsds {

/// Scene with initialized Gaussians, the trained codec and every region
/// subprompt (RegionId = (object, region)).
struct TrainingSetup {
  Scene scene;
  EmbeddingCodec codec;
  SubpromptSet prompts;
};

/// Builds the scene from the plan, embeds every region subprompt, trains
/// the codec on the distinct embeddings and initializes each object with
/// Gaussians carrying their region's compressed embedding.
TrainingSetup prepare_training(const Plan& plan, const TrainConfig& config);

/// Oracle from the config. Analytic targets cover every subprompt, object
/// prompt and the scene prompt (unlisted prompts get analytic_default).
std::shared_ptr<GuidanceOracle> make_oracle(const TrainConfig& config, const Scene& scene);

struct RegionColor {
  RegionId id;
  std::string subprompt;
  Vec3 mean = Vec3::Zero();
  std::size_t pixels = 0;
};

/// Mean rendered color inside each region's raw mask, pooled over `cameras`.
std::vector<RegionColor> evaluate_regions(const Scene& scene, const EmbeddingCodec& codec,
                                          const SubpromptSet& prompts, const std::vector<Camera>& cameras,
                                          double background_alpha = 0.05);

/// `count` cameras evenly spaced in azimuth around `target`, framed like
/// the training cameras (fov 50 degrees, distance factor 1.15).
std::vector<Camera> turntable_cameras(const CameraTarget& target, int count, int size,
                                      double elevation_deg = 20.0);
std::vector<Camera> turntable_cameras(const Scene& scene, int count, int size, double elevation_deg = 20.0);

/// Turntables around every object's world center, `count` views each.
std::vector<Camera> object_cameras(const Scene& scene, int count, int size, double elevation_deg = 20.0);

/// Writes turntable PNGs `<prefix>_<i>.png` into `dir`.
void write_turntable(const Scene& scene, const std::filesystem::path& dir, const std::string& prefix, int size,
                     int count = 8);

/// The alternating local/global Semantic-SDS loop. Owns the scene.
class Trainer {
 public:
  Trainer(TrainingSetup setup, TrainConfig config, std::shared_ptr<GuidanceOracle> oracle);

  /// Restores a checkpoint written by save_checkpoint. Moments restart at zero.
  static Trainer resume(const std::filesystem::path& dir, std::shared_ptr<GuidanceOracle> oracle,
                        const std::optional<TrainConfig>& config = std::nullopt);

  /// One optimization step; returns its metrics line.
  nlohmann::json step();

  /// Runs until `config.iterations` steps have been taken. `on_metrics` sees
  /// every line. Intermediate checkpoints and previews go to `out_dir` when
  /// given. On a failure a checkpoint is saved before rethrowing.
  void run(const std::function<void(const nlohmann::json&)>& on_metrics = {},
           const std::optional<std::filesystem::path>& out_dir = std::nullopt);

  /// scene.json + payloads, codec.aec, config.json, state.json.
  void save_checkpoint(const std::filesystem::path& dir) const;

  int current_step() const { return step_; }
  const Scene& scene() const { return scene_; }
  const EmbeddingCodec& codec() const { return codec_; }
  const SubpromptSet& prompts() const { return prompts_; }
  const TrainConfig& config() const { return config_; }
  const std::vector<nlohmann::json>& metrics() const { return metrics_; }

 private:
  nlohmann::json density_control(int step);

  Scene scene_;
  EmbeddingCodec codec_;
  SubpromptSet prompts_;
  TrainConfig config_;
  std::shared_ptr<GuidanceOracle> oracle_;
  NoiseSchedule schedule_;
  std::unique_ptr<OracleAdapter> adapter_;
  std::vector<ObjectOptimizer> optimizers_;
  std::vector<DensityStats> stats_;
  std::mt19937_64 rng_;
  int step_ = 0;
  int local_counter_ = 0;
  std::vector<nlohmann::json> metrics_;
};

}  // namespace semsds
