#include "doctest.h"

#include "semsds/error.hpp"
#include "semsds/optim/adam.hpp"
#include "semsds/optim/camera.hpp"
#include "semsds/optim/config.hpp"
#include "semsds/optim/density.hpp"
#include "semsds/optim/train.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace semsds;

namespace {

Vec3 direction(double elevation_deg, double azimuth_deg) {
  const double e = elevation_deg * std::numbers::pi / 180.0;
  const double a = azimuth_deg * std::numbers::pi / 180.0;
  return Vec3(std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e));
}

ViewLabel label_at(double elevation_deg, double azimuth_deg, const ViewConfig& cfg = {}) {
  const Vec3 center(0.5, -1.0, 0.25);
  return select_view_descriptor(center + 3.0 * direction(elevation_deg, azimuth_deg), center, "o", cfg).label;
}

ObjectModel line_object(int n, double spacing, double scale) {
  ObjectModel o;
  o.id = "line";
  o.prompt = "line";
  o.regions.push_back({"r", {Vec3::Constant(-10), Vec3::Constant(10)}});
  for (int i = 0; i < n; ++i) {
    Gaussian3D g;
    g.mean = Vec3(spacing * i, 0, 0);
    g.scale = Vec3::Constant(scale);
    g.opacity = 0.9;
    g.color = Vec3(0.1 * i, 0.2, 0.3);
    g.semantic = {double(i), -double(i)};
    g.region = {0, 0};
    o.gaussians.push_back(g);
  }
  return o;
}

TrainConfig small_config() {
  TrainConfig c = load_config(SEMSDS_DATA_DIR "/configs/region_recovery.json");
  c.iterations = 6;
  c.camera.width = 32;
  c.camera.height = 32;
  c.init.count = 40;
  c.codec.epochs = 20;
  c.densify.interval = 2;
  c.densify.start = 2;
  c.prune.interval = 3;
  c.preview_size = 16;
  c.validate();
  return c;
}

Trainer make_trainer(const TrainConfig& cfg) {
  const Plan plan = load_plan(SEMSDS_DATA_DIR "/fixtures/plans/two_cubes.json");
  auto setup = prepare_training(plan, cfg);
  auto oracle = make_oracle(cfg, setup.scene);
  return Trainer(std::move(setup), cfg, oracle);
}

}  // namespace

TEST_CASE("view descriptors switch at 60 degrees elevation and 45 degrees azimuth") {
  CHECK(label_at(60.5, 0) == ViewLabel::Overhead);
  CHECK(label_at(59.5, 0) == ViewLabel::Front);
  CHECK(label_at(89.0, 170) == ViewLabel::Overhead);
  CHECK(label_at(0, 44.5) == ViewLabel::Front);
  CHECK(label_at(0, -44.5) == ViewLabel::Front);
  CHECK(label_at(0, 45.5) == ViewLabel::Side);
  CHECK(label_at(0, -45.5) == ViewLabel::Side);
  CHECK(label_at(10, 90) == ViewLabel::Side);
  CHECK(label_at(0, 134.5) == ViewLabel::Side);
  CHECK(label_at(0, 135.5) == ViewLabel::Back);
  CHECK(label_at(0, -135.5) == ViewLabel::Back);
  CHECK(label_at(-30, 180) == ViewLabel::Back);
  CHECK(label_at(-89, 0) == ViewLabel::Front);  // below is never overhead

  CHECK(std::string(to_string(ViewLabel::Overhead)) == "overhead view");
  CHECK(std::string(to_string(ViewLabel::Front)) == "front view");
  CHECK(std::string(to_string(ViewLabel::Back)) == "back view");
  CHECK(std::string(to_string(ViewLabel::Side)) == "side view");

  ViewConfig wide;
  wide.front_half_angle = 60.0;
  CHECK(label_at(0, 50, wide) == ViewLabel::Front);

  CHECK_THROWS_AS(select_view_descriptor(Vec3(1, 2, 3), Vec3(1, 2, 3), "o"), Error);

  SUBCASE("object frame") {
    // Object turned 90 degrees about z: a camera on +y sits on its local +x.
    const Quat q(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ()));
    CHECK(select_view_descriptor(Vec3(0, 3, 0), Vec3::Zero(), "o", {}, q).label == ViewLabel::Front);
    CHECK(select_view_descriptor(Vec3(0, 3, 0), Vec3::Zero(), "o", {}).label == ViewLabel::Side);
  }
}

TEST_CASE("camera sampling") {
  Scene scene;
  scene.prompt = "s";
  for (int k = 0; k < 2; ++k) {
    ObjectModel o = line_object(3, 0.1, 0.05);
    o.id = "o" + std::to_string(k);
    o.regions[0].box = {Vec3::Constant(-0.5), Vec3::Constant(0.5)};
    o.transform.translation = Vec3(2.0 * k, 0, 0);
    scene.objects.push_back(o);
  }
  const CameraTarget pair = pair_target(scene, 0, 1);
  CHECK((pair.center - Vec3(1, 0, 0)).norm() < 1e-12);
  CHECK(pair.radius == doctest::Approx(std::sqrt(0.75) + 1.0));

  CameraConfig cfg;
  std::mt19937_64 a(5), b(5);
  for (int i = 0; i < 20; ++i) {
    const Camera ca = sample_camera(pair, cfg, a);
    const Camera cb = sample_camera(pair, cfg, b);
    CHECK(ca.position == cb.position);
    CHECK(ca.fov_y == cb.fov_y);
    CHECK(ca.look_at == pair.center);
    const double fov = ca.fov_y * 180.0 / std::numbers::pi;
    CHECK(fov >= cfg.fov_min);
    CHECK(fov <= cfg.fov_max);
    const double factor = (ca.position - pair.center).norm() * std::sin(ca.fov_y / 2) / pair.radius;
    CHECK(factor >= cfg.distance_min - 1e-12);
    CHECK(factor <= cfg.distance_max + 1e-12);
    const Vec3 n = (ca.position - pair.center).normalized();
    const double elev = std::asin(n.z()) * 180.0 / std::numbers::pi;
    CHECK(elev >= cfg.elevation_min - 1e-9);
    CHECK(elev <= cfg.elevation_max + 1e-9);
  }
}

TEST_CASE("densify triggers strictly above the gradient threshold") {
  DensifyConfig cfg;
  std::mt19937_64 rng(1);
  ObjectModel o = line_object(3, 1.0, 0.2);
  DensityStats stats;
  stats.resize(3);
  for (int i = 0; i < 3; ++i) stats.visible[i] = 2;
  stats.grad_accum = {4.0, 4.0 + 1e-9, 3.0};  // means 2.0, just above 2.0, 1.5

  SUBCASE("split large Gaussians") {
    const auto before = o.gaussians;
    const auto c = densify(o, stats, cfg, 1.0, rng);  // 0.2 > 0.01 x 1: split
    CHECK(c.split == 1);
    CHECK(c.cloned == 0);
    REQUIRE(o.gaussians.size() == 4);
    CHECK(c.origin == std::vector<std::size_t>{0, 2, 1, 1});
    CHECK(c.fresh == std::vector<bool>{false, false, true, true});
    CHECK(o.gaussians[0].mean == before[0].mean);
    for (int i = 2; i < 4; ++i) {
      CHECK((o.gaussians[i].scale - before[1].scale / 1.6).norm() < 1e-15);
      CHECK(o.gaussians[i].semantic == before[1].semantic);
      CHECK(o.gaussians[i].region == before[1].region);
      CHECK(o.gaussians[i].opacity == before[1].opacity);
    }
  }
  SUBCASE("clone small Gaussians") {
    const auto c = densify(o, stats, cfg, 100.0, rng);  // 0.2 <= 0.01 x 100: clone
    CHECK(c.cloned == 1);
    REQUIRE(o.gaussians.size() == 4);
    CHECK(o.gaussians[3].mean == o.gaussians[1].mean);
    CHECK(o.gaussians[3].scale == o.gaussians[1].scale);
  }
  SUBCASE("below threshold leaves the object unchanged") {
    stats.grad_accum = {4.0, 3.9, 0.0};
    const auto before = o.gaussians;
    const auto c = densify(o, stats, cfg, 1.0, rng);
    CHECK_FALSE(c.changed());
    REQUIRE(o.gaussians.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(o.gaussians[i].mean == before[i].mean);
  }
  SUBCASE("cap") {
    cfg.max_gaussians_per_object = 3;
    const auto c = densify(o, stats, cfg, 1.0, rng);
    CHECK(c.cap_hit);
    CHECK(o.gaussians.size() == 3);
  }
  SUBCASE("stale statistics") {
    stats.resize(2);
    CHECK_THROWS_AS(densify(o, stats, cfg, 1.0, rng), Error);
  }
}

TEST_CASE("compactness densify fills gaps at midpoints") {
  ObjectModel o = line_object(2, 1.0, 0.2);  // gap 1.0 > 0.4
  DensifyConfig cfg;
  auto c = compactness_densify(o, cfg);
  CHECK(c.inserted == 1);  // the pair is filled once
  REQUIRE(o.gaussians.size() == 3);
  CHECK((o.gaussians[2].mean - Vec3(0.5, 0, 0)).norm() < 1e-15);
  CHECK((o.gaussians[2].color - Vec3(0.05, 0.2, 0.3)).norm() < 1e-15);
  CHECK(o.gaussians[2].semantic == o.gaussians[0].semantic);

  ObjectModel tight = line_object(3, 0.3, 0.2);  // 0.3 <= 0.4
  c = compactness_densify(tight, cfg);
  CHECK(c.inserted == 0);
  CHECK(tight.gaussians.size() == 3);
}

TEST_CASE("prune removes opacity below 0.3 and oversized Gaussians") {
  PruneConfig cfg;
  ObjectModel o = line_object(5, 1.0, 0.05);
  o.gaussians[0].opacity = 0.1;
  o.gaussians[1].opacity = 0.3;          // boundary is kept
  o.gaussians[2].opacity = 0.2999999;
  o.gaussians[3].scale = Vec3(0.05, 0.05, 0.2);  // world radius 0.2 > 0.1 x 1
  DensityStats stats;
  stats.resize(5);
  stats.max_screen_radius[4] = 30.0;  // > 0.2 x 100
  auto c = prune(o, stats, cfg, 1.0, 100.0);
  CHECK(c.removed_opacity == 2);
  CHECK(c.removed_world == 1);
  CHECK(c.removed_screen == 1);
  REQUIRE(o.gaussians.size() == 1);
  CHECK(c.origin == std::vector<std::size_t>{1});

  ObjectModel faint = line_object(2, 1.0, 0.05);
  for (auto& g : faint.gaussians) g.opacity = 0.01;
  stats.resize(2);
  CHECK_THROWS_AS(prune(faint, stats, cfg, 1.0, 100.0), Error);
}

TEST_CASE("adam: first step has magnitude lr and remap keeps moments") {
  ObjectModel o = line_object(2, 1.0, 0.2);
  LearningRates lr;
  ObjectOptimizer opt(o, 2);
  std::vector<GaussianGradient> grads(2);
  for (auto& g : grads) {
    g.mean = Vec3(1.0, -3.0, 0.0);
    g.scale = Vec3(2.0, 0.0, 0.0);
    g.opacity = -0.5;
    g.color = Vec3(0.1, 0.0, 0.0);
  }
  const auto before = o.gaussians;
  opt.step_gaussians(o, grads, lr, false);
  const Gaussian3D& g = o.gaussians[0];
  CHECK(g.mean.x() == doctest::Approx(before[0].mean.x() - lr.mean).epsilon(1e-12));
  CHECK(g.mean.y() == doctest::Approx(before[0].mean.y() + lr.mean).epsilon(1e-12));
  CHECK(g.mean.z() == before[0].mean.z());
  CHECK(g.scale.x() == doctest::Approx(0.2 * std::exp(-lr.scale)).epsilon(1e-12));
  CHECK(g.scale.y() == before[0].scale.y());
  CHECK(logit(g.opacity) == doctest::Approx(logit(0.9) + lr.opacity).epsilon(1e-12));
  CHECK(g.color.x() == 0.0);  // clamped
  CHECK(o.gaussians[1].color.x() == doctest::Approx(before[1].color.x() - lr.color).epsilon(1e-9));
  CHECK(g.semantic == before[0].semantic);  // frozen
  CHECK(opt.steps() == 1);

  // Gaussian 1 keeps its moments, the fresh copy of it starts from zero.
  o.gaussians.push_back(o.gaussians[1]);
  opt.remap(o, {0, 1, 1}, {false, false, true});
  CHECK(opt.size() == 3);
  const auto mid = o.gaussians;
  std::vector<GaussianGradient> zero(3);
  opt.step_gaussians(o, zero, lr, false);
  CHECK(o.gaussians[1].mean.x() < mid[1].mean.x());
  CHECK(o.gaussians[2].mean.x() == mid[2].mean.x());

  CHECK(sigmoid(logit(0.3)) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("config JSON round trip, unknown keys and overrides") {
  const TrainConfig c = load_config(SEMSDS_DATA_DIR "/configs/region_recovery.json");
  CHECK(c.iterations == 2000);
  CHECK(c.densify.grad_threshold == 2.0);
  CHECK(c.prune.alpha_min == 0.3);
  CHECK(c.guidance.pool_dilation == 5);
  CHECK(c.view.overhead_elevation == 60.0);
  CHECK(c.view.front_half_angle == 45.0);
  const nlohmann::json j = to_json(c);
  CHECK(to_json(config_from_json(j)) == j);

  nlohmann::json bad = j;
  bad["densify"]["threshold"] = 1.0;
  CHECK_THROWS_AS(config_from_json(bad), Error);
  bad = j;
  bad["iterations"] = -1;
  CHECK_THROWS_AS(config_from_json(bad), Error);

  const TrainConfig o = apply_overrides(c, {"lr.mean=0.5", "guidance.oracle.kind=recorded", "seed=3"});
  CHECK(o.lr.mean == 0.5);
  CHECK(o.guidance.oracle.kind == "recorded");
  CHECK(o.seed == 3);
  CHECK_THROWS_AS(apply_overrides(c, {"lr.nothing=1"}), Error);
  CHECK_THROWS_AS(apply_overrides(c, {"no_equals_sign"}), Error);
}

TEST_CASE("trainer") {
  const TrainConfig cfg = small_config();

  SUBCASE("zero iterations leave the scene unchanged") {
    TrainConfig zero = cfg;
    zero.iterations = 0;
    Trainer t = make_trainer(zero);
    const Scene before = t.scene();
    t.run();
    CHECK(t.current_step() == 0);
    CHECK(t.metrics().empty());
    for (std::size_t k = 0; k < before.objects.size(); ++k) {
      const auto& a = before.objects[k].gaussians;
      const auto& b = t.scene().objects[k].gaussians;
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].mean == b[i].mean);
    }
  }
  SUBCASE("local-only training never moves the transforms") {
    TrainConfig local = cfg;
    local.global_steps = 0;
    Trainer t = make_trainer(local);
    const Scene before = t.scene();
    t.run();
    CHECK(t.current_step() == local.iterations);
    for (std::size_t k = 0; k < before.objects.size(); ++k) {
      const auto& a = before.objects[k].transform;
      const auto& b = t.scene().objects[k].transform;
      CHECK(a.scale == b.scale);
      CHECK(a.rotation.coeffs() == b.rotation.coeffs());
      CHECK(a.translation == b.translation);
    }
    for (const auto& line : t.metrics()) CHECK(line["mode"] == "local");
  }
  SUBCASE("seeded runs are identical and metrics lines are complete") {
    Trainer a = make_trainer(cfg);
    Trainer b = make_trainer(cfg);
    a.run();
    b.run();
    REQUIRE(a.metrics().size() == std::size_t(cfg.iterations));
    for (std::size_t i = 0; i < a.metrics().size(); ++i) CHECK(a.metrics()[i].dump() == b.metrics()[i].dump());
    for (const char* key : {"step", "mode", "objects", "t", "loss", "partition", "oracle_calls", "region_share",
                            "events", "gaussians"}) {
      CHECK(a.metrics().back().contains(key));
    }
    for (const auto& line : a.metrics()) CHECK(line["partition"].get<bool>());
  }
  SUBCASE("checkpoint and resume continue the step count") {
    const auto dir = std::filesystem::temp_directory_path() / "semsds_ckpt_test";
    std::filesystem::remove_all(dir);
    TrainConfig half = cfg;
    half.iterations = 3;
    Trainer t = make_trainer(half);
    t.run();
    t.save_checkpoint(dir);
    CHECK(std::filesystem::exists(dir / "state.json"));
    auto oracle = make_oracle(cfg, t.scene());
    Trainer r = Trainer::resume(dir, oracle, cfg);
    CHECK(r.current_step() == 3);
    CHECK(r.scene().gaussian_count() == t.scene().gaussian_count());
    r.run();
    CHECK(r.current_step() == cfg.iterations);
    CHECK(r.metrics().back()["step"] == cfg.iterations);
    std::filesystem::remove_all(dir);
  }
}
