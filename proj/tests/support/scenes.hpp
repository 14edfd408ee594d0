#pragma once

// Seeded random scene generators shared by the unit and acceptance suites.

#include "semsds/core/types.hpp"

#include <random>
#include <vector>

namespace semsds::testing {

inline Quat random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

/// Gaussians scattered around the origin, viewed by `default_camera`.
inline std::vector<Gaussian3D> random_gaussians(std::mt19937_64& rng, int count, int feature_dim,
                                                double spread = 0.8) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Gaussian3D> out;
  for (int i = 0; i < count; ++i) {
    Gaussian3D g;
    g.mean = spread * Vec3(u(rng), u(rng), u(rng));
    g.scale = Vec3(0.08 + 0.25 * u01(rng), 0.08 + 0.25 * u01(rng), 0.08 + 0.25 * u01(rng));
    g.rotation = random_rotation(rng);
    g.opacity = 0.15 + 0.8 * u01(rng);
    g.color = Vec3(u01(rng), u01(rng), u01(rng));
    for (int c = 0; c < feature_dim; ++c) g.semantic.push_back(u(rng));
    out.push_back(std::move(g));
  }
  return out;
}

inline Camera default_camera(int width, int height) {
  Camera cam;
  cam.position = Vec3(0.3, -4.0, 1.2);
  cam.look_at = Vec3(0.0, 0.0, 0.0);
  cam.up = Vec3::UnitZ();
  cam.width = width;
  cam.height = height;
  cam.fov_y = 0.8;
  return cam;
}

/// Two-object composed scene with non-trivial transforms.
inline Scene random_composed_scene(std::mt19937_64& rng, int per_object, int feature_dim) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Scene scene;
  scene.prompt = "test scene";
  for (int k = 0; k < 2; ++k) {
    ObjectModel o;
    o.id = "obj" + std::to_string(k);
    o.prompt = o.id;
    o.regions.push_back({"region", {Vec3::Constant(-1), Vec3::Constant(1)}});
    o.gaussians = random_gaussians(rng, per_object, feature_dim, 0.6);
    for (auto& g : o.gaussians) g.region = {k, 0};
    o.transform.scale = 0.7 + 0.3 * (u(rng) + 1.0);
    o.transform.rotation = random_rotation(rng);
    o.transform.translation = Vec3(k == 0 ? -0.5 : 0.5, 0.2 * u(rng), 0.2 * u(rng));
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

}  // namespace semsds::testing
