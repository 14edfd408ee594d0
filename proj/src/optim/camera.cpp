#include "semsds/optim/camera.hpp"

#include "semsds/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace semsds {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

const char* to_string(ViewLabel label) {
  switch (label) {
    case ViewLabel::Front: return "front view";
    case ViewLabel::Back: return "back view";
    case ViewLabel::Side: return "side view";
    case ViewLabel::Overhead: return "overhead view";
  }
  return "side view";
}

ViewDescriptor select_view_descriptor(const Vec3& camera_position, const Vec3& object_center,
                                      const std::string& object_id, const ViewConfig& config,
                                      const std::optional<Quat>& object_rotation) {
  Vec3 d = camera_position - object_center;
  const double len = d.norm();
  if (!(len > 0.0)) throw_error(ErrorKind::InvalidInput, "camera coincides with the object center");
  d /= len;
  if (object_rotation) d = rotation_matrix(*object_rotation).transpose() * d;
  ViewDescriptor out;
  out.object = object_id;
  const double elevation = std::asin(std::clamp(d.z(), -1.0, 1.0)) / kDeg;
  if (elevation > config.overhead_elevation) {
    out.label = ViewLabel::Overhead;
    return out;
  }
  // Straight below has no azimuth; it falls in the residual sector.
  if (std::hypot(d.x(), d.y()) == 0.0) {
    out.label = ViewLabel::Side;
    return out;
  }
  const double azimuth = std::atan2(d.y(), d.x()) / kDeg;  // (-180, 180]
  if (std::abs(azimuth) <= config.front_half_angle) {
    out.label = ViewLabel::Front;
  } else if (180.0 - std::abs(azimuth) <= config.front_half_angle) {
    out.label = ViewLabel::Back;
  } else {
    out.label = ViewLabel::Side;
  }
  return out;
}

Camera orbit_camera(const Vec3& target, double distance, double elevation_deg, double azimuth_deg,
                    double fov_deg, int width, int height) {
  const double el = elevation_deg * kDeg, az = azimuth_deg * kDeg;
  Camera cam;
  cam.position = target + distance * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  cam.look_at = target;
  cam.up = Vec3::UnitZ();
  cam.fov_y = fov_deg * kDeg;
  cam.width = width;
  cam.height = height;
  cam.near = std::max(1e-3, 0.01 * distance);
  cam.far = 100.0 * distance;
  return cam;
}

CameraTarget scene_target(const Scene& scene) {
  CameraTarget t;
  t.mode = CameraTarget::Mode::Scene;
  t.center = scene.world_bounds().center();
  double r = 0.0;
  for (const auto& o : scene.objects) r = std::max(r, (o.world_center() - t.center).norm() + o.world_radius());
  t.radius = r > 0.0 ? r : 1.0;
  return t;
}

CameraTarget pair_target(const Scene& scene, std::size_t a, std::size_t b) {
  const auto& oa = scene.objects.at(a);
  const auto& ob = scene.objects.at(b);
  CameraTarget t;
  t.mode = CameraTarget::Mode::Pair;
  t.center = 0.5 * (oa.world_center() + ob.world_center());
  t.radius = std::max(oa.world_radius(), ob.world_radius()) + 0.5 * (oa.world_center() - ob.world_center()).norm();
  return t;
}

CameraTarget object_target(const Scene& scene, std::size_t k, bool local) {
  const auto& o = scene.objects.at(k);
  CameraTarget t;
  t.mode = CameraTarget::Mode::Object;
  t.center = local ? o.local_box().center() : o.world_center();
  t.radius = local ? 0.5 * o.local_box().extent().norm() : o.world_radius();
  if (!(t.radius > 0.0)) t.radius = 1.0;
  return t;
}

Camera sample_camera(const CameraTarget& target, const CameraConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto lerp = [&](double a, double b) { return a + (b - a) * u(rng); };
  const double elevation = lerp(config.elevation_min, config.elevation_max);
  const double azimuth = lerp(config.azimuth_min, config.azimuth_max);
  const double fov = lerp(config.fov_min, config.fov_max);
  const double factor = lerp(config.distance_min, config.distance_max);
  const double distance = factor * target.radius / std::sin(0.5 * fov * kDeg);
  return orbit_camera(target.center, distance, elevation, azimuth, fov, config.width, config.height);
}

}  // namespace semsds
