#pragma once

#include "semsds/core/types.hpp"
#include "semsds/optim/config.hpp"

#include <optional>
#include <random>
#include <string>

namespace semsds {

enum class ViewLabel { Front, Back, Side, Overhead };

const char* to_string(ViewLabel label);

struct ViewDescriptor {
  ViewLabel label = ViewLabel::Front;
  std::string object;

  std::string text() const { return to_string(label); }
};

/// Elevation of n = normalize(camera - center) above the xy-plane decides
/// overhead (> overhead_elevation); otherwise the azimuth from +x gives
/// front (|az| <= half angle), back (|az - 180| <= half angle) or side.
/// With `object_rotation` the direction is first expressed in the object's
/// frame. Throws InvalidInput when the positions coincide.
ViewDescriptor select_view_descriptor(const Vec3& camera_position, const Vec3& object_center,
                                      const std::string& object_id, const ViewConfig& config = {},
                                      const std::optional<Quat>& object_rotation = std::nullopt);

/// Camera on a sphere around `target`, looking at it with +z up.
Camera orbit_camera(const Vec3& target, double distance, double elevation_deg, double azimuth_deg,
                    double fov_deg, int width, int height);

struct CameraTarget {
  enum class Mode { Scene, Pair, Object } mode = Mode::Scene;
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

/// Look-at and bounding radius for the whole scene: radius is the max over
/// objects of |c_k - c| + r_k around the world-bounds center.
CameraTarget scene_target(const Scene& scene);
/// Midpoint of two object centers; radius = max radius + separation / 2.
CameraTarget pair_target(const Scene& scene, std::size_t a, std::size_t b);
/// Object center in its local frame (local steps) or in scene coordinates.
CameraTarget object_target(const Scene& scene, std::size_t k, bool local);

/// Uniform elevation, azimuth and fov in the configured ranges; distance is
/// a uniform factor times radius / sin(fov / 2).
Camera sample_camera(const CameraTarget& target, const CameraConfig& config, std::mt19937_64& rng);

}  // namespace semsds
