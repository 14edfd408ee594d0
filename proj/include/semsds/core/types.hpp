#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace semsds {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// (object index k, region index l) that a Gaussian belongs to.
struct RegionId {
  int object = 0;
  int region = 0;

  auto operator<=>(const RegionId&) const = default;
};

struct Gaussian3D {
  Vec3 mean = Vec3::Zero();
  Vec3 scale = Vec3::Ones();
  Quat rotation = Quat::Identity();
  double opacity = 1.0;
  Vec3 color = Vec3::Zero();
  std::vector<double> semantic;
  RegionId region;
};

/// Throws InvalidParameter when a Gaussian breaks its type invariants.
/// `feature_dim` < 0 skips the semantic length check.
void validate(const Gaussian3D& g, int feature_dim = -1);

struct ObjectTransform {
  double scale = 1.0;
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();

  Mat3 rotation_matrix() const;
  ObjectTransform inverse() const;
  Vec3 apply(const Vec3& p) const;
};

void validate(const ObjectTransform& xf);

struct BoundingBox {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  double volume() const;
  bool contains(const Vec3& p, double tol = 0.0) const;
  void expand(const Vec3& p);

  static BoundingBox empty();
  bool is_empty() const;
};

void validate(const BoundingBox& box);

struct Region {
  std::string subprompt;
  BoundingBox box;
};

struct ObjectModel {
  std::string id;
  std::string prompt;
  std::vector<Region> regions;
  std::vector<Gaussian3D> gaussians;  // local coordinates
  ObjectTransform transform;

  /// Bounding box of the region boxes, or of the Gaussian means when the
  /// object has no regions.
  BoundingBox local_box() const;
  /// Center of the local box mapped into scene coordinates.
  Vec3 world_center() const;
  /// Half the local box diagonal times the object scale.
  double world_radius() const;
};

struct Scene {
  std::string prompt;
  std::vector<ObjectModel> objects;

  std::size_t gaussian_count() const;
  /// Index of the object with `id`; throws NotFound.
  std::size_t index_of(const std::string& id) const;
  const ObjectModel& object(const std::string& id) const;
  ObjectModel& object(const std::string& id);
  /// Union of every object's local box mapped into scene coordinates
  /// (axis-aligned hull of the eight transformed corners).
  BoundingBox world_bounds() const;
};

/// Checks unique ids, K >= 1, region references and Gaussian invariants.
void validate(const Scene& scene, int feature_dim = -1);

/// Pinhole camera: +x right, +y down, +z forward in camera space.
struct Camera {
  Vec3 position = Vec3(0, -4, 0);
  Vec3 look_at = Vec3::Zero();
  Vec3 up = Vec3::UnitZ();
  double fov_y = 0.8726646259971648;  // 50 degrees
  int width = 64;
  int height = 64;
  double near = 0.01;
  double far = 100.0;

  /// Rows are the camera axes expressed in world coordinates.
  Mat3 world_to_camera() const;
  double focal() const;
  Vec2 principal_point() const { return {0.5 * width, 0.5 * height}; }
};

void validate(const Camera& camera);

/// Unit quaternion to rotation matrix; normalizes the input first.
Mat3 rotation_matrix(const Quat& q);

/// Euler angles in degrees, applied about x, then y, then z (fixed axes):
/// R = Rz * Ry * Rx.
Quat quat_from_euler_xyz_degrees(const Vec3& euler_degrees);

/// Sigma = R diag(scale)^2 R^T.
Mat3 covariance_from_factors(const Vec3& scale, const Quat& rotation);

/// exp(-0.5 (x - mu)^T Sigma^-1 (x - mu)).
double evaluate_density(const Gaussian3D& g, const Vec3& x);

/// mean' = s R mean + t, scale' = s scale, rotation' = R_xf * rotation.
Gaussian3D transform_to_global(const Gaussian3D& g, const ObjectTransform& xf);

struct CompositionSpan {
  std::size_t object = 0;  // index into Scene::objects
  std::size_t offset = 0;  // first Gaussian in the flat list
  std::size_t count = 0;
};

/// Flat list of scene-coordinate Gaussians plus the object each run came from.
struct Composition {
  std::vector<Gaussian3D> gaussians;
  std::vector<CompositionSpan> spans;
  bool transformed = true;
};

/// Concatenates transform_to_global over the selected objects in scene order.
/// An empty `subset` selects every object. Unknown ids throw NotFound.
Composition compose_scene(const Scene& scene,
                          const std::optional<std::vector<std::string>>& subset = std::nullopt);

/// Single object left in its local frame (identity transform), used by the
/// local optimization steps.
Composition compose_local(const Scene& scene, std::size_t object_index);

}  // namespace semsds
