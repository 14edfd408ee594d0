#include "semsds/core/types.hpp"

#include "semsds/error.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <numbers>
#include <set>

namespace semsds {

namespace {

constexpr double kQuatTolerance = 1e-6;

}  // namespace

void validate(const Gaussian3D& g, int feature_dim) {
  if (!(g.scale.array() > 0.0).all()) {
    throw_error(ErrorKind::InvalidParameter, "Gaussian scale must be positive");
  }
  if (std::abs(g.rotation.norm() - 1.0) > kQuatTolerance) {
    throw_error(ErrorKind::InvalidParameter, "Gaussian rotation must be a unit quaternion");
  }
  if (!(g.opacity >= 0.0 && g.opacity <= 1.0)) {
    throw_error(ErrorKind::InvalidParameter, "Gaussian opacity must lie in [0, 1]");
  }
  if (!((g.color.array() >= 0.0).all() && (g.color.array() <= 1.0).all())) {
    throw_error(ErrorKind::InvalidParameter, "Gaussian color must lie in [0, 1]");
  }
  if (feature_dim >= 0 && static_cast<int>(g.semantic.size()) != feature_dim) {
    throw_error(ErrorKind::InvalidParameter,
                "Gaussian semantic embedding has " + std::to_string(g.semantic.size()) +
                    " components, expected " + std::to_string(feature_dim));
  }
}

Mat3 ObjectTransform::rotation_matrix() const { return semsds::rotation_matrix(rotation); }

ObjectTransform ObjectTransform::inverse() const {
  ObjectTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = rotation.normalized().conjugate();
  inv.translation = -(1.0 / scale) * (rotation_matrix().transpose() * translation);
  return inv;
}

Vec3 ObjectTransform::apply(const Vec3& p) const {
  return scale * (rotation_matrix() * p) + translation;
}

void validate(const ObjectTransform& xf) {
  if (!(xf.scale > 0.0) || !std::isfinite(xf.scale)) {
    throw_error(ErrorKind::InvalidParameter, "object transform scale must be positive");
  }
  if (std::abs(xf.rotation.norm() - 1.0) > kQuatTolerance) {
    throw_error(ErrorKind::InvalidParameter, "object transform rotation must be a unit quaternion");
  }
  if (std::abs(xf.rotation_matrix().determinant() - 1.0) > kQuatTolerance) {
    throw_error(ErrorKind::InvalidParameter, "object transform rotation must be proper");
  }
}

double BoundingBox::volume() const {
  const Vec3 e = extent();
  return e.x() * e.y() * e.z();
}

bool BoundingBox::contains(const Vec3& p, double tol) const {
  return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
}

void BoundingBox::expand(const Vec3& p) {
  min = min.cwiseMin(p);
  max = max.cwiseMax(p);
}

BoundingBox BoundingBox::empty() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {Vec3::Constant(inf), Vec3::Constant(-inf)};
}

bool BoundingBox::is_empty() const { return (min.array() > max.array()).any(); }

void validate(const BoundingBox& box) {
  if (box.is_empty()) {
    throw_error(ErrorKind::InvalidParameter, "bounding box min must not exceed max");
  }
}

BoundingBox ObjectModel::local_box() const {
  BoundingBox box = BoundingBox::empty();
  if (!regions.empty()) {
    for (const auto& r : regions) {
      box.expand(r.box.min);
      box.expand(r.box.max);
    }
  } else {
    for (const auto& g : gaussians) box.expand(g.mean);
  }
  if (box.is_empty()) return {};
  return box;
}

Vec3 ObjectModel::world_center() const { return transform.apply(local_box().center()); }

double ObjectModel::world_radius() const {
  return 0.5 * local_box().extent().norm() * transform.scale;
}

std::size_t Scene::gaussian_count() const {
  std::size_t n = 0;
  for (const auto& o : objects) n += o.gaussians.size();
  return n;
}

std::size_t Scene::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].id == id) return i;
  }
  throw_error(ErrorKind::NotFound, "unknown object id '" + id + "'");
}

const ObjectModel& Scene::object(const std::string& id) const { return objects[index_of(id)]; }

ObjectModel& Scene::object(const std::string& id) { return objects[index_of(id)]; }

BoundingBox Scene::world_bounds() const {
  BoundingBox out = BoundingBox::empty();
  for (const auto& o : objects) {
    const BoundingBox b = o.local_box();
    for (int corner = 0; corner < 8; ++corner) {
      const Vec3 p((corner & 1) ? b.max.x() : b.min.x(), (corner & 2) ? b.max.y() : b.min.y(),
                   (corner & 4) ? b.max.z() : b.min.z());
      out.expand(o.transform.apply(p));
    }
  }
  if (out.is_empty()) return {};
  return out;
}

void validate(const Scene& scene, int feature_dim) {
  if (scene.objects.empty()) {
    throw_error(ErrorKind::InvalidInput, "scene must contain at least one object");
  }
  std::set<std::string> ids;
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    const auto& o = scene.objects[k];
    if (!ids.insert(o.id).second) {
      throw_error(ErrorKind::InvalidInput, "duplicate object id '" + o.id + "'");
    }
    validate(o.transform);
    for (const auto& r : o.regions) validate(r.box);
    for (const auto& g : o.gaussians) {
      validate(g, feature_dim);
      if (g.region.object != static_cast<int>(k) || g.region.region < 0 ||
          g.region.region >= static_cast<int>(o.regions.size())) {
        throw_error(ErrorKind::InvalidInput,
                    "Gaussian in object '" + o.id + "' references a missing region");
      }
    }
  }
}

Mat3 Camera::world_to_camera() const {
  const Vec3 forward = (look_at - position).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 true_up = right.cross(forward);
  Mat3 w;
  w.row(0) = right.transpose();
  w.row(1) = (-true_up).transpose();
  w.row(2) = forward.transpose();
  return w;
}

double Camera::focal() const { return 0.5 * height / std::tan(0.5 * fov_y); }

void validate(const Camera& camera) {
  if (!(camera.near > 0.0) || !(camera.near < camera.far)) {
    throw_error(ErrorKind::InvalidParameter, "camera requires 0 < near < far");
  }
  if (camera.width <= 0 || camera.height <= 0) {
    throw_error(ErrorKind::InvalidParameter, "camera image size must be positive");
  }
  if (!(camera.fov_y > 0.0 && camera.fov_y < std::numbers::pi)) {
    throw_error(ErrorKind::InvalidParameter, "camera field of view must lie in (0, pi)");
  }
  const Vec3 forward = camera.look_at - camera.position;
  if (forward.norm() == 0.0) {
    throw_error(ErrorKind::InvalidParameter, "camera position coincides with look-at");
  }
  if (forward.normalized().cross(camera.up.normalized()).norm() < 1e-9) {
    throw_error(ErrorKind::InvalidParameter, "camera view direction is parallel to up");
  }
}

Mat3 rotation_matrix(const Quat& q_in) {
  const Quat q = q_in.normalized();
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Quat quat_from_euler_xyz_degrees(const Vec3& euler_degrees) {
  const Vec3 rad = euler_degrees * (std::numbers::pi / 180.0);
  const Quat qx(Eigen::AngleAxisd(rad.x(), Vec3::UnitX()));
  const Quat qy(Eigen::AngleAxisd(rad.y(), Vec3::UnitY()));
  const Quat qz(Eigen::AngleAxisd(rad.z(), Vec3::UnitZ()));
  Quat q = qz * qy * qx;
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q.normalized();
}

Mat3 covariance_from_factors(const Vec3& scale, const Quat& rotation) {
  if (!(scale.array() > 0.0).all()) {
    throw_error(ErrorKind::InvalidParameter, "covariance scale factors must be positive");
  }
  const Mat3 m = rotation_matrix(rotation) * scale.asDiagonal();
  return m * m.transpose();
}

double evaluate_density(const Gaussian3D& g, const Vec3& x) {
  const Mat3 sigma = covariance_from_factors(g.scale, g.rotation);
  const Vec3 d = x - g.mean;
  const double q = d.dot(sigma.ldlt().solve(d));
  return std::exp(-0.5 * q);
}

Gaussian3D transform_to_global(const Gaussian3D& g, const ObjectTransform& xf) {
  Gaussian3D out = g;
  out.mean = xf.scale * (xf.rotation_matrix() * g.mean) + xf.translation;
  out.scale = xf.scale * g.scale;
  out.rotation = (xf.rotation.normalized() * g.rotation.normalized()).normalized();
  return out;
}

Composition compose_scene(const Scene& scene,
                          const std::optional<std::vector<std::string>>& subset) {
  std::vector<bool> selected(scene.objects.size(), !subset.has_value() || subset->empty());
  if (subset) {
    for (const auto& id : *subset) selected[scene.index_of(id)] = true;
  }
  Composition out;
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    if (!selected[k]) continue;
    const auto& o = scene.objects[k];
    out.spans.push_back({k, out.gaussians.size(), o.gaussians.size()});
    for (const auto& g : o.gaussians) out.gaussians.push_back(transform_to_global(g, o.transform));
  }
  return out;
}

Composition compose_local(const Scene& scene, std::size_t object_index) {
  if (object_index >= scene.objects.size()) {
    throw_error(ErrorKind::NotFound, "object index out of range");
  }
  Composition out;
  out.transformed = false;
  const auto& o = scene.objects[object_index];
  out.spans.push_back({object_index, 0, o.gaussians.size()});
  out.gaussians = o.gaussians;
  return out;
}

}  // namespace semsds
