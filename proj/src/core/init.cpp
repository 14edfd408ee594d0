#include "semsds/core/init.hpp"

#include "semsds/error.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace semsds {

InitShape parse_init_shape(const std::string& name) {
  if (name == "box") return InitShape::Box;
  if (name == "sphere") return InitShape::Sphere;
  if (name == "ellipsoid") return InitShape::Ellipsoid;
  throw_error(ErrorKind::InvalidParameter, "unknown initializer '" + name + "'");
}

int region_for_point(const ObjectModel& object, const Vec3& p) {
  if (object.regions.empty()) return 0;
  for (std::size_t l = 0; l < object.regions.size(); ++l) {
    if (object.regions[l].box.contains(p)) return static_cast<int>(l);
  }
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < object.regions.size(); ++l) {
    const double d = (object.regions[l].box.center() - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(l);
    }
  }
  return best;
}

namespace {

Gaussian3D make_gaussian(const ObjectModel& object, int object_index, const Vec3& p,
                         const Vec3& color, double scale, double opacity,
                         const RegionEmbedding& embedding) {
  Gaussian3D g;
  g.mean = p;
  g.scale = Vec3::Constant(scale);
  g.rotation = Quat::Identity();
  g.opacity = opacity;
  g.color = color;
  g.region = {object_index, region_for_point(object, p)};
  if (embedding) g.semantic = embedding(g.region.region);
  return g;
}

double spacing_scale(const BoundingBox& box, int count, double factor) {
  const Vec3 e = box.extent();
  const double volume = std::max(e.x() * e.y() * e.z(), 1e-12);
  return std::max(factor * std::cbrt(volume / std::max(count, 1)), 1e-6);
}

}  // namespace

void initialize_object(ObjectModel& object, int object_index, const InitOptions& options,
                       const RegionEmbedding& embedding) {
  if (options.count < 0) throw_error(ErrorKind::InvalidParameter, "negative Gaussian count");
  const BoundingBox box = object.local_box();
  const Vec3 center = box.center();
  const Vec3 half = 0.5 * box.extent();
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = spacing_scale(box, options.count, options.scale_factor);

  object.gaussians.clear();
  object.gaussians.reserve(options.count);
  while (static_cast<int>(object.gaussians.size()) < options.count) {
    Vec3 u;
    switch (options.shape) {
      case InitShape::Box:
        u = Vec3(uni(rng), uni(rng), uni(rng));
        break;
      case InitShape::Sphere: {
        Vec3 n(normal(rng), normal(rng), normal(rng));
        if (n.norm() < 1e-12) continue;
        u = n.normalized();
        break;
      }
      case InitShape::Ellipsoid:
        u = Vec3(uni(rng), uni(rng), uni(rng));
        if (u.squaredNorm() > 1.0) continue;
        break;
    }
    const Vec3 p = center + u.cwiseProduct(half);
    object.gaussians.push_back(
        make_gaussian(object, object_index, p, options.color, scale, options.opacity, embedding));
  }
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw_error(ErrorKind::Io, "cannot open " + path.string());
  PointCloud cloud;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (v.size() != 3 && v.size() != 6) {
      throw_error(ErrorKind::InvalidInput,
                  path.string() + ":" + std::to_string(line_no) + ": expected 3 or 6 numbers");
    }
    cloud.points.emplace_back(v[0], v[1], v[2]);
    if (v.size() == 6) {
      Vec3 c(v[3], v[4], v[5]);
      if (c.maxCoeff() > 1.0) c /= 255.0;
      cloud.colors.push_back(c.cwiseMax(0.0).cwiseMin(1.0));
    }
  }
  if (!cloud.colors.empty() && cloud.colors.size() != cloud.points.size()) {
    throw_error(ErrorKind::InvalidInput, path.string() + ": mixed points with and without color");
  }
  return cloud;
}

void initialize_from_points(ObjectModel& object, int object_index, const PointCloud& cloud,
                            const InitOptions& options, const RegionEmbedding& embedding) {
  if (cloud.points.empty()) throw_error(ErrorKind::InvalidInput, "empty point cloud");
  BoundingBox src = BoundingBox::empty();
  for (const auto& p : cloud.points) src.expand(p);
  const BoundingBox dst = object.local_box();
  const Vec3 src_extent = src.extent().cwiseMax(1e-12);
  const double fit = (dst.extent().cwiseQuotient(src_extent)).minCoeff();
  const double scale = spacing_scale(dst, static_cast<int>(cloud.points.size()), options.scale_factor);

  object.gaussians.clear();
  object.gaussians.reserve(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3 p = dst.center() + fit * (cloud.points[i] - src.center());
    const Vec3 color = cloud.colors.empty() ? options.color : cloud.colors[i];
    object.gaussians.push_back(
        make_gaussian(object, object_index, p, color, scale, options.opacity, embedding));
  }
}

}  // namespace semsds
