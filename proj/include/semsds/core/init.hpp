#pragma once

#include "semsds/core/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace semsds {

enum class InitShape { Box, Sphere, Ellipsoid };

InitShape parse_init_shape(const std::string& name);

struct InitOptions {
  InitShape shape = InitShape::Box;
  int count = 12288;
  double opacity = 0.5;
  Vec3 color = Vec3::Constant(0.5);
  /// Isotropic scale as a multiple of the mean point spacing (V / N)^(1/3).
  double scale_factor = 0.6;
  std::uint64_t seed = 0;
};

/// Semantic embedding for a region of the object being initialized.
using RegionEmbedding = std::function<std::vector<double>(int region)>;

/// Region whose box contains `p`, preferring the first match; falls back to
/// the region with the nearest box center.
int region_for_point(const ObjectModel& object, const Vec3& p);

/// Replaces `object.gaussians` with `options.count` samples inside the local
/// box. Box samples fill the volume, Sphere samples lie on the inscribed
/// (stretched) sphere surface, Ellipsoid samples fill the inscribed ellipsoid.
void initialize_object(ObjectModel& object, int object_index, const InitOptions& options,
                       const RegionEmbedding& embedding);

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;  // empty or aligned with points, in [0, 1]
};

/// Whitespace separated text, one point per line: `x y z [r g b]`.
/// Lines starting with '#' are ignored.
PointCloud read_point_cloud(const std::filesystem::path& path);

/// Builds Gaussians from external points (fit into the object's local box).
void initialize_from_points(ObjectModel& object, int object_index, const PointCloud& cloud,
                            const InitOptions& options, const RegionEmbedding& embedding);

}  // namespace semsds
