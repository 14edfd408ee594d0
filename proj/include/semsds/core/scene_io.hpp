#pragma once

#include "semsds/core/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <vector>

namespace semsds {

struct GaussianPayload {
  std::vector<Gaussian3D> gaussians;
  int feature_dim = 0;
};

/// Binary Gaussian payload: 16-byte header ("SGS1", u32 count, u32 d_f,
/// u32 reserved) followed by little-endian f32 records
/// [mean(3), scale(3), quat_wxyz(4), opacity, rgb(3), semantic(d_f), k, l].
void write_gaussians(const std::filesystem::path& path, const std::vector<Gaussian3D>& gaussians,
                     int feature_dim);
GaussianPayload read_gaussians(const std::filesystem::path& path);

/// Writes `scene.json`-style document at `path` plus one payload per object
/// next to it, named `<object id>.sgs`.
void save_scene(const std::filesystem::path& path, const Scene& scene, int feature_dim);
/// Loads a scene document; payload paths are resolved relative to it.
Scene load_scene(const std::filesystem::path& path, int* feature_dim = nullptr);

nlohmann::json transform_to_json(const ObjectTransform& xf);
ObjectTransform transform_from_json(const nlohmann::json& j);
nlohmann::json box_to_json(const BoundingBox& box);
BoundingBox box_from_json(const nlohmann::json& j);

}  // namespace semsds
