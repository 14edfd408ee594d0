#pragma once

#include "semsds/core/types.hpp"
#include "semsds/optim/config.hpp"

#include <cstddef>
#include <random>
#include <vector>

namespace semsds {

/// Per-Gaussian statistics gathered between density-control passes.
struct DensityStats {
  std::vector<double> grad_accum;  // sum of |dL/d mean2d| (NDC) over visible steps
  std::vector<int> visible;        // steps with a nonzero screen radius
  std::vector<double> max_screen_radius;  // px, 3 sigma

  void resize(std::size_t n);
  void reset();
  double mean_grad(std::size_t i) const { return visible[i] ? grad_accum[i] / visible[i] : 0.0; }
  /// Keeps entry origin[i] at position i; fresh entries start at zero.
  void remap(const std::vector<std::size_t>& origin, const std::vector<bool>& fresh);
};

/// Result of a pass that changes the Gaussian list. origin[i] is the input
/// index output Gaussian i came from; fresh marks newly created Gaussians.
struct DensityChange {
  std::vector<std::size_t> origin;
  std::vector<bool> fresh;
  int cloned = 0;
  int split = 0;
  int inserted = 0;
  int removed_opacity = 0;
  int removed_world = 0;
  int removed_screen = 0;
  bool cap_hit = false;

  bool changed() const { return cloned || split || inserted || removed_opacity || removed_world || removed_screen; }
};

/// Gaussians whose mean view-space gradient exceeds grad_threshold are
/// cloned (world max scale <= clone_scale_fraction x scene diagonal) or
/// replaced by split_samples draws from themselves with scale / split_factor.
/// New Gaussians keep the parent's semantic embedding and region.
DensityChange densify(ObjectModel& object, const DensityStats& stats, const DensifyConfig& config,
                      double scene_diagonal, std::mt19937_64& rng);

/// Inserts a midpoint Gaussian between each Gaussian and its nearest
/// neighbor when their distance exceeds the sum of their largest scales.
/// Each unordered pair is filled once. Attributes are averaged; semantics
/// and region come from the lower-index Gaussian.
DensityChange compactness_densify(ObjectModel& object, const DensifyConfig& config);

/// Removes opacity < alpha_min, world radius (scale x max local scale) >
/// world_radius_fraction x scene diagonal, and max screen radius >
/// screen_radius_fraction x image diagonal. Throws InvalidState when the
/// object would lose every Gaussian.
DensityChange prune(ObjectModel& object, const DensityStats& stats, const PruneConfig& config,
                    double scene_diagonal, double image_diagonal);

}  // namespace semsds
