#pragma once

#include "semsds/core/types.hpp"

#include <string>
#include <vector>

namespace semsds {

/// Oriented box: center, orthonormal axes (columns) and half extents.
struct OrientedBox {
  Vec3 center = Vec3::Zero();
  Mat3 axes = Mat3::Identity();
  Vec3 half = Vec3::Zero();

  double volume() const { return 8.0 * half.prod(); }
  std::vector<Vec3> corners() const;

  static OrientedBox from(const BoundingBox& local, const ObjectTransform& transform);
};

/// Volume of the intersection, by clipping one box against the other's faces.
double overlap_volume(const OrientedBox& a, const OrientedBox& b);

/// Closest distance between the two solids; 0 when they touch or overlap.
double box_distance(const OrientedBox& a, const OrientedBox& b);

struct LayoutOptions {
  double max_overlap_fraction = 0.05;  // of the smaller object's volume
  double max_gap = 1.0;                // scene units
};

struct PairReport {
  std::string a;
  std::string b;
  double overlap_volume = 0.0;
  double overlap_fraction = 0.0;
  double distance = 0.0;
  bool overlap_flag = false;
  bool gap_flag = false;
};

struct LayoutReport {
  std::vector<PairReport> pairs;
  bool ok() const;
};

/// Pairwise overlap and gap of the objects' world-space layout boxes.
LayoutReport validate_layout(const Scene& scene, const LayoutOptions& options = {});

}  // namespace semsds
