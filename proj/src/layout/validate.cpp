#include "semsds/layout/validate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace semsds {

namespace {

using Polygon = std::vector<Vec3>;
using Polyhedron = std::vector<Polygon>;

Polyhedron box_faces(const OrientedBox& b) {
  const auto c = b.corners();  // index bits: x = 1, y = 2, z = 4
  static constexpr std::array<std::array<int, 4>, 6> faces{{
      {0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1}, {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}}};
  Polyhedron out;
  for (const auto& f : faces) out.push_back({c[f[0]], c[f[1]], c[f[2]], c[f[3]]});
  return out;
}

// Keeps the part of `poly` with n.x <= d.
Polyhedron clip(const Polyhedron& poly, const Vec3& n, double d) {
  const double scale = std::max(1.0, std::abs(d));
  const double eps = 1e-12 * scale;
  bool any_inside = false, any_outside = false;
  for (const auto& f : poly) {
    for (const auto& v : f) {
      const double s = n.dot(v) - d;
      any_inside |= s < -eps;
      any_outside |= s > eps;
    }
  }
  if (!any_inside) return {};
  if (!any_outside) return poly;

  Polyhedron out;
  std::vector<Vec3> cut;
  for (const auto& f : poly) {
    Polygon kept;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const Vec3& p = f[i];
      const Vec3& q = f[(i + 1) % f.size()];
      const double sp = n.dot(p) - d, sq = n.dot(q) - d;
      if (sp <= 0.0) kept.push_back(p);
      if ((sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0)) {
        const Vec3 x = p + (sp / (sp - sq)) * (q - p);
        kept.push_back(x);
        cut.push_back(x);
      } else if (sp == 0.0) {
        cut.push_back(p);
      }
    }
    if (kept.size() >= 3) out.push_back(std::move(kept));
  }
  if (cut.size() >= 3) {
    Vec3 centroid = Vec3::Zero();
    for (const auto& v : cut) centroid += v;
    centroid /= double(cut.size());
    const Vec3 u = (n.unitOrthogonal()).normalized();
    const Vec3 w = n.normalized().cross(u);
    std::sort(cut.begin(), cut.end(), [&](const Vec3& a, const Vec3& b) {
      return std::atan2((a - centroid).dot(w), (a - centroid).dot(u)) <
             std::atan2((b - centroid).dot(w), (b - centroid).dot(u));
    });
    Polygon cap;
    for (const auto& v : cut) {
      if (cap.empty() || (v - cap.back()).norm() > eps) cap.push_back(v);
    }
    if (cap.size() >= 3 && (cap.front() - cap.back()).norm() <= eps) cap.pop_back();
    if (cap.size() >= 3) out.push_back(std::move(cap));
  }
  return out;
}

// Sum over faces of area * distance-to-interior-point / 3; orientation free.
double volume(const Polyhedron& poly) {
  if (poly.empty()) return 0.0;
  Vec3 c = Vec3::Zero();
  std::size_t n = 0;
  for (const auto& f : poly) {
    for (const auto& v : f) {
      c += v;
      ++n;
    }
  }
  c /= double(n);
  double vol = 0.0;
  for (const auto& f : poly) {
    Vec3 area = Vec3::Zero();
    for (std::size_t i = 1; i + 1 < f.size(); ++i) area += (f[i] - f[0]).cross(f[i + 1] - f[0]);
    const double a = 0.5 * area.norm();
    if (a <= 0.0) continue;
    vol += a * std::abs((area / area.norm()).dot(f[0] - c)) / 3.0;
  }
  return vol;
}

double point_box_distance(const Vec3& p, const OrientedBox& b) {
  const Vec3 local = b.axes.transpose() * (p - b.center);
  const Vec3 outside = (local.cwiseAbs() - b.half).cwiseMax(0.0);
  return outside.norm();
}

double segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  const double c = d1.dot(r), b = d1.dot(d2);
  const double denom = a * e - b * b;
  if (denom > 1e-15 * a * e) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
  t = (b * s + f) / e;
  if (t < 0.0) {
    t = 0.0;
    s = std::clamp(-c / a, 0.0, 1.0);
  } else if (t > 1.0) {
    t = 1.0;
    s = std::clamp((b - c) / a, 0.0, 1.0);
  }
  return ((p1 + s * d1) - (p2 + t * d2)).norm();
}

std::vector<std::pair<Vec3, Vec3>> edges(const OrientedBox& b) {
  const auto c = b.corners();
  std::vector<std::pair<Vec3, Vec3>> out;
  for (int i = 0; i < 8; ++i) {
    for (int bit = 1; bit < 8; bit <<= 1) {
      if (!(i & bit)) out.emplace_back(c[std::size_t(i)], c[std::size_t(i | bit)]);
    }
  }
  return out;
}

}  // namespace

std::vector<Vec3> OrientedBox::corners() const {
  std::vector<Vec3> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 sign((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out.push_back(center + axes * sign.cwiseProduct(half));
  }
  return out;
}

OrientedBox OrientedBox::from(const BoundingBox& local, const ObjectTransform& xf) {
  OrientedBox b;
  b.center = xf.apply(local.center());
  b.axes = xf.rotation_matrix();
  b.half = 0.5 * xf.scale * local.extent();
  return b;
}

double overlap_volume(const OrientedBox& a, const OrientedBox& b) {
  Polyhedron poly = box_faces(a);
  for (int k = 0; k < 3 && !poly.empty(); ++k) {
    const Vec3 n = b.axes.col(k);
    const double c = n.dot(b.center);
    poly = clip(poly, n, c + b.half[k]);
    if (!poly.empty()) poly = clip(poly, -n, -c + b.half[k]);
  }
  return volume(poly);
}

double box_distance(const OrientedBox& a, const OrientedBox& b) {
  if (overlap_volume(a, b) > 0.0) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& v : a.corners()) best = std::min(best, point_box_distance(v, b));
  for (const auto& v : b.corners()) best = std::min(best, point_box_distance(v, a));
  const auto ea = edges(a), eb = edges(b);
  for (const auto& [p1, q1] : ea) {
    for (const auto& [p2, q2] : eb) best = std::min(best, segment_distance(p1, q1, p2, q2));
  }
  return best;
}

bool LayoutReport::ok() const {
  return std::none_of(pairs.begin(), pairs.end(),
                      [](const PairReport& p) { return p.overlap_flag || p.gap_flag; });
}

LayoutReport validate_layout(const Scene& scene, const LayoutOptions& options) {
  LayoutReport report;
  std::vector<OrientedBox> boxes;
  for (const auto& o : scene.objects) boxes.push_back(OrientedBox::from(o.local_box(), o.transform));
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      PairReport p;
      p.a = scene.objects[i].id;
      p.b = scene.objects[j].id;
      p.overlap_volume = overlap_volume(boxes[i], boxes[j]);
      const double smaller = std::min(boxes[i].volume(), boxes[j].volume());
      p.overlap_fraction = smaller > 0.0 ? p.overlap_volume / smaller : 0.0;
      p.distance = p.overlap_volume > 0.0 ? 0.0 : box_distance(boxes[i], boxes[j]);
      p.overlap_flag = p.overlap_fraction > options.max_overlap_fraction;
      p.gap_flag = p.distance > options.max_gap;
      report.pairs.push_back(std::move(p));
    }
  }
  return report;
}

}  // namespace semsds
