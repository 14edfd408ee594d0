#include "semsds/optim/density.hpp"

#include "semsds/error.hpp"

#include <limits>
#include <set>

namespace semsds {

void DensityStats::resize(std::size_t n) {
  grad_accum.assign(n, 0.0);
  visible.assign(n, 0);
  max_screen_radius.assign(n, 0.0);
}

void DensityStats::reset() { resize(grad_accum.size()); }

void DensityStats::remap(const std::vector<std::size_t>& origin, const std::vector<bool>& fresh) {
  DensityStats out;
  out.resize(origin.size());
  for (std::size_t i = 0; i < origin.size(); ++i) {
    if (fresh[i]) continue;
    out.grad_accum[i] = grad_accum[origin[i]];
    out.visible[i] = visible[origin[i]];
    out.max_screen_radius[i] = max_screen_radius[origin[i]];
  }
  *this = std::move(out);
}

namespace {

void keep_all(DensityChange& c, std::size_t n) {
  c.origin.resize(n);
  c.fresh.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) c.origin[i] = i;
}

}  // namespace

DensityChange densify(ObjectModel& object, const DensityStats& stats, const DensifyConfig& config,
                      double scene_diagonal, std::mt19937_64& rng) {
  auto& gs = object.gaussians;
  const std::size_t n = gs.size();
  if (stats.grad_accum.size() != n) throw_error(ErrorKind::InvalidState, "density statistics are stale");
  DensityChange c;
  const double clone_limit = config.clone_scale_fraction * scene_diagonal;
  const std::size_t cap = std::size_t(config.max_gaussians_per_object);

  std::vector<Gaussian3D> kept, clones, children;
  std::vector<std::size_t> kept_origin, clone_origin, child_origin;
  std::size_t count = n;
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n; ++i) {
    const Gaussian3D& g = gs[i];
    if (!(stats.mean_grad(i) > config.grad_threshold)) {
      kept.push_back(g);
      kept_origin.push_back(i);
      continue;
    }
    const bool small = object.transform.scale * g.scale.maxCoeff() <= clone_limit;
    const std::size_t growth = small ? 1 : std::size_t(config.split_samples) - 1;
    if (count + growth > cap) {
      c.cap_hit = true;
      kept.push_back(g);
      kept_origin.push_back(i);
      continue;
    }
    count += growth;
    kept.push_back(g);
    kept_origin.push_back(i);
    if (small) {
      clones.push_back(g);
      clone_origin.push_back(i);
      ++c.cloned;
      continue;
    }
    // The parent is dropped below; its samples stand in for it.
    kept.pop_back();
    kept_origin.pop_back();
    const Mat3 r = rotation_matrix(g.rotation);
    for (int s = 0; s < config.split_samples; ++s) {
      Gaussian3D child = g;
      const Vec3 z(normal(rng), normal(rng), normal(rng));
      child.mean = g.mean + r * g.scale.cwiseProduct(z);
      child.scale = g.scale / config.split_factor;
      children.push_back(std::move(child));
      child_origin.push_back(i);
    }
    ++c.split;
  }

  std::vector<Gaussian3D> out;
  out.reserve(count);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    out.push_back(std::move(kept[i]));
    c.origin.push_back(kept_origin[i]);
    c.fresh.push_back(false);
  }
  for (std::size_t i = 0; i < clones.size(); ++i) {
    out.push_back(std::move(clones[i]));
    c.origin.push_back(clone_origin[i]);
    c.fresh.push_back(true);
  }
  for (std::size_t i = 0; i < children.size(); ++i) {
    out.push_back(std::move(children[i]));
    c.origin.push_back(child_origin[i]);
    c.fresh.push_back(true);
  }
  gs = std::move(out);
  return c;
}

DensityChange compactness_densify(ObjectModel& object, const DensifyConfig& config) {
  auto& gs = object.gaussians;
  const std::size_t n = gs.size();
  DensityChange c;
  keep_all(c, n);
  if (n < 2) return c;
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = i;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (gs[i].mean - gs[j].mean).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    const double gap = std::sqrt(best_d);
    if (gap > gs[i].scale.maxCoeff() + gs[best].scale.maxCoeff()) {
      pairs.insert({std::min(i, best), std::max(i, best)});
    }
  }
  for (const auto& [a, b] : pairs) {
    if (gs.size() >= std::size_t(config.max_gaussians_per_object)) {
      c.cap_hit = true;
      break;
    }
    Gaussian3D m = gs[a];
    m.mean = 0.5 * (gs[a].mean + gs[b].mean);
    m.scale = 0.5 * (gs[a].scale + gs[b].scale);
    m.opacity = 0.5 * (gs[a].opacity + gs[b].opacity);
    m.color = 0.5 * (gs[a].color + gs[b].color);
    gs.push_back(std::move(m));
    c.origin.push_back(a);
    c.fresh.push_back(true);
    ++c.inserted;
  }
  return c;
}

DensityChange prune(ObjectModel& object, const DensityStats& stats, const PruneConfig& config,
                    double scene_diagonal, double image_diagonal) {
  auto& gs = object.gaussians;
  const std::size_t n = gs.size();
  if (stats.max_screen_radius.size() != n) throw_error(ErrorKind::InvalidState, "density statistics are stale");
  DensityChange c;
  const double world_limit = config.world_radius_fraction * scene_diagonal;
  const double screen_limit = config.screen_radius_fraction * image_diagonal;
  std::vector<Gaussian3D> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Gaussian3D& g = gs[i];
    if (g.opacity < config.alpha_min) {
      ++c.removed_opacity;
    } else if (object.transform.scale * g.scale.maxCoeff() > world_limit) {
      ++c.removed_world;
    } else if (stats.max_screen_radius[i] > screen_limit) {
      ++c.removed_screen;
    } else {
      out.push_back(g);
      c.origin.push_back(i);
      c.fresh.push_back(false);
    }
  }
  if (out.empty() && n > 0) {
    throw_error(ErrorKind::InvalidState, "pruning removed every Gaussian of object '" + object.id + "'");
  }
  gs = std::move(out);
  return c;
}

}  // namespace semsds
