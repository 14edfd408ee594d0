#pragma once

// Central finite-difference oracle for render_backward. Independent of the
// analytic backward pass: it only perturbs scene parameters and re-renders.

#include "semsds/core/types.hpp"
#include "semsds/render/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace semsds::testing {

struct ParameterRef {
  std::string group;  // mean, scale, rotation, opacity, color, semantic, xf_scale, xf_rotation, xf_translation
  std::size_t object = 0;
  std::size_t gaussian = 0;
  int component = 0;
};

inline double& parameter(Scene& scene, const ParameterRef& p) {
  ObjectModel& o = scene.objects[p.object];
  if (p.group == "xf_scale") return o.transform.scale;
  if (p.group == "xf_rotation") return o.transform.rotation.coeffs()[(p.component + 3) % 4];
  if (p.group == "xf_translation") return o.transform.translation[p.component];
  Gaussian3D& g = o.gaussians[p.gaussian];
  if (p.group == "mean") return g.mean[p.component];
  if (p.group == "scale") return g.scale[p.component];
  if (p.group == "rotation") return g.rotation.coeffs()[(p.component + 3) % 4];  // w,x,y,z
  if (p.group == "opacity") return g.opacity;
  if (p.group == "color") return g.color[p.component];
  return g.semantic[p.component];
}

inline double analytic(const std::vector<ObjectGradients>& grads, const ParameterRef& p) {
  for (const auto& og : grads) {
    if (og.object != p.object) continue;
    if (p.group == "xf_scale") return og.transform.scale;
    if (p.group == "xf_rotation") return og.transform.rotation[p.component];
    if (p.group == "xf_translation") return og.transform.translation[p.component];
    const GaussianGradient& g = og.local[p.gaussian];
    if (p.group == "mean") return g.mean[p.component];
    if (p.group == "scale") return g.scale[p.component];
    if (p.group == "rotation") return g.rotation[p.component];
    if (p.group == "opacity") return g.opacity;
    if (p.group == "color") return g.color[p.component];
    return g.semantic[p.component];
  }
  return 0.0;
}

inline std::vector<ParameterRef> all_parameters(const Scene& scene, bool transforms,
                                                bool semantic) {
  std::vector<ParameterRef> out;
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    const auto& o = scene.objects[k];
    for (std::size_t i = 0; i < o.gaussians.size(); ++i) {
      for (int c = 0; c < 3; ++c) out.push_back({"mean", k, i, c});
      for (int c = 0; c < 3; ++c) out.push_back({"scale", k, i, c});
      for (int c = 0; c < 4; ++c) out.push_back({"rotation", k, i, c});
      out.push_back({"opacity", k, i, 0});
      for (int c = 0; c < 3; ++c) out.push_back({"color", k, i, c});
      if (semantic) {
        for (int c = 0; c < static_cast<int>(o.gaussians[i].semantic.size()); ++c) {
          out.push_back({"semantic", k, i, c});
        }
      }
    }
    if (transforms) {
      out.push_back({"xf_scale", k, 0, 0});
      for (int c = 0; c < 4; ++c) out.push_back({"xf_rotation", k, 0, c});
      for (int c = 0; c < 3; ++c) out.push_back({"xf_translation", k, 0, c});
    }
  }
  return out;
}

struct GradientCheckResult {
  std::size_t total = 0;
  std::size_t passed = 0;
  double worst_rel = 0.0;
  double pass_fraction() const { return total ? double(passed) / double(total) : 1.0; }
};

/// Loss = <w_color, I> + <w_feat, F> for the composed scene. Compares the
/// analytic gradient of every parameter with central differences at step
/// h = 1e-4 * max(|theta|, 1). A parameter passes when the relative error is
/// below `rel_tol` or the absolute error is below `abs_floor`.
/// The alpha-skip and early-termination thresholds in `base` make the loss
/// piecewise smooth; a parameter whose stencil straddles a threshold fails.
inline GradientCheckResult check_scene_gradients(const Scene& scene, const Camera& camera,
                                                 std::uint64_t seed, bool semantic,
                                                 const RenderOptions& base = {},
                                                 double rel_tol = 1e-3, double abs_floor = 1e-7) {
  const int dim = scene.objects.front().gaussians.empty()
                      ? 0
                      : static_cast<int>(scene.objects.front().gaussians.front().semantic.size());
  const std::size_t pixels = std::size_t(camera.width) * camera.height;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w_color(pixels * 3), w_feat(semantic ? pixels * dim : 0);
  for (auto& v : w_color) v = u(rng);
  for (auto& v : w_feat) v = u(rng) - 0.5;

  RenderOptions opts = base;
  opts.semantic = semantic;
  opts.retain = false;
  auto loss_of = [&](const Scene& s) {
    const Composition comp = compose_scene(s);
    const RenderOutput out = render(comp.gaussians, camera, opts);
    double loss = 0.0;
    for (std::size_t i = 0; i < w_color.size(); ++i) loss += w_color[i] * out.color[i];
    for (std::size_t i = 0; i < w_feat.size(); ++i) loss += w_feat[i] * out.semantic[i];
    return loss;
  };

  RenderOptions retain = opts;
  retain.retain = true;
  const Composition comp = compose_scene(scene);
  const RenderOutput out = render(comp.gaussians, camera, retain);
  const RenderGradients rg = render_backward(out, w_color, w_feat);
  const auto grads = backward_to_objects(scene, comp, rg);

  GradientCheckResult result;
  Scene work = scene;
  for (const auto& p : all_parameters(scene, true, semantic)) {
    double& theta = parameter(work, p);
    const double original = theta;
    const double h = 1e-4 * std::max(std::abs(original), 1.0);
    theta = original + h;
    const double plus = loss_of(work);
    theta = original - h;
    const double minus = loss_of(work);
    theta = original;
    const double numeric = (plus - minus) / (2.0 * h);
    const double a = analytic(grads, p);
    const double err = std::abs(a - numeric);
    const double rel = err / std::max({std::abs(a), std::abs(numeric), 1e-300});
    ++result.total;
    if (rel < rel_tol || err < abs_floor) {
      ++result.passed;
    } else {
      result.worst_rel = std::max(result.worst_rel, rel);
    }
  }
  return result;
}

}  // namespace semsds::testing
