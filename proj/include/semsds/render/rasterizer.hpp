#pragma once

#include "semsds/core/types.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace semsds {

/// A Gaussian projected onto the image plane.
struct Splat2D {
  Vec2 mean = Vec2::Zero();        // pixels; pixel (x, y) has center (x + 0.5, y + 0.5)
  Mat2 covariance = Mat2::Identity();  // includes the pixel-space regularizer
  Vec3 conic = Vec3::Zero();       // inverse covariance as (xx, xy, yy)
  Vec3 camera_mean = Vec3::Zero();
  double depth = 0.0;
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
  std::vector<double> semantic;
  std::size_t source = 0;  // index into the projected Gaussian list
};

struct ProjectionResult {
  std::vector<Splat2D> splats;
  std::size_t culled = 0;
};

struct RenderOptions {
  double min_alpha = 1.0 / 255.0;
  double min_transmittance = 1e-4;
  double covariance_blur = 0.3;  // px^2 added to the 2D covariance diagonal
  int tile_size = 16;
  bool semantic = true;  // composite the semantic feature map
  bool retain = false;   // keep the state needed by render_backward
};

/// Perspective projection with first-order covariance transfer:
/// Sigma' = J W Sigma W^T J^T + blur I. Gaussians at or behind the near plane
/// are culled and counted.
ProjectionResult project(std::span<const Gaussian3D> gaussians, const Camera& camera,
                         double covariance_blur = 0.3);

namespace detail {
struct RenderState;
}

struct RenderOutput {
  int width = 0;
  int height = 0;
  int feature_dim = 0;
  std::vector<double> color;     // H x W x 3, row-major
  std::vector<double> semantic;  // H x W x d_f, row-major (empty if disabled)
  std::vector<double> alpha;     // H x W accumulated alpha
  std::vector<double> screen_radius;  // per input Gaussian, 3 sigma in px, 0 if culled
  std::size_t culled = 0;
  std::shared_ptr<const detail::RenderState> state;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  double color_at(int x, int y, int c) const { return color[(std::size_t(y) * width + x) * 3 + c]; }
  double alpha_at(int x, int y) const { return alpha[std::size_t(y) * width + x]; }
};

/// Tile-based front-to-back compositing of color and semantic features.
/// Contributions with alpha below `min_alpha` are skipped and a pixel stops
/// once its transmittance drops below `min_transmittance`.
RenderOutput render(std::span<const Gaussian3D> gaussians, const Camera& camera,
                    const RenderOptions& options = {});

/// Brute-force renderer with identical compositing rules: every pixel sorts
/// every visible Gaussian, without tiling or footprint bounds. Testing oracle.
RenderOutput render_reference(std::span<const Gaussian3D> gaussians, const Camera& camera,
                              const RenderOptions& options = {});

struct GaussianGradient {
  Vec3 mean = Vec3::Zero();
  Vec3 scale = Vec3::Zero();
  Vec4 rotation = Vec4::Zero();  // (w, x, y, z) of the raw quaternion
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
  std::vector<double> semantic;
  Mat3 covariance = Mat3::Zero();  // dL/dSigma, symmetric
  Vec2 mean2d = Vec2::Zero();      // view-space positional gradient, px
};

struct RenderGradients {
  std::vector<GaussianGradient> gaussians;
};

/// Reverse-mode gradients of the compositing equations. `dl_dcolor` is
/// H x W x 3; `dl_dsemantic` is H x W x d_f or empty (semantic gradients are
/// then zero). Throws InvalidState when the render did not retain state.
RenderGradients render_backward(const RenderOutput& output, std::span<const double> dl_dcolor,
                                std::span<const double> dl_dsemantic = {});

struct TransformGradient {
  double scale = 0.0;
  Vec4 rotation = Vec4::Zero();  // (w, x, y, z)
  Vec3 translation = Vec3::Zero();
};

struct ObjectGradients {
  std::size_t object = 0;
  TransformGradient transform;
  std::vector<GaussianGradient> local;  // aligned with the object's Gaussians
};

/// Chains scene-coordinate gradients through transform_to_global into each
/// object's local Gaussian parameters and its (s, R, t). For a local
/// composition the transform gradient is zero and gradients pass through.
std::vector<ObjectGradients> backward_to_objects(const Scene& scene,
                                                 const Composition& composition,
                                                 const RenderGradients& gradients);

/// dL/dscale and dL/dq (raw quaternion) from dL/dSigma for Sigma = R diag(s)^2 R^T.
void covariance_backward(const Vec3& scale, const Quat& rotation, const Mat3& dl_dcov,
                         Vec3& dl_dscale, Vec4& dl_drotation);

/// dL/dq (raw, normalized internally) from dL/dR for R = rotation_matrix(q).
Vec4 rotation_backward(const Quat& rotation, const Mat3& dl_drot);

}  // namespace semsds
