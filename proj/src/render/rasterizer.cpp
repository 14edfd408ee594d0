#include "semsds/render/rasterizer.hpp"

#include "semsds/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <tuple>

#ifdef SEMSDS_HAVE_OPENMP
#include <omp.h>
#endif

namespace semsds {

namespace detail {

struct RenderState {
  Camera camera;
  RenderOptions options;
  int feature_dim = 0;
  std::vector<Gaussian3D> gaussians;
  std::vector<Splat2D> splats;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::uint32_t> entries;  // splat indices, grouped by tile, front to back
  std::vector<std::uint32_t> tile_begin;  // tiles_x * tiles_y + 1 offsets into entries
  std::vector<std::uint32_t> processed;   // per pixel: entries walked before stopping
};

}  // namespace detail

namespace {

int feature_dim_of(std::span<const Gaussian3D> gaussians) {
  if (gaussians.empty()) return 0;
  const std::size_t dim = gaussians.front().semantic.size();
  for (const auto& g : gaussians) {
    if (g.semantic.size() != dim) {
      throw_error(ErrorKind::InvalidInput, "Gaussians disagree on semantic dimension");
    }
  }
  return static_cast<int>(dim);
}

struct Footprint {
  int x0, x1, y0, y1;  // inclusive pixel bounds, clipped to the image
};

/// Pixels whose alpha can reach `min_alpha`: the ellipse
/// d^T Sigma'^-1 d <= 2 ln(opacity / min_alpha), bounded by its axis-aligned box.
bool footprint(const Splat2D& s, const Camera& camera, double min_alpha, Footprint& fp) {
  if (!(s.opacity >= min_alpha) || s.opacity <= 0.0) return false;
  const double k2 = 2.0 * std::log(s.opacity / min_alpha);
  const double k = std::sqrt(std::max(k2, 0.0));
  const double ex = k * std::sqrt(s.covariance(0, 0));
  const double ey = k * std::sqrt(s.covariance(1, 1));
  fp.x0 = std::max(0, static_cast<int>(std::floor(s.mean.x() - ex - 0.5)) - 1);
  fp.x1 = std::min(camera.width - 1, static_cast<int>(std::ceil(s.mean.x() + ex - 0.5)) + 1);
  fp.y0 = std::max(0, static_cast<int>(std::floor(s.mean.y() - ey - 0.5)) - 1);
  fp.y1 = std::min(camera.height - 1, static_cast<int>(std::ceil(s.mean.y() + ey - 0.5)) + 1);
  return fp.x0 <= fp.x1 && fp.y0 <= fp.y1;
}

double screen_radius(const Mat2& cov) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(cov, Eigen::EigenvaluesOnly);
  return 3.0 * std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
}

/// Per-splat accumulators laid out as [mean2d(2), conic(3), opacity, color(3), semantic(d_f)].
constexpr int kGradMean = 0;
constexpr int kGradConic = 2;
constexpr int kGradOpacity = 5;
constexpr int kGradColor = 6;
constexpr int kGradSemantic = 9;

}  // namespace

ProjectionResult project(std::span<const Gaussian3D> gaussians, const Camera& camera,
                         double covariance_blur) {
  validate(camera);
  const Mat3 w = camera.world_to_camera();
  const double f = camera.focal();
  const Vec2 pp = camera.principal_point();
  ProjectionResult out;
  out.splats.reserve(gaussians.size());
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    const auto& g = gaussians[i];
    const Vec3 p = w * (g.mean - camera.position);
    if (p.z() <= camera.near) {
      ++out.culled;
      continue;
    }
    const double z = p.z();
    Eigen::Matrix<double, 2, 3> j;
    j << f / z, 0.0, -f * p.x() / (z * z), 0.0, f / z, -f * p.y() / (z * z);
    const Mat3 cov_cam = w * covariance_from_factors(g.scale, g.rotation) * w.transpose();
    Mat2 cov = j * cov_cam * j.transpose();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    cov(0, 0) += covariance_blur;
    cov(1, 1) += covariance_blur;
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
    if (!(det > 0.0)) {
      ++out.culled;
      continue;
    }
    Splat2D s;
    s.mean = Vec2(f * p.x() / z + pp.x(), f * p.y() / z + pp.y());
    s.covariance = cov;
    s.conic = Vec3(cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det);
    s.camera_mean = p;
    s.depth = z;
    s.opacity = g.opacity;
    s.color = g.color;
    s.semantic = g.semantic;
    s.source = i;
    out.splats.push_back(std::move(s));
  }
  return out;
}

RenderOutput render(std::span<const Gaussian3D> gaussians, const Camera& camera,
                    const RenderOptions& options) {
  if (options.tile_size <= 0) throw_error(ErrorKind::InvalidParameter, "tile size must be positive");
  const int dim = options.semantic ? feature_dim_of(gaussians) : 0;
  auto projection = project(gaussians, camera, options.covariance_blur);

  auto state = std::make_shared<detail::RenderState>();
  state->camera = camera;
  state->options = options;
  state->feature_dim = dim;
  state->tiles_x = (camera.width + options.tile_size - 1) / options.tile_size;
  state->tiles_y = (camera.height + options.tile_size - 1) / options.tile_size;
  const int tile_count = state->tiles_x * state->tiles_y;

  RenderOutput out;
  out.width = camera.width;
  out.height = camera.height;
  out.feature_dim = dim;
  out.culled = projection.culled;
  out.color.assign(out.pixel_count() * 3, 0.0);
  out.semantic.assign(out.pixel_count() * dim, 0.0);
  out.alpha.assign(out.pixel_count(), 0.0);
  out.screen_radius.assign(gaussians.size(), 0.0);

  // (tile, depth, splat) keys; index order breaks depth ties.
  struct Key {
    std::uint32_t tile;
    double depth;
    std::uint32_t splat;
  };
  std::vector<Key> keys;
  const auto& splats = projection.splats;
  for (std::uint32_t s = 0; s < splats.size(); ++s) {
    out.screen_radius[splats[s].source] = screen_radius(splats[s].covariance);
    Footprint fp;
    if (!footprint(splats[s], camera, options.min_alpha, fp)) continue;
    const int tx0 = fp.x0 / options.tile_size, tx1 = fp.x1 / options.tile_size;
    const int ty0 = fp.y0 / options.tile_size, ty1 = fp.y1 / options.tile_size;
    for (int ty = ty0; ty <= ty1; ++ty) {
      for (int tx = tx0; tx <= tx1; ++tx) {
        keys.push_back({static_cast<std::uint32_t>(ty * state->tiles_x + tx), splats[s].depth, s});
      }
    }
  }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    return std::tie(a.tile, a.depth, a.splat) < std::tie(b.tile, b.depth, b.splat);
  });
  state->entries.resize(keys.size());
  state->tile_begin.assign(tile_count + 1, 0);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    state->entries[i] = keys[i].splat;
    ++state->tile_begin[keys[i].tile + 1];
  }
  for (int t = 0; t < tile_count; ++t) state->tile_begin[t + 1] += state->tile_begin[t];
  state->processed.assign(out.pixel_count(), 0);

  const int ts = options.tile_size;
#ifdef SEMSDS_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int t = 0; t < tile_count; ++t) {
    const int tx = t % state->tiles_x, ty = t / state->tiles_x;
    const std::uint32_t begin = state->tile_begin[t], end = state->tile_begin[t + 1];
    for (int py = ty * ts; py < std::min((ty + 1) * ts, camera.height); ++py) {
      for (int px = tx * ts; px < std::min((tx + 1) * ts, camera.width); ++px) {
        const std::size_t pix = std::size_t(py) * camera.width + px;
        double* color = &out.color[pix * 3];
        double* feat = dim > 0 ? &out.semantic[pix * dim] : nullptr;
        double transmittance = 1.0;
        std::uint32_t walked = 0;
        for (std::uint32_t e = begin; e < end; ++e) {
          ++walked;
          const Splat2D& s = splats[state->entries[e]];
          const double dx = px + 0.5 - s.mean.x();
          const double dy = py + 0.5 - s.mean.y();
          const double power =
              -0.5 * (s.conic[0] * dx * dx + s.conic[2] * dy * dy) - s.conic[1] * dx * dy;
          const double alpha = s.opacity * std::exp(power);
          if (alpha < options.min_alpha) continue;
          const double weight = alpha * transmittance;
          for (int c = 0; c < 3; ++c) color[c] += weight * s.color[c];
          for (int c = 0; c < dim; ++c) feat[c] += weight * s.semantic[c];
          transmittance *= 1.0 - alpha;
          if (transmittance < options.min_transmittance) break;
        }
        out.alpha[pix] = 1.0 - transmittance;
        state->processed[pix] = walked;
      }
    }
  }

  if (options.retain) {
    state->gaussians.assign(gaussians.begin(), gaussians.end());
    state->splats = std::move(projection.splats);
    out.state = std::move(state);
  }
  return out;
}

RenderOutput render_reference(std::span<const Gaussian3D> gaussians, const Camera& camera,
                              const RenderOptions& options) {
  validate(camera);
  const int dim = options.semantic ? feature_dim_of(gaussians) : 0;

  // View transform assembled independently of Camera::world_to_camera.
  const Vec3 z_axis = (camera.look_at - camera.position) / (camera.look_at - camera.position).norm();
  Vec3 x_axis = z_axis.cross(camera.up);
  x_axis /= x_axis.norm();
  const Vec3 y_axis = z_axis.cross(x_axis);  // points down in the image
  Eigen::Matrix4d view = Eigen::Matrix4d::Identity();
  view.block<1, 3>(0, 0) = x_axis.transpose();
  view.block<1, 3>(1, 0) = y_axis.transpose();
  view.block<1, 3>(2, 0) = z_axis.transpose();
  view.block<3, 1>(0, 3) = -view.block<3, 3>(0, 0) * camera.position;
  const double focal = camera.height / (2.0 * std::tan(camera.fov_y / 2.0));

  struct Projected {
    Vec2 mean;
    Mat2 inv_cov;
    double depth;
    double opacity;
    std::size_t index;
  };
  std::vector<Projected> visible;
  RenderOutput out;
  out.width = camera.width;
  out.height = camera.height;
  out.feature_dim = dim;
  out.screen_radius.assign(gaussians.size(), 0.0);
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    const auto& g = gaussians[i];
    const Eigen::Vector4d pc = view * Eigen::Vector4d(g.mean.x(), g.mean.y(), g.mean.z(), 1.0);
    if (pc.z() <= camera.near) {
      ++out.culled;
      continue;
    }
    Eigen::Matrix<double, 2, 3> jac;
    jac << focal / pc.z(), 0.0, -focal * pc.x() / (pc.z() * pc.z()),
        0.0, focal / pc.z(), -focal * pc.y() / (pc.z() * pc.z());
    const Mat3 rot = Quat(g.rotation).normalized().toRotationMatrix();
    const Mat3 sigma = rot * Mat3(g.scale.cwiseProduct(g.scale).asDiagonal()) * rot.transpose();
    const Eigen::Matrix<double, 2, 3> jw = jac * view.block<3, 3>(0, 0);
    Mat2 cov = jw * sigma * jw.transpose() + options.covariance_blur * Mat2::Identity();
    if (!(cov.determinant() > 0.0)) {
      ++out.culled;
      continue;
    }
    out.screen_radius[i] = screen_radius(cov);
    visible.push_back({Vec2(focal * pc.x() / pc.z() + 0.5 * camera.width,
                            focal * pc.y() / pc.z() + 0.5 * camera.height),
                       cov.inverse(), pc.z(), g.opacity, i});
  }
  std::stable_sort(visible.begin(), visible.end(), [](const Projected& a, const Projected& b) {
    return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
  });

  out.color.assign(out.pixel_count() * 3, 0.0);
  out.semantic.assign(out.pixel_count() * dim, 0.0);
  out.alpha.assign(out.pixel_count(), 0.0);
  for (int py = 0; py < camera.height; ++py) {
    for (int px = 0; px < camera.width; ++px) {
      const Vec2 v(px + 0.5, py + 0.5);
      const std::size_t pix = std::size_t(py) * camera.width + px;
      double transmittance = 1.0;
      for (const auto& p : visible) {
        const Vec2 d = v - p.mean;
        const double alpha = p.opacity * std::exp(-0.5 * d.dot(p.inv_cov * d));
        if (alpha < options.min_alpha) continue;
        const auto& g = gaussians[p.index];
        for (int c = 0; c < 3; ++c) out.color[pix * 3 + c] += g.color[c] * alpha * transmittance;
        for (int c = 0; c < dim; ++c) {
          out.semantic[pix * dim + c] += g.semantic[c] * alpha * transmittance;
        }
        transmittance *= 1.0 - alpha;
        if (transmittance < options.min_transmittance) break;
      }
      out.alpha[pix] = 1.0 - transmittance;
    }
  }
  return out;
}

Vec4 rotation_backward(const Quat& rotation, const Mat3& g) {
  const double norm = rotation.norm();
  const Quat q = rotation.normalized();
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Vec4 dq;
  dq[0] = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) +
                 x * g(2, 1));
  dq[1] = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) +
                 z * g(2, 0) + w * g(2, 1) - 2.0 * x * g(2, 2));
  dq[2] = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
                 w * g(2, 0) + z * g(2, 1) - 2.0 * y * g(2, 2));
  dq[3] = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) -
                 2.0 * z * g(1, 1) + y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  // Through the normalization q / |q|.
  const Vec4 qv(w, x, y, z);
  return (dq - qv * qv.dot(dq)) / norm;
}

void covariance_backward(const Vec3& scale, const Quat& rotation, const Mat3& dl_dcov,
                         Vec3& dl_dscale, Vec4& dl_drotation) {
  const Mat3 r = rotation_matrix(rotation);
  const Mat3 m = r * scale.asDiagonal();
  const Mat3 g = 0.5 * (dl_dcov + dl_dcov.transpose());
  const Mat3 dl_dm = 2.0 * g * m;
  for (int j = 0; j < 3; ++j) dl_dscale[j] = dl_dm.col(j).dot(r.col(j));
  const Mat3 dl_dr = dl_dm * scale.asDiagonal();
  dl_drotation = rotation_backward(rotation, dl_dr);
}

RenderGradients render_backward(const RenderOutput& output, std::span<const double> dl_dcolor,
                                std::span<const double> dl_dsemantic) {
  if (!output.state) {
    throw_error(ErrorKind::InvalidState, "render_backward requires a render with retain = true");
  }
  const auto& st = *output.state;
  const Camera& camera = st.camera;
  const int dim = st.feature_dim;
  if (dl_dcolor.size() != output.pixel_count() * 3) {
    throw_error(ErrorKind::InvalidInput, "dL/dI must be H x W x 3");
  }
  const bool with_semantic = !dl_dsemantic.empty() && dim > 0;
  if (!dl_dsemantic.empty() && dl_dsemantic.size() != output.pixel_count() * dim) {
    throw_error(ErrorKind::InvalidInput, "dL/dF must be H x W x d_f");
  }
  const int stride = kGradSemantic + (with_semantic ? dim : 0);
  std::vector<double> buffer(st.entries.size() * stride, 0.0);

  const int ts = st.options.tile_size;
  const int tile_count = st.tiles_x * st.tiles_y;
  const double min_alpha = st.options.min_alpha;

#ifdef SEMSDS_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int t = 0; t < tile_count; ++t) {
    struct Contribution {
      std::uint32_t entry;
      double alpha, gauss, dx, dy, transmittance;
    };
    std::vector<Contribution> contribs;
    std::vector<double> acc_feat(with_semantic ? dim : 0);
    const int tx = t % st.tiles_x, ty = t / st.tiles_x;
    const std::uint32_t begin = st.tile_begin[t];
    for (int py = ty * ts; py < std::min((ty + 1) * ts, camera.height); ++py) {
      for (int px = tx * ts; px < std::min((tx + 1) * ts, camera.width); ++px) {
        const std::size_t pix = std::size_t(py) * camera.width + px;
        const std::uint32_t end = begin + st.processed[pix];
        contribs.clear();
        double transmittance = 1.0;
        for (std::uint32_t e = begin; e < end; ++e) {
          const Splat2D& s = st.splats[st.entries[e]];
          const double dx = px + 0.5 - s.mean.x();
          const double dy = py + 0.5 - s.mean.y();
          const double power =
              -0.5 * (s.conic[0] * dx * dx + s.conic[2] * dy * dy) - s.conic[1] * dx * dy;
          const double gauss = std::exp(power);
          const double alpha = s.opacity * gauss;
          if (alpha < min_alpha) continue;
          contribs.push_back({e, alpha, gauss, dx, dy, transmittance});
          transmittance *= 1.0 - alpha;
        }
        const double* d_color = &dl_dcolor[pix * 3];
        const double* d_feat = with_semantic ? &dl_dsemantic[pix * dim] : nullptr;
        double acc_color[3] = {0.0, 0.0, 0.0};
        std::fill(acc_feat.begin(), acc_feat.end(), 0.0);
        for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
          const Splat2D& s = st.splats[st.entries[it->entry]];
          double* g = &buffer[std::size_t(it->entry) * stride];
          const double weight = it->alpha * it->transmittance;
          double dl_dalpha = 0.0;
          for (int c = 0; c < 3; ++c) {
            g[kGradColor + c] += weight * d_color[c];
            dl_dalpha += (s.color[c] - acc_color[c]) * d_color[c];
            acc_color[c] = s.color[c] * it->alpha + (1.0 - it->alpha) * acc_color[c];
          }
          for (int c = 0; c < static_cast<int>(acc_feat.size()); ++c) {
            g[kGradSemantic + c] += weight * d_feat[c];
            dl_dalpha += (s.semantic[c] - acc_feat[c]) * d_feat[c];
            acc_feat[c] = s.semantic[c] * it->alpha + (1.0 - it->alpha) * acc_feat[c];
          }
          dl_dalpha *= it->transmittance;
          g[kGradOpacity] += dl_dalpha * it->gauss;
          const double dl_dpower = dl_dalpha * it->alpha;
          const double dx = it->dx, dy = it->dy;
          g[kGradMean + 0] += dl_dpower * (s.conic[0] * dx + s.conic[1] * dy);
          g[kGradMean + 1] += dl_dpower * (s.conic[1] * dx + s.conic[2] * dy);
          g[kGradConic + 0] += dl_dpower * (-0.5 * dx * dx);
          g[kGradConic + 1] += dl_dpower * (-dx * dy);
          g[kGradConic + 2] += dl_dpower * (-0.5 * dy * dy);
        }
      }
    }
  }

  // Deterministic reduction in entry order.
  std::vector<double> per_splat(st.splats.size() * stride, 0.0);
  for (std::size_t e = 0; e < st.entries.size(); ++e) {
    const double* src = &buffer[e * stride];
    double* dst = &per_splat[std::size_t(st.entries[e]) * stride];
    for (int c = 0; c < stride; ++c) dst[c] += src[c];
  }

  RenderGradients grads;
  grads.gaussians.resize(st.gaussians.size());
  for (auto& g : grads.gaussians) g.semantic.assign(dim, 0.0);

  const Mat3 w = camera.world_to_camera();
  const double f = camera.focal();
  for (std::size_t si = 0; si < st.splats.size(); ++si) {
    const Splat2D& s = st.splats[si];
    const double* acc = &per_splat[si * stride];
    GaussianGradient& out = grads.gaussians[s.source];
    const Gaussian3D& g3 = st.gaussians[s.source];

    out.opacity = acc[kGradOpacity];
    out.color = Vec3(acc[kGradColor], acc[kGradColor + 1], acc[kGradColor + 2]);
    if (with_semantic) {
      for (int c = 0; c < dim; ++c) out.semantic[c] = acc[kGradSemantic + c];
    }
    out.mean2d = Vec2(acc[kGradMean], acc[kGradMean + 1]);

    // Conic -> 2D covariance: dL/dSigma' = -C G C.
    const Mat2 conic_m = (Mat2() << s.conic[0], s.conic[1], s.conic[1], s.conic[2]).finished();
    const Mat2 g_conic = (Mat2() << acc[kGradConic], 0.5 * acc[kGradConic + 1],
                          0.5 * acc[kGradConic + 1], acc[kGradConic + 2])
                             .finished();
    const Mat2 g_cov2 = -conic_m * g_conic * conic_m;

    const Vec3& p = s.camera_mean;
    const double z = p.z(), z2 = z * z, z3 = z2 * z;
    Eigen::Matrix<double, 2, 3> j;
    j << f / z, 0.0, -f * p.x() / z2, 0.0, f / z, -f * p.y() / z2;
    const Mat3 cov3 = covariance_from_factors(g3.scale, g3.rotation);
    const Mat3 cov_cam = w * cov3 * w.transpose();

    const Mat3 g_cov_cam = j.transpose() * g_cov2 * j;
    out.covariance = w.transpose() * g_cov_cam * w;
    const Eigen::Matrix<double, 2, 3> g_j = 2.0 * g_cov2 * j * cov_cam;

    Vec3 g_p;
    g_p.x() = out.mean2d.x() * f / z + g_j(0, 2) * (-f / z2);
    g_p.y() = out.mean2d.y() * f / z + g_j(1, 2) * (-f / z2);
    g_p.z() = -(out.mean2d.x() * f * p.x() + out.mean2d.y() * f * p.y()) / z2 +
              g_j(0, 0) * (-f / z2) + g_j(1, 1) * (-f / z2) + g_j(0, 2) * (2.0 * f * p.x() / z3) +
              g_j(1, 2) * (2.0 * f * p.y() / z3);
    out.mean = w.transpose() * g_p;
    covariance_backward(g3.scale, g3.rotation, out.covariance, out.scale, out.rotation);
  }
  return grads;
}

std::vector<ObjectGradients> backward_to_objects(const Scene& scene,
                                                 const Composition& composition,
                                                 const RenderGradients& gradients) {
  if (gradients.gaussians.size() != composition.gaussians.size()) {
    throw_error(ErrorKind::InvalidInput, "gradients do not match the composition");
  }
  std::vector<ObjectGradients> out;
  for (const auto& span : composition.spans) {
    const ObjectModel& object = scene.objects.at(span.object);
    ObjectGradients og;
    og.object = span.object;
    og.local.resize(span.count);
    if (!composition.transformed) {
      for (std::size_t i = 0; i < span.count; ++i) og.local[i] = gradients.gaussians[span.offset + i];
      out.push_back(std::move(og));
      continue;
    }
    const ObjectTransform& xf = object.transform;
    const Mat3 r = xf.rotation_matrix();
    const double s = xf.scale;
    Mat3 g_r = Mat3::Zero();
    for (std::size_t i = 0; i < span.count; ++i) {
      const GaussianGradient& gg = gradients.gaussians[span.offset + i];
      const Gaussian3D& local = object.gaussians[i];
      const Mat3 cov = covariance_from_factors(local.scale, local.rotation);
      const Mat3 g_cov = 0.5 * (gg.covariance + gg.covariance.transpose());

      og.transform.translation += gg.mean;
      og.transform.scale += gg.mean.dot(r * local.mean) +
                            2.0 * s * (g_cov.cwiseProduct(r * cov * r.transpose())).sum();
      g_r += s * gg.mean * local.mean.transpose() + 2.0 * s * s * g_cov * r * cov;

      GaussianGradient& lg = og.local[i];
      lg = gg;
      lg.mean = s * r.transpose() * gg.mean;
      lg.covariance = s * s * r.transpose() * g_cov * r;
      covariance_backward(local.scale, local.rotation, lg.covariance, lg.scale, lg.rotation);
    }
    og.transform.rotation = rotation_backward(xf.rotation, g_r);
    out.push_back(std::move(og));
  }
  return out;
}

}  // namespace semsds
