#pragma once

// Verification suites shared by the acceptance binary and `semsds check`.
// Each suite compares library output against an oracle written here.

#include "semsds/layout/plan.hpp"
#include "semsds/layout/program.hpp"
#include "semsds/layout/region_tree.hpp"
#include "semsds/render/rasterizer.hpp"
#include "semsds/semantic/masks.hpp"

#include "finite_difference.hpp"
#include "scenes.hpp"

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace semsds::testing {

struct SuiteReport {
  std::string name;
  bool passed = false;
  std::string summary;
  nlohmann::json detail = nlohmann::json::object();
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Seeded two-object scenes, 8 Gaussians each, 32 x 32. Passes when at least
/// 95% of all parameters (transforms included) agree with central
/// differences to 1e-3 relative error at the production thresholds and the
/// suite finishes in under 60 s. The smooth-threshold rate is reported too.
inline SuiteReport gradients_suite(int scenes = 10) {
  const auto t0 = std::chrono::steady_clock::now();
  RenderOptions smooth;
  smooth.min_alpha = 1e-10;
  smooth.min_transmittance = 1e-12;
  std::size_t passed = 0, total = 0, smooth_passed = 0, smooth_total = 0;
  double worst = 0.0;
  for (int s = 0; s < scenes; ++s) {
    std::mt19937_64 rng(100 + std::uint64_t(s));
    const Scene scene = random_composed_scene(rng, 8, 3);
    const Camera cam = default_camera(32, 32);
    const auto r = check_scene_gradients(scene, cam, std::uint64_t(s), true);
    passed += r.passed;
    total += r.total;
    worst = std::max(worst, r.worst_rel);
    const auto rs = check_scene_gradients(scene, cam, std::uint64_t(s), true, smooth);
    smooth_passed += rs.passed;
    smooth_total += rs.total;
  }
  const double elapsed = seconds_since(t0);
  const double rate = double(passed) / double(total);
  SuiteReport out{"gradients", rate >= 0.95 && elapsed < 60.0, "", {}};
  out.summary = fmt::format("{}/{} parameters within rel err 1e-3 ({:.2f}%), {}/{} with smooth thresholds, {:.1f} s",
                            passed, total, 100.0 * rate, smooth_passed, smooth_total, elapsed);
  out.detail = {{"scenes", scenes},           {"passed", passed},   {"total", total},
                {"rate", rate},               {"smooth_passed", smooth_passed},
                {"smooth_total", smooth_total}, {"worst_failing_rel", worst}, {"seconds", elapsed}};
  return out;
}

inline double linf(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Tiled renderer against the brute-force reference on random scenes with
/// up to 200 Gaussians and up to 64 x 64 pixels; L-infinity <= 1e-5.
inline SuiteReport compositing_suite(int scenes = 50) {
  double worst = 0.0;
  for (int s = 0; s < scenes; ++s) {
    std::mt19937_64 rng(500 + std::uint64_t(s));
    const int n = std::uniform_int_distribution<int>(1, 200)(rng);
    const int w = std::uniform_int_distribution<int>(8, 64)(rng);
    const int h = std::uniform_int_distribution<int>(8, 64)(rng);
    const auto gs = random_gaussians(rng, n, 4);
    const Camera cam = default_camera(w, h);
    const auto tiled = render(gs, cam);
    const auto ref = render_reference(gs, cam);
    worst = std::max({worst, linf(tiled.color, ref.color), linf(tiled.semantic, ref.semantic),
                      linf(tiled.alpha, ref.alpha)});
  }
  SuiteReport out{"compositing", worst <= 1e-5, "", {}};
  out.summary = fmt::format("{} scenes, max L-inf {:.3e}", scenes, worst);
  out.detail = {{"scenes", scenes}, {"max_linf", worst}};
  return out;
}

/// Mean over each stride block binarized at > 0, then a k x k window max
/// that ignores out-of-range cells.
inline std::vector<std::uint8_t> naive_pool(const std::vector<std::uint8_t>& m, int w, int h, int s, int k) {
  const int pw = w / s, ph = h / s;
  std::vector<std::uint8_t> down(std::size_t(pw * ph), 0);
  for (int cy = 0; cy < ph; ++cy)
    for (int cx = 0; cx < pw; ++cx) {
      int sum = 0;
      for (int y = cy * s; y < (cy + 1) * s; ++y)
        for (int x = cx * s; x < (cx + 1) * s; ++x) sum += m[std::size_t(y * w + x)];
      down[std::size_t(cy * pw + cx)] = sum > 0 ? 1 : 0;
    }
  std::vector<std::uint8_t> out(down.size(), 0);
  for (int cy = 0; cy < ph; ++cy)
    for (int cx = 0; cx < pw; ++cx)
      for (int dy = -k / 2; dy <= k / 2; ++dy)
        for (int dx = -k / 2; dx <= k / 2; ++dx) {
          const int y = cy + dy, x = cx + dx;
          if (y < 0 || x < 0 || y >= ph || x >= pw) continue;
          if (down[std::size_t(y * pw + x)]) out[std::size_t(cy * pw + cx)] = 1;
        }
  return out;
}

/// Random semantic fields: a rendered 8-channel feature map of random
/// Gaussians scored against 2 to 6 random subprompts. Checks that the masks
/// partition the image, that the labels equal a loop argmax of the cosines
/// and do not change between tau and tau / 10, and that stride-8 pooling
/// with a 5 x 5 dilation matches the naive oracle and contains the
/// downsampled mask.
inline SuiteReport masks_suite(int fields = 100) {
  int partition_fail = 0, argmax_fail = 0, tau_fail = 0, pool_fail = 0, contain_fail = 0;
  const int dim = 8, size = 64;
  for (int f = 0; f < fields; ++f) {
    std::mt19937_64 rng(900 + std::uint64_t(f));
    std::normal_distribution<double> normal;
    const int n = std::uniform_int_distribution<int>(2, 6)(rng);
    SubpromptSet set(0.01);
    std::vector<RegionId> ids;
    for (int j = 0; j < n; ++j) {
      std::vector<double> q(dim);
      for (auto& v : q) v = normal(rng);
      set.add({j / 2, j % 2}, "q" + std::to_string(j), q);
      ids.push_back({j / 2, j % 2});
    }
    const auto gs = random_gaussians(rng, 60, dim);
    const auto r = render(gs, default_camera(size, size));
    MatrixXfR s(size * size, dim);
    for (int v = 0; v < size * size; ++v)
      for (int c = 0; c < dim; ++c) s(v, c) = float(r.semantic[std::size_t(v * dim + c)]);

    MaskSet a = masks(probabilities(s, set), size, size, ids);
    // Loop oracle: largest cosine, first index on ties (zero rows tie at 0).
    for (int v = 0; v < size * size; ++v) {
      double best = -INFINITY;
      int label = 0;
      double sn = 0.0;
      for (int c = 0; c < dim; ++c) sn += double(s(v, c)) * double(s(v, c));
      sn = std::sqrt(sn);
      for (int j = 0; j < n; ++j) {
        double dot = 0.0;
        for (int c = 0; c < dim; ++c) dot += double(s(v, c)) * set[std::size_t(j)].embedding[std::size_t(c)];
        const double cosv = sn > 0.0 ? dot / sn : 0.0;
        if (cosv > best) {
          best = cosv;
          label = j;
        }
      }
      if (a.labels[std::size_t(v)] != label) ++argmax_fail;
    }
    for (std::size_t v = 0; v < a.labels.size(); ++v) {
      int cover = a.background[v];
      for (const auto& m : a.raw) cover += m[v];
      if (cover != 1) {
        ++partition_fail;
        break;
      }
    }
    set.set_tau(0.001);
    const MaskSet b = masks(probabilities(s, set), size, size, ids);
    if (a.labels != b.labels) ++tau_fail;

    pool_masks(a, 8, 5);
    for (std::size_t j = 0; j < a.raw.size(); ++j) {
      if (a.pooled[j] != naive_pool(a.raw[j], size, size, 8, 5)) ++pool_fail;
      const auto down = naive_pool(a.raw[j], size, size, 8, 1);
      for (std::size_t c = 0; c < down.size(); ++c) {
        if (down[c] && !a.pooled[j][c]) {
          ++contain_fail;
          break;
        }
      }
    }
  }
  const bool ok = !partition_fail && !argmax_fail && !tau_fail && !pool_fail && !contain_fail;
  SuiteReport out{"masks", ok, "", {}};
  out.summary = fmt::format("{} fields; failures: partition {}, argmax {}, tau {}, pooling {}, containment {}",
                            fields, partition_fail, argmax_fail, tau_fail, pool_fail, contain_fail);
  out.detail = {{"fields", fields},         {"partition_failures", partition_fail},
                {"argmax_failures", argmax_fail}, {"tau_failures", tau_fail},
                {"pool_failures", pool_fail}, {"containment_failures", contain_fail}};
  return out;
}

inline double box_overlap(const BoundingBox& a, const BoundingBox& b) {
  double v = 1.0;
  for (int k = 0; k < 3; ++k) v *= std::max(0.0, std::min(a.max[k], b.max[k]) - std::max(a.min[k], b.min[k]));
  return v;
}

/// The 20 region-tree fixtures: leaf volumes sum to the parent within 1e-9
/// and leaves never overlap. The desk plan reproduces a hand-computed
/// layout to 1e-12.
inline SuiteReport layout_suite(const std::filesystem::path& data_dir) {
  int trees = 0, volume_fail = 0, overlap_fail = 0;
  double worst_volume = 0.0;
  for (int i = 0; i < 20; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "tree_%02d.json", i);
    std::ifstream in(data_dir / "fixtures/region_trees" / name);
    if (!in) continue;
    const auto j = nlohmann::json::parse(in);
    const BoundingBox box{Vec3(j["box"]["min"][0], j["box"]["min"][1], j["box"]["min"][2]),
                          Vec3(j["box"]["max"][0], j["box"]["max"][1], j["box"]["max"][2])};
    const auto regions = decompose(box, region_tree_from_json(j["tree"]));
    ++trees;
    double sum = 0.0;
    for (const auto& r : regions) sum += r.box.volume();
    const double err = std::abs(sum - box.volume());
    worst_volume = std::max(worst_volume, err);
    if (err > 1e-9) ++volume_fail;
    for (std::size_t a = 0; a < regions.size(); ++a)
      for (std::size_t b = a + 1; b < regions.size(); ++b)
        if (box_overlap(regions[a].box, regions[b].box) != 0.0) ++overlap_fail;
  }

  // Hand trace of the desk program: desk top at 0.75, lamp rests on it,
  // the mug sits 0.15 right of the laptop, the chair faces the desk.
  struct Expected {
    const char* id;
    double scale;
    double yaw;
    Vec3 t;
  };
  const Expected expected[] = {{"desk", 1.0, 0.0, {0, 0, 0.375}},
                               {"lamp", 1.0, 30.0, {-0.6, 0.25, 0.975}},
                               {"laptop", 1.0, 0.0, {0, -0.1, 0.765}},
                               {"mug", 1.0, 0.0, {0.325, -0.1, 0.8}},
                               {"chair", 0.9, 180.0, {0, -0.85, 0.45}}};
  double trace_err = 0.0;
  const Plan plan = load_plan(data_dir / "fixtures/plans/desk_scene.json");
  const auto ids = plan.object_ids();
  const auto r = execute_program(LayoutProgram::parse(plan.program), &ids);
  for (const auto& e : expected) {
    const auto& xf = r.transform(e.id);
    const double a = e.yaw * std::numbers::pi / 180.0;
    Mat3 rz;
    rz << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    trace_err = std::max({trace_err, std::abs(xf.scale - e.scale), (xf.translation - e.t).cwiseAbs().maxCoeff(),
                          (xf.rotation_matrix() - rz).cwiseAbs().maxCoeff()});
  }
  const bool ok = trees == 20 && !volume_fail && !overlap_fail && trace_err <= 1e-12;
  SuiteReport out{"layout", ok, "", {}};
  out.summary = fmt::format("{} trees, max volume error {:.3e}, {} overlapping pairs, desk trace error {:.3e}", trees,
                            worst_volume, overlap_fail, trace_err);
  out.detail = {{"trees", trees},           {"volume_failures", volume_fail}, {"max_volume_error", worst_volume},
                {"overlapping_pairs", overlap_fail}, {"desk_trace_error", trace_err}};
  return out;
}

}  // namespace semsds::testing
