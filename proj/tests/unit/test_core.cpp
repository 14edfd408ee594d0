#include "doctest.h"

#include "semsds/core/init.hpp"
#include "semsds/core/scene_io.hpp"
#include "semsds/core/types.hpp"
#include "semsds/error.hpp"

#include "../support/scenes.hpp"

#include <Eigen/LU>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

using namespace semsds;

namespace {

Quat axis_angle(double degrees, const Vec3& axis) {
  return Quat(Eigen::AngleAxisd(degrees * std::numbers::pi / 180.0, axis.normalized()));
}

Mat3 rz(double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

Mat3 ry(double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

Gaussian3D unit_gaussian() {
  Gaussian3D g;
  g.opacity = 0.7;
  g.color = Vec3(0.2, 0.4, 0.6);
  g.semantic = {0.1, -0.2};
  return g;
}

}  // namespace

TEST_CASE("covariance_from_factors") {
  CHECK(covariance_from_factors(Vec3::Ones(), Quat::Identity()).isApprox(Mat3::Identity()));
  CHECK(covariance_from_factors(Vec3(2, 1, 1), Quat::Identity())
            .isApprox(Vec3(4, 1, 1).asDiagonal().toDenseMatrix()));

  // Dense matrix-product oracle: Rz(90) diag(1,4,9) Rz(90)^T.
  const Mat3 expected = rz(90) * Vec3(1, 4, 9).asDiagonal() * rz(90).transpose();
  const Mat3 got = covariance_from_factors(Vec3(1, 2, 3), axis_angle(90, Vec3::UnitZ()));
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((got - got.transpose()).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(covariance_from_factors(Vec3(1, 0, 1), Quat::Identity()), Error);
  CHECK_THROWS_AS(covariance_from_factors(Vec3(1, -1, 1), Quat::Identity()), Error);
}

TEST_CASE("evaluate_density") {
  Gaussian3D g = unit_gaussian();
  g.mean = Vec3(0.3, -0.2, 1.0);
  CHECK(evaluate_density(g, g.mean) == doctest::Approx(1.0));
  CHECK(evaluate_density(g, g.mean + Vec3(0, 1, 0)) == doctest::Approx(std::exp(-0.5)));

  g.scale = Vec3(2, 1, 1);
  // Explicit Sigma^-1 solve.
  const Mat3 sigma_inv = Vec3(4, 1, 1).asDiagonal().toDenseMatrix().inverse();
  const Vec3 d(2, 0, 0);
  CHECK(evaluate_density(g, g.mean + d) == doctest::Approx(std::exp(-0.5 * d.dot(sigma_inv * d))));
  CHECK(evaluate_density(g, g.mean + d) == doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("evaluate_density is invariant under rigid motion") {
  std::mt19937_64 rng(3);
  auto gs = testing::random_gaussians(rng, 10, 0);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& g : gs) {
    ObjectTransform xf;
    xf.rotation = testing::random_rotation(rng);
    xf.translation = Vec3(u(rng), u(rng), u(rng));
    const Vec3 x = g.mean + 0.3 * Vec3(u(rng), u(rng), u(rng));
    const double before = evaluate_density(g, x);
    const double after = evaluate_density(transform_to_global(g, xf), xf.apply(x));
    CHECK(after == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("transform_to_global") {
  const Gaussian3D g = unit_gaussian();
  const Gaussian3D same = transform_to_global(g, ObjectTransform{});
  CHECK(same.mean.isApprox(g.mean));
  CHECK(same.scale.isApprox(g.scale));
  CHECK(same.rotation.isApprox(g.rotation));

  ObjectTransform xf;
  xf.scale = 2.0;
  xf.translation = Vec3(1, 0, 0);
  const Gaussian3D moved = transform_to_global(g, xf);
  CHECK(moved.mean.isApprox(Vec3(1, 0, 0)));
  CHECK(covariance_from_factors(moved.scale, moved.rotation).isApprox(4.0 * Mat3::Identity()));
  CHECK(moved.opacity == g.opacity);
  CHECK(moved.color == g.color);
  CHECK(moved.semantic == g.semantic);
  CHECK(moved.region == g.region);

  // Dense-matrix oracle for s = 1.5, R = 45 deg about y, t = (0, 1, 0).
  std::mt19937_64 rng(11);
  for (const auto& local : testing::random_gaussians(rng, 5, 0)) {
    ObjectTransform t45;
    t45.scale = 1.5;
    t45.rotation = axis_angle(45, Vec3::UnitY());
    t45.translation = Vec3(0, 1, 0);
    const Mat3 r = ry(45);
    const Mat3 sigma = local.rotation.toRotationMatrix() *
                       local.scale.cwiseProduct(local.scale).asDiagonal() *
                       local.rotation.toRotationMatrix().transpose();
    const Gaussian3D out = transform_to_global(local, t45);
    CHECK((out.mean - (1.5 * r * local.mean + Vec3(0, 1, 0))).cwiseAbs().maxCoeff() < 1e-10);
    const Mat3 expected = 2.25 * r * sigma * r.transpose();
    CHECK((covariance_from_factors(out.scale, out.rotation) - expected).cwiseAbs().maxCoeff() <
          1e-10);
  }
}

TEST_CASE("transform properties: inverse round trip and determinant scaling") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = testing::random_gaussians(rng, 1, 0).front();
    ObjectTransform xf;
    xf.scale = 0.3 + 2.0 * (u(rng) + 1.0);
    xf.rotation = testing::random_rotation(rng);
    xf.translation = 3.0 * Vec3(u(rng), u(rng), u(rng));
    const Gaussian3D global = transform_to_global(g, xf);
    const Gaussian3D back = transform_to_global(global, xf.inverse());
    CHECK((back.mean - g.mean).cwiseAbs().maxCoeff() < 1e-9);
    const Mat3 c0 = covariance_from_factors(g.scale, g.rotation);
    const Mat3 c1 = covariance_from_factors(back.scale, back.rotation);
    CHECK((c0 - c1).cwiseAbs().maxCoeff() < 1e-9);

    const double det_local = c0.determinant();
    const double det_global = covariance_from_factors(global.scale, global.rotation).determinant();
    CHECK(std::abs(det_global - std::pow(xf.scale, 6) * det_local) <=
          1e-9 * std::abs(det_global));
  }
}

TEST_CASE("compose_scene") {
  std::mt19937_64 rng(9);
  Scene scene;
  scene.prompt = "two things";
  for (int k = 0; k < 2; ++k) {
    ObjectModel o;
    o.id = k == 0 ? "a" : "b";
    o.regions.push_back({"r", {Vec3::Constant(-1), Vec3::Constant(1)}});
    o.gaussians = testing::random_gaussians(rng, k == 0 ? 10 : 20, 0);
    for (auto& g : o.gaussians) g.region = {k, 0};
    scene.objects.push_back(o);
  }
  scene.objects[1].transform.translation = Vec3(3, 0, 0);

  const Composition all = compose_scene(scene);
  REQUIRE(all.gaussians.size() == 30);
  CHECK(all.gaussians[0].mean.isApprox(scene.objects[0].gaussians[0].mean));
  CHECK(all.gaussians[10].mean.isApprox(scene.objects[1].gaussians[0].mean + Vec3(3, 0, 0)));
  std::multiset<std::pair<int, int>> before, after;
  for (const auto& o : scene.objects)
    for (const auto& g : o.gaussians) before.insert({g.region.object, g.region.region});
  for (const auto& g : all.gaussians) after.insert({g.region.object, g.region.region});
  CHECK(before == after);

  const Composition only_b = compose_scene(scene, std::vector<std::string>{"b"});
  REQUIRE(only_b.gaussians.size() == 20);
  CHECK(only_b.spans.size() == 1);
  CHECK(only_b.spans[0].object == 1);

  Scene single;
  single.objects.push_back(scene.objects[0]);
  const Composition copy = compose_scene(single);
  for (std::size_t i = 0; i < copy.gaussians.size(); ++i) {
    CHECK(copy.gaussians[i].mean == single.objects[0].gaussians[i].mean);
  }

  CHECK_THROWS_AS(compose_scene(scene, std::vector<std::string>{"missing"}), Error);
}

TEST_CASE("type invariants") {
  Gaussian3D g = unit_gaussian();
  CHECK_NOTHROW(validate(g, 2));
  CHECK_THROWS(validate(g, 3));
  g.opacity = 1.5;
  CHECK_THROWS(validate(g));
  g = unit_gaussian();
  g.rotation = Quat(2, 0, 0, 0);
  CHECK_THROWS(validate(g));

  Camera cam;
  CHECK_NOTHROW(validate(cam));
  cam.near = 10;
  cam.far = 1;
  CHECK_THROWS(validate(cam));
  cam = Camera{};
  cam.position = Vec3(0, 0, 5);
  CHECK_THROWS(validate(cam));  // looking straight down +z up

  CHECK_THROWS(validate(BoundingBox{Vec3(1, 0, 0), Vec3(0, 1, 1)}));
}

TEST_CASE("euler conversion uses fixed-axis xyz order") {
  const Quat q = quat_from_euler_xyz_degrees(Vec3(30, 45, 60));
  const Mat3 expected = rz(60) * ry(45) *
                        Eigen::AngleAxisd(30 * std::numbers::pi / 180, Vec3::UnitX()).toRotationMatrix();
  CHECK((rotation_matrix(q) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("scene file round trip") {
  std::mt19937_64 rng(2);
  Scene scene = testing::random_composed_scene(rng, 7, 4);
  for (auto& o : scene.objects)
    for (auto& g : o.gaussians) g.color = g.color.cwiseMin(1.0);
  const auto dir = std::filesystem::temp_directory_path() / "semsds_scene_io";
  std::filesystem::remove_all(dir);
  save_scene(dir / "scene.json", scene, 4);
  int dim = 0;
  const Scene loaded = load_scene(dir / "scene.json", &dim);
  CHECK(dim == 4);
  REQUIRE(loaded.objects.size() == 2);
  CHECK(loaded.prompt == scene.prompt);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& a = scene.objects[k];
    const auto& b = loaded.objects[k];
    CHECK(b.id == a.id);
    CHECK(b.transform.scale == a.transform.scale);
    REQUIRE(b.gaussians.size() == a.gaussians.size());
    for (std::size_t i = 0; i < a.gaussians.size(); ++i) {
      CHECK((b.gaussians[i].mean - a.gaussians[i].mean).norm() < 1e-6);
      CHECK(b.gaussians[i].region == a.gaussians[i].region);
      CHECK(b.gaussians[i].semantic.size() == 4);
    }
  }
}

TEST_CASE("procedural initializers stay inside the object box") {
  ObjectModel o;
  o.id = "thing";
  o.regions.push_back({"top", {Vec3(-1, -1, 0), Vec3(1, 1, 1)}});
  o.regions.push_back({"bottom", {Vec3(-1, -1, -1), Vec3(1, 1, 0)}});
  for (auto shape : {InitShape::Box, InitShape::Sphere, InitShape::Ellipsoid}) {
    InitOptions opts;
    opts.shape = shape;
    opts.count = 500;
    opts.seed = 4;
    initialize_object(o, 0, opts, [](int l) { return std::vector<double>{double(l)}; });
    REQUIRE(o.gaussians.size() == 500);
    for (const auto& g : o.gaussians) {
      CHECK(o.local_box().contains(g.mean, 1e-12));
      CHECK(g.semantic[0] == double(g.region.region));
      CHECK(o.regions[g.region.region].box.contains(g.mean, 1e-12));
    }
  }
}
