#include "doctest.h"

#include "semsds/error.hpp"
#include "semsds/layout/plan.hpp"
#include "semsds/layout/program.hpp"
#include "semsds/layout/region_tree.hpp"
#include "semsds/layout/validate.hpp"

#include "../support/http_stub.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace semsds;

namespace {

const std::filesystem::path kData = SEMSDS_DATA_DIR;

bool has_diagnostic(const std::vector<Diagnostic>& diags, int index, const std::string& text) {
  for (const auto& d : diags) {
    if (d.index == index && d.message.find(text) != std::string::npos) return true;
  }
  return false;
}

std::vector<Diagnostic> diagnostics_of(const std::vector<std::string>& lines,
                                       const std::vector<std::string>* objects = nullptr) {
  try {
    return check_program(LayoutProgram::parse(lines), objects);
  } catch (const ValidationError& e) {
    return e.diagnostics();
  }
}

double interior_overlap(const BoundingBox& a, const BoundingBox& b) {
  double v = 1.0;
  for (int k = 0; k < 3; ++k) {
    v *= std::max(0.0, std::min(a.max[k], b.max[k]) - std::max(a.min[k], b.min[k]));
  }
  return v;
}

Mat3 rz(double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

OrientedBox unit_box(const Vec3& center, double yaw_degrees = 0.0) {
  OrientedBox b;
  b.center = center;
  b.axes = rz(yaw_degrees);
  b.half = Vec3::Constant(0.5);
  return b;
}

}  // namespace

TEST_CASE("program: basic execution") {
  auto r = execute_program(LayoutProgram::parse({"place(a, 1, (0,0,0), (0,0,0))"}));
  REQUIRE(r.placements.size() == 1);
  CHECK(r.transform("a").scale == 1.0);
  CHECK(r.transform("a").rotation.isApprox(Quat::Identity()));
  CHECK(r.transform("a").translation == Vec3::Zero());

  r = execute_program(LayoutProgram::parse({
      "table_top = (0, 1, 0)",
      "lamp_h = 0.4",
      "t = table_top + vec(0, lamp_h/2, 0)",
      "place(lamp, 1, (0, 0, 0), t)",
  }));
  CHECK(r.transform("lamp").translation == Vec3(0, 1.2, 0));
  CHECK(r.variables.at("lamp_h").scalar == 0.4);

  r = execute_program(LayoutProgram::parse({
      "a = min(3, 1, 2) * max(2, -4)",
      "v = max((1, 5, 0), vec(2, 2, 2)) / 2 - -(1, 1, 1)",
      "w = 2 * v.y + v.x  # comment",
      "place(\"obj-1\", 0.5, (90, 0, 0), (a, w, 0))",
  }));
  CHECK(r.variables.at("a").scalar == 2.0);
  CHECK(r.variables.at("v").vector == Vec3(2, 3.5, 2));
  CHECK(r.variables.at("w").scalar == 9.0);
  const auto& xf = r.transform("obj-1");
  CHECK(xf.scale == 0.5);
  CHECK(xf.translation == Vec3(2, 9, 0));
  // 90 degrees about x maps +y to +z.
  CHECK((xf.rotation_matrix() * Vec3::UnitY() - Vec3::UnitZ()).norm() < 1e-15);
}

TEST_CASE("program: diagnostics carry statement indices") {
  const std::vector<std::string> objects{"a", "b"};
  auto d = diagnostics_of({"x = 1", "y = x + z", "place(a, 1, (0,0,0), (y, 0, 0))"}, &objects);
  CHECK(has_diagnostic(d, 1, "unbound variable 'z'"));
  CHECK(has_diagnostic(d, -1, "'b' is never placed"));
  CHECK(d.size() == 2);  // statement 2 fails only because y failed

  d = diagnostics_of({"x = 1 / (2 - 2)", "v = (1, 2, 3) / (1, 0, 1)"});
  CHECK(has_diagnostic(d, 0, "division by zero"));
  CHECK(has_diagnostic(d, 1, "division by zero"));

  d = diagnostics_of({"place(a, 1, (0,0,0), (0,0,0))", "place(a, 1, (0,0,0), (1,0,0))"});
  CHECK(has_diagnostic(d, 1, "placed more than once"));

  d = diagnostics_of({"x = 1", "x = 2"});
  CHECK(has_diagnostic(d, 1, "assigned more than once"));

  d = diagnostics_of({"x = (1, 2, 3) + 1", "s = 2", "y = s.x", "place(a, (1,1,1), (0,0,0), (0,0,0))",
                      "place(b, 0, (0,0,0), (0,0,0))", "place(c, 1, 5, (0,0,0))"});
  CHECK(has_diagnostic(d, 0, "scalar and a vector"));
  CHECK(has_diagnostic(d, 2, "component access on a scalar"));
  CHECK(has_diagnostic(d, 3, "scale must be a scalar"));
  CHECK(has_diagnostic(d, 4, "scale must be positive"));
  CHECK(has_diagnostic(d, 5, "euler angles must be a vector"));

  d = diagnostics_of({"place(z, 1, (0,0,0), (0,0,0))"}, &objects);
  CHECK(has_diagnostic(d, 0, "unknown object 'z'"));

  d = diagnostics_of({"x = ", "y = (1, 2)", "ok = 1", "place = 3", "z = foo(1)", "w = 1 $ 2", ""});
  CHECK(has_diagnostic(d, 0, "unexpected end"));
  CHECK(has_diagnostic(d, 1, "3 components"));
  CHECK(has_diagnostic(d, 3, "reserved name"));
  CHECK(has_diagnostic(d, 4, "unknown function"));
  CHECK(has_diagnostic(d, 5, "unexpected character"));
  CHECK(has_diagnostic(d, 6, "empty statement"));
  CHECK_FALSE(has_diagnostic(d, 2, ""));

  CHECK_THROWS_AS(execute_program(LayoutProgram::parse({"x = y"})), ValidationError);
}

TEST_CASE("program: canonical print round trip") {
  const Plan plan = load_plan(kData / "fixtures/plans/desk_scene.json");
  const auto program = LayoutProgram::parse(plan.program);
  const auto printed = program.print();
  const auto reparsed = LayoutProgram::parse(printed);
  CHECK(reparsed.print() == printed);
  const auto a = execute_program(program);
  const auto b = execute_program(reparsed);
  REQUIRE(a.placements.size() == b.placements.size());
  for (std::size_t i = 0; i < a.placements.size(); ++i) {
    CHECK(a.placements[i].object == b.placements[i].object);
    CHECK(a.placements[i].transform.scale == b.placements[i].transform.scale);
    CHECK(a.placements[i].transform.translation == b.placements[i].transform.translation);
    CHECK(a.placements[i].transform.rotation.coeffs() == b.placements[i].transform.rotation.coeffs());
  }

  const auto odd = LayoutProgram::parse({"x = 0.1 + 1e-7 * --3", "place(\"my obj\", x, (0.3, 0, 0), (x, x, x))"});
  const auto again = LayoutProgram::parse(odd.print());
  CHECK(execute_program(again).transform("my obj").scale == execute_program(odd).transform("my obj").scale);
}

TEST_CASE("program: desk fixture matches a hand trace") {
  const Plan plan = load_plan(kData / "fixtures/plans/desk_scene.json");
  const auto ids = plan.object_ids();
  const auto r = execute_program(LayoutProgram::parse(plan.program), &ids);
  // desk_top = 0.75; lamp z = 0.75 + 0.45 / 2; laptop z = 0.75 + 0.03 / 2;
  // mug = laptop + (0.35 / 2 + 0.15, 0, (0.1 - 0.03) / 2); chair y = -(0.4 + 0.2 + 0.25).
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
  for (const auto& e : expected) {
    const auto& xf = r.transform(e.id);
    CHECK(std::abs(xf.scale - e.scale) <= 1e-12);
    CHECK((xf.translation - e.t).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((xf.rotation_matrix() - rz(e.yaw)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("decompose") {
  const BoundingBox unit{Vec3::Zero(), Vec3::Ones()};
  auto leaf = decompose(unit, RegionTree::leaf("all"));
  REQUIRE(leaf.size() == 1);
  CHECK(leaf[0].box.min == unit.min);
  CHECK(leaf[0].box.max == unit.max);

  auto halves = decompose(unit, RegionTree::split(SplitAxis::Width, {0.5, 0.5},
                                                  {RegionTree::leaf("l"), RegionTree::leaf("r")}));
  REQUIRE(halves.size() == 2);
  CHECK(halves[0].box.max == Vec3(0.5, 1, 1));
  CHECK(halves[1].box.min == Vec3(0.5, 0, 0));
  CHECK(halves[1].subprompt == "r");

  const auto nested = RegionTree::split(
      SplitAxis::Depth, {0.3, 0.7},
      {RegionTree::leaf("bottom"),
       RegionTree::split(SplitAxis::Width, {0.5, 0.5}, {RegionTree::leaf("a"), RegionTree::leaf("b")})});
  const auto regions = decompose(unit, nested);
  REQUIRE(regions.size() == 3);
  CHECK(regions[0].box.volume() == doctest::Approx(0.3));
  CHECK(regions[1].box.volume() == doctest::Approx(0.35));
  CHECK(regions[2].box.volume() == doctest::Approx(0.35));
  CHECK(regions[1].box.min.z() == doctest::Approx(0.3));

  CHECK_THROWS_AS(decompose(unit, RegionTree::split(SplitAxis::Width, {0.5, 0.6},
                                                    {RegionTree::leaf("l"), RegionTree::leaf("r")})),
                  ValidationError);
  CHECK_THROWS_AS(decompose(unit, RegionTree::split(SplitAxis::Width, {1.0}, {RegionTree::leaf("l")})),
                  ValidationError);
  CHECK_THROWS_AS(decompose(unit, RegionTree::leaf("")), ValidationError);
}

TEST_CASE("region tree JSON") {
  const auto j = nlohmann::json::parse(R"({"axis": "length", "fractions": [0.25, 0.75],
      "children": [{"subprompt": "a"}, {"axis": "depth", "fractions": [0.5, 0.5],
      "children": [{"subprompt": "b"}, {"subprompt": "c"}]}]})");
  const RegionTree t = region_tree_from_json(j);
  CHECK(t.leaf_count() == 3);
  CHECK(to_json(t) == j);

  try {
    region_tree_from_json(nlohmann::json::parse(
        R"({"axis": "height", "fractions": [0.5, 0.5], "children": [{"subprompt": "a"}, {"oops": 1}]})"));
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    REQUIRE(e.diagnostics().size() == 2);
    CHECK(e.diagnostics()[0].where == "root");
    CHECK(e.diagnostics()[1].where == "root.children[1]");
  }
}

TEST_CASE("region tree fixtures partition their boxes") {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kData / "fixtures/region_trees")) {
    std::ifstream in(entry.path());
    const auto j = nlohmann::json::parse(in);
    const BoundingBox box{Vec3(j["box"]["min"][0], j["box"]["min"][1], j["box"]["min"][2]),
                          Vec3(j["box"]["max"][0], j["box"]["max"][1], j["box"]["max"][2])};
    const RegionTree tree = region_tree_from_json(j["tree"]);
    const auto regions = decompose(box, tree);
    CHECK(regions.size() == tree.leaf_count());
    double sum = 0.0;
    for (const auto& r : regions) sum += r.box.volume();
    CHECK(std::abs(sum - box.volume()) <= 1e-9 * box.volume());
    for (std::size_t a = 0; a < regions.size(); ++a)
      for (std::size_t b = a + 1; b < regions.size(); ++b)
        CHECK(interior_overlap(regions[a].box, regions[b].box) == 0.0);
    ++count;
  }
  CHECK(count == 20);
}

TEST_CASE("oriented box overlap and distance") {
  SUBCASE("far apart") {
    const auto a = unit_box(Vec3::Zero()), b = unit_box(Vec3(10, 0, 0));
    CHECK(overlap_volume(a, b) == 0.0);
    CHECK(box_distance(a, b) == doctest::Approx(9.0));
  }
  SUBCASE("coincident") {
    const auto a = unit_box(Vec3(1, 2, 3), 17.0);
    CHECK(overlap_volume(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(box_distance(a, a) == 0.0);
  }
  SUBCASE("corner overlap of 0.2^3") {
    const auto a = unit_box(Vec3::Zero()), b = unit_box(Vec3::Constant(0.8));
    CHECK(overlap_volume(a, b) == doctest::Approx(0.008).epsilon(1e-12));
    CHECK(overlap_volume(b, a) == doctest::Approx(0.008).epsilon(1e-12));
  }
  SUBCASE("45 degree twist gives a regular octagonal prism") {
    const auto a = unit_box(Vec3::Zero()), b = unit_box(Vec3::Zero(), 45.0);
    CHECK(overlap_volume(a, b) == doctest::Approx(2.0 * (std::sqrt(2.0) - 1.0)).epsilon(1e-12));
  }
  SUBCASE("rotated neighbour distance") {
    const auto a = unit_box(Vec3::Zero()), b = unit_box(Vec3(2, 0, 0), 45.0);
    CHECK(box_distance(a, b) == doctest::Approx(1.5 - std::sqrt(0.5)).epsilon(1e-12));
  }
  SUBCASE("edge to face") {
    OrientedBox a = unit_box(Vec3::Zero());
    OrientedBox b = unit_box(Vec3(0, 2, 2));
    b.axes = Eigen::AngleAxisd(std::numbers::pi / 4, Vec3::UnitX()).toRotationMatrix();
    // b's face nearest a spans (y, z) = (2 - r, 2) to (2, 2 - r), r = sqrt(0.5),
    // i.e. the plane y + z = 4 - r. a's edge at (y, z) = (0.5, 0.5) projects inside it.
    const double plane = 4.0 - std::sqrt(0.5);
    CHECK(box_distance(a, b) == doctest::Approx((plane - 1.0) / std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("skew edges") {
    // a's top edge runs along x at z = sqrt(0.5), b's bottom edge along y at
    // z = 2 - sqrt(0.5); they cross above the origin.
    OrientedBox a = unit_box(Vec3::Zero());
    a.axes = Eigen::AngleAxisd(std::numbers::pi / 4, Vec3::UnitX()).toRotationMatrix();
    OrientedBox b = unit_box(Vec3(0, 0, 2));
    b.axes = Eigen::AngleAxisd(std::numbers::pi / 4, Vec3::UnitY()).toRotationMatrix();
    CHECK(box_distance(a, b) == doctest::Approx(2.0 - 2.0 * std::sqrt(0.5)).epsilon(1e-12));
  }
}

TEST_CASE("validate_layout flags") {
  Scene scene;
  for (int i = 0; i < 3; ++i) {
    ObjectModel o;
    o.id = "o" + std::to_string(i);
    o.regions.push_back({"r", {Vec3::Constant(-0.5), Vec3::Constant(0.5)}});
    scene.objects.push_back(o);
  }
  scene.objects[1].transform.translation = Vec3(10, 0, 0);
  LayoutOptions opts;
  opts.max_gap = 5.0;
  auto report = validate_layout(scene, opts);
  REQUIRE(report.pairs.size() == 3);
  CHECK(report.pairs[0].gap_flag);
  CHECK(report.pairs[0].distance == doctest::Approx(9.0));
  CHECK(report.pairs[1].overlap_flag);  // o0 and o2 coincide
  CHECK(report.pairs[1].overlap_fraction == doctest::Approx(1.0));
  CHECK_FALSE(report.ok());

  opts.max_gap = 20.0;
  scene.objects[2].transform.translation = Vec3(0, 1.5, 0);
  report = validate_layout(scene, opts);
  CHECK(report.ok());
}

TEST_CASE("plans") {
  const Plan desk = load_plan(kData / "fixtures/plans/desk_scene.json");
  CHECK(check_plan(desk).empty());
  const Scene scene = build_scene(desk);
  REQUIRE(scene.objects.size() == 5);
  CHECK(scene.objects[4].id == "chair");
  REQUIRE(scene.objects[4].regions.size() == 3);
  CHECK(scene.objects[4].regions[2].subprompt == "a padded grey seat");
  CHECK(scene.objects[2].regions.size() == 1);
  CHECK(scene.objects[0].local_box().extent().isApprox(Vec3(1.6, 0.8, 0.75)));
  LayoutOptions generous;
  generous.max_gap = 2.0;
  CHECK(validate_layout(scene, generous).ok());

  const auto path = std::filesystem::temp_directory_path() / "semsds_plan.json";
  save_plan(path, desk);
  const Plan back = load_plan(path);
  CHECK(to_json(back) == to_json(desk));

  try {
    load_plan(kData / "fixtures/invalid/invalid_plan.json");
    FAIL("expected region tree diagnostics");
  } catch (const ValidationError& e) {
    CHECK(e.diagnostics().front().where == "region_trees.box");
  }
  auto j = nlohmann::json::parse(std::ifstream(kData / "fixtures/invalid/invalid_plan.json"));
  j.erase("region_trees");
  const Plan bad = plan_from_json(j);
  const auto diags = check_plan(bad);
  CHECK(has_diagnostic(diags, 2, "unbound variable 'height'"));
  CHECK(has_diagnostic(diags, 3, "placed more than once"));
  CHECK(has_diagnostic(diags, 4, "division by zero"));
  CHECK_THROWS_AS(build_scene(bad), ValidationError);
}

TEST_CASE("canned planner") {
  CannedPlanner dir(kData / "fixtures/plans");
  CHECK(dir.plan("a red and green cube next to a blue and yellow cube").objects.size() == 2);
  CHECK_THROWS_AS(dir.plan("something else"), Error);
  CannedPlanner file(kData / "fixtures/plans/desk_scene.json");
  CHECK(file.plan("anything").objects.size() == 5);
}

TEST_CASE("planner response helpers") {
  CHECK(extract_json("Sure!\n```json\n{\"a\": {\"b\": \"}\"}}\n```").at("a").at("b") == "}");
  CHECK_THROWS_AS(extract_json("no json here"), Error);
  CHECK(fill_template("{{x}} and {{x}} or {{y}}", {{"x", "1"}, {"y", "{{x}}"}}) == "1 and 1 or {{x}}");
}

TEST_CASE("remote planner repairs invalid answers") {
  testing::HttpStub stub;
  std::vector<nlohmann::json> requests;
  stub.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    requests.push_back(body);
    CHECK(req.get_header_value("Authorization") == "Bearer test-key");
    const std::string system = body["messages"][0]["content"];
    std::string content;
    if (system.find("plan the layout") != std::string::npos) {
      const bool first = requests.size() == 1;
      content = first ? R"js(Here you go: {"objects": [{"id": "a", "prompt": "a cube", "size_estimate": [1,1,1]}],
                           "program": ["place(a, 1, (0,0,0), (x, 0, 0))"]})js"
                      : R"js({"objects": [{"id": "a", "prompt": "a cube", "size_estimate": [1,1,1]}],
                           "program": ["x = 2", "place(a, 1, (0,0,0), (x, 0, 0))"]})js";
    } else {
      content = R"({"region_tree": {"axis": "width", "fractions": [0.5, 0.5],
                   "children": [{"subprompt": "red"}, {"subprompt": "blue"}]}})";
    }
    res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", content}}}}}}}.dump(),
                    "application/json");
  });
  stub.start();

  RemotePlannerOptions opts;
  opts.endpoint = stub.url() + "/v1/chat/completions";
  opts.templates_dir = kData / "prompts";
  opts.api_key_env = "SEMSDS_TEST_PLANNER_KEY";
  ::unsetenv("SEMSDS_TEST_PLANNER_KEY");
  CHECK_THROWS_AS(RemotePlanner{opts}, Error);
  ::setenv("SEMSDS_TEST_PLANNER_KEY", "test-key", 1);
  RemotePlanner planner(opts);
  const Plan plan = planner.plan("a two-tone cube");
  CHECK(plan.scene_prompt == "a two-tone cube");
  REQUIRE(requests.size() == 3);
  const std::string repair = requests[1]["messages"][1]["content"];
  CHECK(repair.find("unbound variable 'x'") != std::string::npos);
  CHECK(plan.region_trees.at("a").leaf_count() == 2);
  CHECK(build_scene(plan).objects[0].transform.translation == Vec3(2, 0, 0));
}
