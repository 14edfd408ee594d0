#include "semsds/core/scene_io.hpp"

#include "semsds/error.hpp"
#include "semsds/util/binary_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace semsds {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kGaussianMagic = "SGS1";

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw_error(ErrorKind::InvalidInput, "expected a 3-vector");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void write_gaussians(const fs::path& path, const std::vector<Gaussian3D>& gaussians,
                     int feature_dim) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw_error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  binio::write_magic(os, kGaussianMagic);
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(gaussians.size()));
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(feature_dim));
  binio::write<std::uint32_t>(os, 0);
  for (const auto& g : gaussians) {
    if (static_cast<int>(g.semantic.size()) != feature_dim) {
      throw_error(ErrorKind::InvalidInput, "Gaussian semantic size does not match d_f");
    }
    auto f = [&os](double v) { binio::write<float>(os, static_cast<float>(v)); };
    for (int i = 0; i < 3; ++i) f(g.mean[i]);
    for (int i = 0; i < 3; ++i) f(g.scale[i]);
    f(g.rotation.w());
    f(g.rotation.x());
    f(g.rotation.y());
    f(g.rotation.z());
    f(g.opacity);
    for (int i = 0; i < 3; ++i) f(g.color[i]);
    for (double s : g.semantic) f(s);
    f(g.region.object);
    f(g.region.region);
  }
  if (!os) throw_error(ErrorKind::Io, "failed writing " + path.string());
}

GaussianPayload read_gaussians(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw_error(ErrorKind::Io, "cannot open " + path.string());
  if (!binio::read_magic(is, kGaussianMagic)) {
    throw_error(ErrorKind::InvalidInput, path.string() + " is not an SGS1 payload");
  }
  const auto count = binio::read<std::uint32_t>(is);
  const auto feature_dim = binio::read<std::uint32_t>(is);
  binio::read<std::uint32_t>(is);
  GaussianPayload out;
  out.feature_dim = static_cast<int>(feature_dim);
  out.gaussians.reserve(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    auto f = [&is]() { return static_cast<double>(binio::read<float>(is)); };
    Gaussian3D g;
    for (int i = 0; i < 3; ++i) g.mean[i] = f();
    for (int i = 0; i < 3; ++i) g.scale[i] = f();
    const double w = f(), x = f(), y = f(), z = f();
    g.rotation = Quat(w, x, y, z).normalized();
    g.opacity = f();
    for (int i = 0; i < 3; ++i) g.color[i] = f();
    g.semantic.resize(feature_dim);
    for (auto& s : g.semantic) s = f();
    g.region.object = static_cast<int>(f());
    g.region.region = static_cast<int>(f());
    out.gaussians.push_back(std::move(g));
  }
  if (!is) throw_error(ErrorKind::InvalidInput, path.string() + " is truncated");
  return out;
}

json transform_to_json(const ObjectTransform& xf) {
  return {{"scale", xf.scale},
          {"rotation_quat_wxyz",
           json::array({xf.rotation.w(), xf.rotation.x(), xf.rotation.y(), xf.rotation.z()})},
          {"translation", vec_to_json(xf.translation)}};
}

ObjectTransform transform_from_json(const json& j) {
  ObjectTransform xf;
  xf.scale = j.at("scale").get<double>();
  const auto& q = j.at("rotation_quat_wxyz");
  if (!q.is_array() || q.size() != 4) {
    throw_error(ErrorKind::InvalidInput, "rotation_quat_wxyz must have 4 components");
  }
  xf.rotation = Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                     q[3].get<double>())
                    .normalized();
  xf.translation = vec_from_json(j.at("translation"));
  return xf;
}

json box_to_json(const BoundingBox& box) {
  return {{"min", vec_to_json(box.min)}, {"max", vec_to_json(box.max)}};
}

BoundingBox box_from_json(const json& j) {
  BoundingBox b{vec_from_json(j.at("min")), vec_from_json(j.at("max"))};
  validate(b);
  return b;
}

void save_scene(const fs::path& path, const Scene& scene, int feature_dim) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  json doc;
  doc["scene_prompt"] = scene.prompt;
  doc["feature_dim"] = feature_dim;
  doc["objects"] = json::array();
  for (const auto& o : scene.objects) {
    const std::string payload = o.id + ".sgs";
    write_gaussians(dir / payload, o.gaussians, feature_dim);
    json regions = json::array();
    for (const auto& r : o.regions) {
      regions.push_back({{"subprompt", r.subprompt}, {"box", box_to_json(r.box)}});
    }
    doc["objects"].push_back({{"id", o.id},
                              {"prompt", o.prompt},
                              {"transform", transform_to_json(o.transform)},
                              {"regions", regions},
                              {"gaussians_file", payload}});
  }
  std::ofstream os(path);
  if (!os) throw_error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  os << doc.dump(2) << '\n';
}

Scene load_scene(const fs::path& path, int* feature_dim) {
  std::ifstream is(path);
  if (!is) throw_error(ErrorKind::Io, "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::exception& e) {
    throw_error(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  Scene scene;
  int dim = doc.value("feature_dim", -1);
  try {
    scene.prompt = doc.at("scene_prompt").get<std::string>();
    for (const auto& jo : doc.at("objects")) {
      ObjectModel o;
      o.id = jo.at("id").get<std::string>();
      o.prompt = jo.value("prompt", std::string());
      o.transform = transform_from_json(jo.at("transform"));
      for (const auto& jr : jo.value("regions", json::array())) {
        o.regions.push_back({jr.at("subprompt").get<std::string>(), box_from_json(jr.at("box"))});
      }
      if (jo.contains("gaussians_file")) {
        auto payload = read_gaussians(dir / jo.at("gaussians_file").get<std::string>());
        if (dim >= 0 && payload.feature_dim != dim && !payload.gaussians.empty()) {
          throw_error(ErrorKind::InvalidInput, "payload d_f disagrees with scene document");
        }
        dim = payload.feature_dim;
        o.gaussians = std::move(payload.gaussians);
      }
      scene.objects.push_back(std::move(o));
    }
  } catch (const json::exception& e) {
    throw_error(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
  if (feature_dim) *feature_dim = dim;
  return scene;
}

}  // namespace semsds
