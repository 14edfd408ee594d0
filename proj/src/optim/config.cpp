#include "semsds/optim/config.hpp"

#include "semsds/error.hpp"

#include <fstream>
#include <sstream>

namespace semsds {

namespace {

[[noreturn]] void config_error(const std::string& message) {
  throw_error(ErrorKind::Configuration, message);
}

const char* shape_name(InitShape s) {
  switch (s) {
    case InitShape::Box: return "box";
    case InitShape::Sphere: return "sphere";
    case InitShape::Ellipsoid: return "ellipsoid";
  }
  return "box";
}

// Rejects keys that the defaults do not have. Free-form maps are skipped.
void check_keys(const nlohmann::json& user, const nlohmann::json& defaults, const std::string& path) {
  if (!user.is_object()) config_error(path + " must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string where = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.contains(it.key())) config_error("unknown config field '" + where + "'");
    if (where == "guidance.oracle.analytic_targets") continue;
    const auto& d = defaults.at(it.key());
    if (d.is_object()) check_keys(it.value(), d, where);
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& path) {
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    config_error("config field '" + path + key + "' has the wrong type");
  }
}

}  // namespace

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["iterations"] = c.iterations;
  j["local_steps"] = c.local_steps;
  j["global_steps"] = c.global_steps;
  j["pair_fraction"] = c.pair_fraction;
  j["semantic_trainable"] = c.semantic_trainable;
  j["lr"] = {{"mean", c.lr.mean},
             {"scale", c.lr.scale},
             {"rotation", c.lr.rotation},
             {"opacity", c.lr.opacity},
             {"color", c.lr.color},
             {"semantic", c.lr.semantic},
             {"transform_scale", c.lr.transform_scale},
             {"transform_rotation", c.lr.transform_rotation},
             {"transform_translation", c.lr.transform_translation}};
  j["densify"] = {{"interval", c.densify.interval},
                  {"start", c.densify.start},
                  {"until", c.densify.until},
                  {"grad_threshold", c.densify.grad_threshold},
                  {"clone_scale_fraction", c.densify.clone_scale_fraction},
                  {"split_factor", c.densify.split_factor},
                  {"split_samples", c.densify.split_samples},
                  {"compactness_interval", c.densify.compactness_interval},
                  {"max_gaussians_per_object", c.densify.max_gaussians_per_object}};
  j["prune"] = {{"interval", c.prune.interval},
                {"alpha_min", c.prune.alpha_min},
                {"world_radius_fraction", c.prune.world_radius_fraction},
                {"screen_radius_fraction", c.prune.screen_radius_fraction}};
  j["camera"] = {{"elevation_min", c.camera.elevation_min}, {"elevation_max", c.camera.elevation_max},
                 {"azimuth_min", c.camera.azimuth_min},     {"azimuth_max", c.camera.azimuth_max},
                 {"fov_min", c.camera.fov_min},             {"fov_max", c.camera.fov_max},
                 {"distance_min", c.camera.distance_min},   {"distance_max", c.camera.distance_max},
                 {"width", c.camera.width},                 {"height", c.camera.height}};
  j["view"] = {{"overhead_elevation", c.view.overhead_elevation},
               {"front_half_angle", c.view.front_half_angle},
               {"object_frame", c.view.object_frame}};
  const auto& o = c.guidance.oracle;
  j["guidance"] = {{"steps", c.guidance.steps},
                   {"beta_start", c.guidance.beta_start},
                   {"beta_end", c.guidance.beta_end},
                   {"weighting", c.guidance.weighting},
                   {"t_min", c.guidance.t_min},
                   {"t_max", c.guidance.t_max},
                   {"tau", c.guidance.tau},
                   {"pool_dilation", c.guidance.pool_dilation},
                   {"background_alpha", c.guidance.background_alpha},
                   {"oracle",
                    {{"kind", o.kind},
                     {"url", o.url},
                     {"recording", o.recording},
                     {"record_to", o.record_to},
                     {"cfg_scale", o.cfg_scale},
                     {"analytic_targets", o.analytic_targets},
                     {"analytic_default", o.analytic_default}}}};
  j["init"] = {{"shape", shape_name(c.init.shape)},
               {"count", c.init.count},
               {"opacity", c.init.opacity},
               {"color", {c.init.color.x(), c.init.color.y(), c.init.color.z()}},
               {"scale_factor", c.init.scale_factor}};
  j["embedding"] = {{"kind", c.embedding.kind},
                    {"dim", c.embedding.dim},
                    {"seed", c.embedding.seed},
                    {"path", c.embedding.path},
                    {"url", c.embedding.url}};
  j["codec"] = {{"feature_dim", c.codec.feature_dim},
                {"hidden", c.codec.hidden},
                {"epochs", c.codec.epochs},
                {"learning_rate", c.codec.learning_rate},
                {"tau", c.codec.tau},
                {"checkpoint_every", c.codec.checkpoint_every}};
  j["checkpoint_every"] = c.checkpoint_every;
  j["preview_every"] = c.preview_every;
  j["preview_size"] = c.preview_size;
  return j;
}

TrainConfig config_from_json(const nlohmann::json& user) {
  const nlohmann::json defaults = to_json(TrainConfig{});
  check_keys(user, defaults, "");
  nlohmann::json j = defaults;
  j.merge_patch(user);
  // merge_patch replaces maps wholesale only when given; keep user targets exact.
  if (user.contains("guidance") && user["guidance"].contains("oracle") &&
      user["guidance"]["oracle"].contains("analytic_targets")) {
    j["guidance"]["oracle"]["analytic_targets"] = user["guidance"]["oracle"]["analytic_targets"];
  }

  TrainConfig c;
  read(j, "seed", c.seed, "");
  read(j, "iterations", c.iterations, "");
  read(j, "local_steps", c.local_steps, "");
  read(j, "global_steps", c.global_steps, "");
  read(j, "pair_fraction", c.pair_fraction, "");
  read(j, "semantic_trainable", c.semantic_trainable, "");
  const auto& lr = j["lr"];
  read(lr, "mean", c.lr.mean, "lr.");
  read(lr, "scale", c.lr.scale, "lr.");
  read(lr, "rotation", c.lr.rotation, "lr.");
  read(lr, "opacity", c.lr.opacity, "lr.");
  read(lr, "color", c.lr.color, "lr.");
  read(lr, "semantic", c.lr.semantic, "lr.");
  read(lr, "transform_scale", c.lr.transform_scale, "lr.");
  read(lr, "transform_rotation", c.lr.transform_rotation, "lr.");
  read(lr, "transform_translation", c.lr.transform_translation, "lr.");
  const auto& d = j["densify"];
  read(d, "interval", c.densify.interval, "densify.");
  read(d, "start", c.densify.start, "densify.");
  read(d, "until", c.densify.until, "densify.");
  read(d, "grad_threshold", c.densify.grad_threshold, "densify.");
  read(d, "clone_scale_fraction", c.densify.clone_scale_fraction, "densify.");
  read(d, "split_factor", c.densify.split_factor, "densify.");
  read(d, "split_samples", c.densify.split_samples, "densify.");
  read(d, "compactness_interval", c.densify.compactness_interval, "densify.");
  read(d, "max_gaussians_per_object", c.densify.max_gaussians_per_object, "densify.");
  const auto& p = j["prune"];
  read(p, "interval", c.prune.interval, "prune.");
  read(p, "alpha_min", c.prune.alpha_min, "prune.");
  read(p, "world_radius_fraction", c.prune.world_radius_fraction, "prune.");
  read(p, "screen_radius_fraction", c.prune.screen_radius_fraction, "prune.");
  const auto& cam = j["camera"];
  read(cam, "elevation_min", c.camera.elevation_min, "camera.");
  read(cam, "elevation_max", c.camera.elevation_max, "camera.");
  read(cam, "azimuth_min", c.camera.azimuth_min, "camera.");
  read(cam, "azimuth_max", c.camera.azimuth_max, "camera.");
  read(cam, "fov_min", c.camera.fov_min, "camera.");
  read(cam, "fov_max", c.camera.fov_max, "camera.");
  read(cam, "distance_min", c.camera.distance_min, "camera.");
  read(cam, "distance_max", c.camera.distance_max, "camera.");
  read(cam, "width", c.camera.width, "camera.");
  read(cam, "height", c.camera.height, "camera.");
  const auto& v = j["view"];
  read(v, "overhead_elevation", c.view.overhead_elevation, "view.");
  read(v, "front_half_angle", c.view.front_half_angle, "view.");
  read(v, "object_frame", c.view.object_frame, "view.");
  const auto& g = j["guidance"];
  read(g, "steps", c.guidance.steps, "guidance.");
  read(g, "beta_start", c.guidance.beta_start, "guidance.");
  read(g, "beta_end", c.guidance.beta_end, "guidance.");
  read(g, "weighting", c.guidance.weighting, "guidance.");
  read(g, "t_min", c.guidance.t_min, "guidance.");
  read(g, "t_max", c.guidance.t_max, "guidance.");
  read(g, "tau", c.guidance.tau, "guidance.");
  read(g, "pool_dilation", c.guidance.pool_dilation, "guidance.");
  read(g, "background_alpha", c.guidance.background_alpha, "guidance.");
  const auto& o = g["oracle"];
  read(o, "kind", c.guidance.oracle.kind, "guidance.oracle.");
  read(o, "url", c.guidance.oracle.url, "guidance.oracle.");
  read(o, "recording", c.guidance.oracle.recording, "guidance.oracle.");
  read(o, "record_to", c.guidance.oracle.record_to, "guidance.oracle.");
  read(o, "cfg_scale", c.guidance.oracle.cfg_scale, "guidance.oracle.");
  read(o, "analytic_targets", c.guidance.oracle.analytic_targets, "guidance.oracle.");
  read(o, "analytic_default", c.guidance.oracle.analytic_default, "guidance.oracle.");
  const auto& in = j["init"];
  std::string shape;
  read(in, "shape", shape, "init.");
  try {
    c.init.shape = parse_init_shape(shape);
  } catch (const Error& e) {
    config_error(std::string("init.shape: ") + e.what());
  }
  read(in, "count", c.init.count, "init.");
  read(in, "opacity", c.init.opacity, "init.");
  std::vector<double> color;
  read(in, "color", color, "init.");
  if (color.size() != 3) config_error("init.color needs three values");
  c.init.color = Vec3(color[0], color[1], color[2]);
  read(in, "scale_factor", c.init.scale_factor, "init.");
  const auto& e = j["embedding"];
  read(e, "kind", c.embedding.kind, "embedding.");
  read(e, "dim", c.embedding.dim, "embedding.");
  read(e, "seed", c.embedding.seed, "embedding.");
  read(e, "path", c.embedding.path, "embedding.");
  read(e, "url", c.embedding.url, "embedding.");
  const auto& k = j["codec"];
  read(k, "feature_dim", c.codec.feature_dim, "codec.");
  read(k, "hidden", c.codec.hidden, "codec.");
  read(k, "epochs", c.codec.epochs, "codec.");
  read(k, "learning_rate", c.codec.learning_rate, "codec.");
  read(k, "tau", c.codec.tau, "codec.");
  read(k, "checkpoint_every", c.codec.checkpoint_every, "codec.");
  read(j, "checkpoint_every", c.checkpoint_every, "");
  read(j, "preview_every", c.preview_every, "");
  read(j, "preview_size", c.preview_size, "");
  c.codec.seed = c.seed;
  c.init.seed = c.seed;
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) config_error(std::string("invalid config: ") + what);
  };
  require(iterations >= 0, "iterations must be >= 0");
  require(local_steps >= 0 && global_steps >= 0 && local_steps + global_steps > 0,
          "local_steps and global_steps must be >= 0 and not both zero");
  require(pair_fraction >= 0.0 && pair_fraction <= 1.0, "pair_fraction must lie in [0, 1]");
  require(densify.interval > 0 && densify.compactness_interval > 0 && prune.interval > 0,
          "densify, compactness and prune intervals must be > 0");
  require(densify.grad_threshold > 0.0, "densify.grad_threshold must be > 0");
  require(densify.split_factor > 1.0 && densify.split_samples >= 2, "split needs factor > 1 and >= 2 samples");
  require(densify.max_gaussians_per_object > 0, "densify.max_gaussians_per_object must be > 0");
  require(prune.alpha_min > 0.0 && prune.alpha_min < 1.0, "prune.alpha_min must lie in (0, 1)");
  require(prune.world_radius_fraction > 0.0 && prune.screen_radius_fraction > 0.0, "prune radius fractions must be > 0");
  require(camera.elevation_min <= camera.elevation_max && camera.elevation_min >= -89.0 &&
              camera.elevation_max <= 89.0,
          "camera elevation range must be ordered within [-89, 89]");
  require(camera.azimuth_min <= camera.azimuth_max, "camera azimuth range must be ordered");
  require(camera.fov_min > 0.0 && camera.fov_min <= camera.fov_max && camera.fov_max < 180.0,
          "camera fov range must be ordered within (0, 180)");
  require(camera.distance_min > 0.0 && camera.distance_min <= camera.distance_max, "camera distance range");
  require(camera.width > 0 && camera.height > 0, "camera size must be positive");
  require(view.overhead_elevation > 0.0 && view.overhead_elevation < 90.0, "view.overhead_elevation must lie in (0, 90)");
  require(view.front_half_angle > 0.0 && view.front_half_angle < 90.0, "view.front_half_angle must lie in (0, 90)");
  require(guidance.steps >= 2 && guidance.t_min >= 1 && guidance.t_min <= guidance.t_max &&
              guidance.t_max <= guidance.steps,
          "guidance timesteps must satisfy 1 <= t_min <= t_max <= steps");
  require(guidance.weighting == "one_minus_alpha_bar" || guidance.weighting == "constant",
          "guidance.weighting must be one_minus_alpha_bar or constant");
  require(guidance.tau > 0.0, "guidance.tau must be > 0");
  require(guidance.pool_dilation >= 1 && guidance.pool_dilation % 2 == 1, "guidance.pool_dilation must be odd");
  require(guidance.background_alpha >= 0.0 && guidance.background_alpha < 1.0, "guidance.background_alpha");
  const auto& kind = guidance.oracle.kind;
  require(kind == "analytic" || kind == "remote" || kind == "recorded",
          "guidance.oracle.kind must be analytic, remote or recorded");
  require(guidance.oracle.analytic_default.size() == 3, "guidance.oracle.analytic_default needs 3 values");
  for (const auto& [prompt, rgb] : guidance.oracle.analytic_targets) {
    (void)prompt;
    require(rgb.size() == 3, "every analytic target needs 3 values");
  }
  require(init.count > 0 && init.opacity > 0.0 && init.opacity < 1.0 && init.scale_factor > 0.0, "init");
  require(embedding.dim > 0, "embedding.dim must be > 0");
  require(codec.feature_dim > 0 && codec.hidden > 0 && codec.epochs >= 0, "codec sizes");
  require(checkpoint_every >= 0 && preview_every >= 0 && preview_size > 0, "checkpoint/preview cadence");
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    config_error("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

TrainConfig apply_overrides(const TrainConfig& config, const std::vector<std::string>& overrides) {
  nlohmann::json j = to_json(config);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) config_error("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq), text = o.substr(eq + 1);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
      value = text;
    }
    nlohmann::json* node = &j;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const bool free_map = i > 0 && parts[i - 1] == "analytic_targets";
      if (!node->is_object() || (!node->contains(parts[i]) && !free_map)) {
        config_error("unknown config field '" + key + "'");
      }
      node = &(*node)[parts[i]];
    }
    *node = value;
  }
  return config_from_json(j);
}

}  // namespace semsds
