#include "semsds/optim/train.hpp"

#include "semsds/core/scene_io.hpp"
#include "semsds/error.hpp"
#include "semsds/render/image_io.hpp"
#include "semsds/render/rasterizer.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <numbers>
#include <map>
#include <set>
#include <sstream>

namespace semsds {

TrainingSetup prepare_training(const Plan& plan, const TrainConfig& config) {
  TrainingSetup out{build_scene(plan), {}, SubpromptSet(config.guidance.tau)};
  auto provider = make_embedding_provider(config.embedding);

  std::map<std::string, std::vector<double>> embeddings;
  std::vector<std::vector<double>> distinct;
  for (const auto& o : out.scene.objects) {
    for (const auto& r : o.regions) {
      if (embeddings.count(r.subprompt)) continue;
      auto e = provider->encode(r.subprompt);
      embeddings[r.subprompt] = e;
      distinct.push_back(std::move(e));
    }
  }
  if (distinct.size() < 2) {
    // The codec's contrastive term needs two samples; the scene prompt fills in.
    distinct.push_back(provider->encode(out.scene.prompt.empty() ? "scene" : out.scene.prompt));
  }
  CodecTrainOptions codec_opts = config.codec;
  codec_opts.seed = config.seed;
  out.codec = train_codec(distinct, codec_opts);

  for (std::size_t k = 0; k < out.scene.objects.size(); ++k) {
    auto& o = out.scene.objects[k];
    std::vector<std::vector<double>> features;
    for (std::size_t l = 0; l < o.regions.size(); ++l) {
      const auto& e = embeddings.at(o.regions[l].subprompt);
      out.prompts.add({int(k), int(l)}, o.regions[l].subprompt, e);
      features.push_back(out.codec.encode(e));
    }
    InitOptions init = config.init;
    init.seed = config.seed * 1000003ULL + k;
    initialize_object(o, int(k), init, [&](int region) { return features.at(std::size_t(region)); });
  }
  return out;
}

std::shared_ptr<GuidanceOracle> make_oracle(const TrainConfig& config, const Scene& scene) {
  const auto& oc = config.guidance.oracle;
  std::shared_ptr<GuidanceOracle> oracle;
  if (oc.kind == "analytic") {
    const auto schedule = NoiseSchedule::linear(
        config.guidance.steps, config.guidance.beta_start, config.guidance.beta_end,
        config.guidance.weighting == "constant" ? SdsWeighting::Constant : SdsWeighting::OneMinusAlphaBar);
    auto a = std::make_shared<AnalyticOracle>(schedule, OracleSpace{3, config.camera.height, config.camera.width});
    auto add = [&](const std::string& prompt) {
      if (a->has_target(prompt)) return;
      const auto it = oc.analytic_targets.find(prompt);
      a->set_target_color(prompt, it != oc.analytic_targets.end() ? it->second : oc.analytic_default);
    };
    add(scene.prompt);
    for (const auto& o : scene.objects) {
      add(o.prompt);
      for (const auto& r : o.regions) add(r.subprompt);
    }
    oracle = a;
  } else if (oc.kind == "remote") {
    std::string url = oc.url;
    if (url.empty()) {
      const char* env = std::getenv("GUIDANCE_URL");
      if (env == nullptr || *env == '\0') {
        throw_error(ErrorKind::Configuration, "remote oracle needs guidance.oracle.url or GUIDANCE_URL");
      }
      url = env;
    }
    oracle = std::make_shared<RemoteOracle>(url, oc.cfg_scale);
  } else {
    if (oc.recording.empty()) throw_error(ErrorKind::Configuration, "recorded oracle needs guidance.oracle.recording");
    oracle = std::make_shared<RecordedOracle>(oc.recording);
  }
  if (!oc.record_to.empty()) oracle = std::make_shared<RecordingOracle>(oracle, oc.record_to);
  return oracle;
}

std::vector<RegionColor> evaluate_regions(const Scene& scene, const EmbeddingCodec& codec,
                                          const SubpromptSet& prompts, const std::vector<Camera>& cameras,
                                          double background_alpha) {
  std::vector<RegionColor> out;
  for (const auto& s : prompts.entries()) out.push_back({s.id, s.text, Vec3::Zero(), 0});
  const Composition comp = compose_scene(scene);
  SegmentOptions seg;
  seg.background_alpha = background_alpha;
  for (const auto& cam : cameras) {
    const RenderOutput r = render(comp.gaussians, cam);
    const MaskSet m = segment(r, codec, prompts, seg);
    for (std::size_t v = 0; v < r.pixel_count(); ++v) {
      const int l = m.labels[v];
      if (l < 0) continue;
      out[std::size_t(l)].mean += Vec3(r.color[v * 3], r.color[v * 3 + 1], r.color[v * 3 + 2]);
      ++out[std::size_t(l)].pixels;
    }
  }
  for (auto& rc : out) {
    if (rc.pixels) rc.mean /= double(rc.pixels);
  }
  return out;
}

std::vector<Camera> turntable_cameras(const CameraTarget& t, int count, int size, double elevation_deg) {
  const double fov = 50.0;
  const double distance = 1.15 * t.radius / std::sin(0.5 * fov * std::numbers::pi / 180.0);
  std::vector<Camera> cams;
  for (int i = 0; i < count; ++i) {
    cams.push_back(orbit_camera(t.center, distance, elevation_deg, -180.0 + 360.0 * i / count, fov, size, size));
  }
  return cams;
}

std::vector<Camera> turntable_cameras(const Scene& scene, int count, int size, double elevation_deg) {
  return turntable_cameras(scene_target(scene), count, size, elevation_deg);
}

std::vector<Camera> object_cameras(const Scene& scene, int count, int size, double elevation_deg) {
  std::vector<Camera> cams;
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    const auto c = turntable_cameras(object_target(scene, k, false), count, size, elevation_deg);
    cams.insert(cams.end(), c.begin(), c.end());
  }
  return cams;
}

void write_turntable(const Scene& scene, const std::filesystem::path& dir, const std::string& prefix, int size,
                     int count) {
  std::filesystem::create_directories(dir);
  const Composition comp = compose_scene(scene);
  RenderOptions opts;
  opts.semantic = false;
  const auto cams = turntable_cameras(scene, count, size);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const RenderOutput r = render(comp.gaussians, cams[i], opts);
    write_png(dir / fmt::format("{}_{}.png", prefix, i), r.color, r.width, r.height, 3);
  }
}

Trainer::Trainer(TrainingSetup setup, TrainConfig config, std::shared_ptr<GuidanceOracle> oracle)
    : scene_(std::move(setup.scene)),
      codec_(std::move(setup.codec)),
      prompts_(std::move(setup.prompts)),
      config_(std::move(config)),
      oracle_(std::move(oracle)),
      schedule_(NoiseSchedule::linear(
          config_.guidance.steps, config_.guidance.beta_start, config_.guidance.beta_end,
          config_.guidance.weighting == "constant" ? SdsWeighting::Constant : SdsWeighting::OneMinusAlphaBar)),
      rng_(config_.seed) {
  config_.validate();
  if (!oracle_) throw_error(ErrorKind::InvalidParameter, "trainer needs an oracle");
  if (scene_.objects.empty()) throw_error(ErrorKind::InvalidInput, "scene has no objects");
  prompts_.set_tau(config_.guidance.tau);
  adapter_ = std::make_unique<OracleAdapter>(config_.camera.width, config_.camera.height, 3, oracle_->space());
  for (const auto& o : scene_.objects) {
    optimizers_.emplace_back(o, codec_.feature_dim());
    stats_.emplace_back();
    stats_.back().resize(o.gaussians.size());
  }
}

namespace {

std::string region_key(const Scene& scene, const RegionId& id) {
  return fmt::format("{}/{}", scene.objects[std::size_t(id.object)].id, id.region);
}

}  // namespace

nlohmann::json Trainer::step() {
  const std::size_t K = scene_.objects.size();
  const int cycle = config_.local_steps + config_.global_steps;
  const bool local = (step_ % cycle) < config_.local_steps;

  std::vector<std::size_t> active;
  Composition comp;
  CameraTarget target;
  std::string mode;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (local) {
    const std::size_t k = std::size_t(local_counter_++) % K;
    active = {k};
    comp = compose_local(scene_, k);
    target = object_target(scene_, k, true);
    mode = "local";
  } else if (K >= 2 && u01(rng_) < config_.pair_fraction) {
    std::uniform_int_distribution<std::size_t> pick(0, K - 1);
    std::size_t a = pick(rng_), b = pick(rng_);
    while (b == a) b = pick(rng_);
    if (b < a) std::swap(a, b);
    active = {a, b};
    comp = compose_scene(scene_, std::vector<std::string>{scene_.objects[a].id, scene_.objects[b].id});
    target = pair_target(scene_, a, b);
    mode = "pair";
  } else {
    for (std::size_t k = 0; k < K; ++k) active.push_back(k);
    comp = compose_scene(scene_);
    target = scene_target(scene_);
    mode = "scene";
  }
  const Camera camera = sample_camera(target, config_.camera, rng_);

  RenderOptions ropts;
  ropts.retain = true;
  const RenderOutput out = render(comp.gaussians, camera, ropts);

  // Subprompts of the rendered objects only.
  SubpromptSet sub(prompts_.tau());
  for (const auto& s : prompts_.entries()) {
    if (std::find(active.begin(), active.end(), std::size_t(s.id.object)) != active.end()) {
      sub.add(s.id, s.text, s.embedding);
    }
  }
  SegmentOptions seg;
  seg.background_alpha = config_.guidance.background_alpha;
  MaskSet masks = segment(out, codec_, sub, seg);
  const bool partition = masks.is_partition();
  pool_masks(masks, adapter_->stride(), config_.guidance.pool_dilation);

  std::map<std::size_t, std::string> views;
  for (std::size_t k : active) {
    const auto& o = scene_.objects[k];
    const Vec3 center = local ? o.local_box().center() : o.world_center();
    std::optional<Quat> rot;
    if (!local && config_.view.object_frame) rot = o.transform.rotation;
    views[k] = select_view_descriptor(camera.position, center, o.id, config_.view, rot).text();
  }
  std::vector<ScoreTerm> terms;
  for (std::size_t j = 0; j < sub.size(); ++j) {
    terms.push_back({sub[j].text, views.at(std::size_t(sub[j].id.object)), &masks.pooled[j]});
  }
  const std::string background = local ? scene_.objects[active[0]].prompt : scene_.prompt;
  terms.push_back({background, "", &masks.pooled_background});

  const Tensor x = adapter_->forward(out.color);
  std::uniform_int_distribution<int> pick_t(config_.guidance.t_min, config_.guidance.t_max);
  const int t = pick_t(rng_);
  const Tensor eps = gaussian_noise(x.channels, x.height, x.width, rng_);
  const SdsResult sds = semantic_sds_grad(x, terms, *oracle_, schedule_, t, eps);

  const std::vector<double> dl_dcolor = adapter_->adjoint(sds.grad);
  const RenderGradients rg = render_backward(out, dl_dcolor);
  const auto grads = backward_to_objects(scene_, comp, rg);

  // View-space gradients are accumulated in normalized device coordinates.
  const double half_w = 0.5 * camera.width, half_h = 0.5 * camera.height;
  for (const auto& span : comp.spans) {
    DensityStats& st = stats_[span.object];
    for (std::size_t i = 0; i < span.count; ++i) {
      const std::size_t flat = span.offset + i;
      if (out.screen_radius[flat] <= 0.0) continue;
      const Vec2& g = rg.gaussians[flat].mean2d;
      st.grad_accum[i] += Vec2(g.x() * half_w, g.y() * half_h).norm();
      ++st.visible[i];
      st.max_screen_radius[i] = std::max(st.max_screen_radius[i], out.screen_radius[flat]);
    }
  }
  for (const auto& og : grads) {
    ObjectModel& o = scene_.objects[og.object];
    optimizers_[og.object].step_gaussians(o, og.local, config_.lr, config_.semantic_trainable);
    if (!local) optimizers_[og.object].step_transform(o, og.transform, config_.lr);
  }

  ++step_;
  nlohmann::json line;
  line["step"] = step_;
  line["mode"] = mode;
  nlohmann::json ids = nlohmann::json::array();
  for (std::size_t k : active) ids.push_back(scene_.objects[k].id);
  line["objects"] = ids;
  line["t"] = t;
  line["loss"] = sds.residual;
  line["partition"] = partition;
  line["oracle_calls"] = sds.score.oracle_calls;
  nlohmann::json share = nlohmann::json::object();
  const double pixels = double(out.pixel_count());
  for (std::size_t j = 0; j < sub.size(); ++j) share[region_key(scene_, sub[j].id)] = double(masks.pixel_count(int(j))) / pixels;
  line["region_share"] = share;
  line["events"] = density_control(step_);
  line["gaussians"] = scene_.gaussian_count();
  metrics_.push_back(line);
  return line;
}

nlohmann::json Trainer::density_control(int step) {
  nlohmann::json events = nlohmann::json::array();
  const auto& dc = config_.densify;
  const bool last = step >= config_.iterations;
  if (last) return events;
  const bool do_densify = step >= dc.start && step <= dc.until && step % dc.interval == 0;
  const bool do_compact = step % dc.compactness_interval == 0;
  const bool do_prune = step % config_.prune.interval == 0;
  if (!do_densify && !do_compact && !do_prune) return events;

  const BoundingBox bounds = scene_.world_bounds();
  const double diagonal = bounds.extent().norm();
  const double image_diagonal = std::hypot(double(config_.camera.width), double(config_.camera.height));
  for (std::size_t k = 0; k < scene_.objects.size(); ++k) {
    ObjectModel& o = scene_.objects[k];
    auto apply = [&](const char* kind, const DensityChange& c) {
      optimizers_[k].remap(o, c.origin, c.fresh);
      stats_[k].remap(c.origin, c.fresh);
      if (!c.changed() && !c.cap_hit) return;
      nlohmann::json e{{"kind", kind}, {"object", o.id}, {"count", o.gaussians.size()}};
      if (c.cloned) e["cloned"] = c.cloned;
      if (c.split) e["split"] = c.split;
      if (c.inserted) e["inserted"] = c.inserted;
      if (c.removed_opacity) e["removed_opacity"] = c.removed_opacity;
      if (c.removed_world) e["removed_world"] = c.removed_world;
      if (c.removed_screen) e["removed_screen"] = c.removed_screen;
      if (c.cap_hit) e["cap_hit"] = true;
      events.push_back(e);
    };
    if (do_densify) apply("densify", densify(o, stats_[k], dc, diagonal, rng_));
    if (do_compact) apply("compactness", compactness_densify(o, dc));
    if (do_prune) apply("prune", prune(o, stats_[k], config_.prune, diagonal, image_diagonal));
    if (do_densify || do_prune) stats_[k].reset();
  }
  return events;
}

void Trainer::run(const std::function<void(const nlohmann::json&)>& on_metrics,
                  const std::optional<std::filesystem::path>& out_dir) {
  while (step_ < config_.iterations) {
    nlohmann::json line;
    try {
      line = step();
    } catch (...) {
      if (out_dir) save_checkpoint(*out_dir / "checkpoint");
      throw;
    }
    if (on_metrics) on_metrics(line);
    if (out_dir && config_.checkpoint_every > 0 && step_ % config_.checkpoint_every == 0) {
      save_checkpoint(*out_dir / "checkpoint");
    }
    if (out_dir && config_.preview_every > 0 && step_ % config_.preview_every == 0) {
      write_turntable(scene_, *out_dir / "previews", fmt::format("step{:06d}", step_), config_.preview_size);
    }
  }
}

void Trainer::save_checkpoint(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_scene(dir / "scene.json", scene_, codec_.feature_dim());
  codec_.save(dir / "codec.aec");
  {
    std::ofstream c(dir / "config.json");
    c << to_json(config_).dump(2) << '\n';
  }
  std::ostringstream rng;
  rng << rng_;
  nlohmann::json prompts = nlohmann::json::array();
  for (const auto& s : prompts_.entries()) {
    prompts.push_back({{"object", s.id.object}, {"region", s.id.region}, {"text", s.text}, {"embedding", s.embedding}});
  }
  const nlohmann::json state{{"step", step_}, {"local_counter", local_counter_}, {"rng", rng.str()},
                             {"tau", prompts_.tau()}, {"prompts", prompts}};
  std::ofstream s(dir / "state.json");
  if (!s) throw_error(ErrorKind::Io, "cannot write checkpoint in " + dir.string());
  s << state.dump(2) << '\n';
}

Trainer Trainer::resume(const std::filesystem::path& dir, std::shared_ptr<GuidanceOracle> oracle,
                        const std::optional<TrainConfig>& config) {
  std::ifstream in(dir / "state.json");
  if (!in) throw_error(ErrorKind::NotFound, "no checkpoint state in " + dir.string());
  nlohmann::json state;
  in >> state;
  TrainingSetup setup;
  setup.scene = load_scene(dir / "scene.json");
  setup.codec = EmbeddingCodec::load(dir / "codec.aec");
  setup.prompts = SubpromptSet(state.at("tau").get<double>());
  for (const auto& p : state.at("prompts")) {
    setup.prompts.add({p.at("object").get<int>(), p.at("region").get<int>()}, p.at("text").get<std::string>(),
                      p.at("embedding").get<std::vector<double>>());
  }
  TrainConfig cfg = config ? *config : load_config(dir / "config.json");
  Trainer t(std::move(setup), cfg, std::move(oracle));
  t.step_ = state.at("step").get<int>();
  t.local_counter_ = state.at("local_counter").get<int>();
  std::istringstream rng(state.at("rng").get<std::string>());
  rng >> t.rng_;
  return t;
}

}  // namespace semsds
