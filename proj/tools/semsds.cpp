// semsds: plan, validate, train, render and check.
// Exit codes: 0 success, 1 runtime failure, 2 validation failure,
// 3 configuration or environment failure.

#include "semsds/core/scene_io.hpp"
#include "semsds/error.hpp"
#include "semsds/layout/plan.hpp"
#include "semsds/layout/validate.hpp"
#include "semsds/optim/train.hpp"

#include "../tests/support/suites.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace semsds;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kValidation = 2;
constexpr int kConfiguration = 3;

const fs::path kDefaultData = SEMSDS_DATA_DIR;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation:
      return kValidation;
    case ErrorKind::Configuration:
      return kConfiguration;
    default:
      return kRuntime;
  }
}

void print_diagnostics(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) std::cerr << "  " << d.str() << '\n';
}

struct Options {
  fs::path data = kDefaultData;
  // plan
  std::string prompt;
  std::string planner = "canned";
  fs::path fixture;
  std::string planner_url;
  std::string planner_model = "gpt-4o";
  // shared
  fs::path plan_path;
  fs::path config_path;
  std::vector<std::string> overrides;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::string oracle;
  std::optional<int> iterations;
  fs::path resume;
  // render
  fs::path checkpoint;
  int size = 256;
  int views = 8;
  // check
  std::vector<std::string> suites;
  bool json = false;
};

// Validation report for a plan; returns true when the plan is usable.
bool report_plan(const Plan& plan) {
  const auto diags = check_plan(plan);
  if (!diags.empty()) {
    std::cerr << "plan has " << diags.size() << " problem(s):\n";
    print_diagnostics(diags);
    return false;
  }
  const Scene scene = build_scene(plan);
  const LayoutReport layout = validate_layout(scene);
  std::cout << fmt::format("plan '{}': {} objects, program of {} statements\n", plan.scene_prompt,
                           plan.objects.size(), plan.program.size());
  for (const auto& o : scene.objects) {
    std::cout << fmt::format("  {}: {} region(s), scale {:.4g}, t ({:.4g}, {:.4g}, {:.4g})\n", o.id,
                             o.regions.size(), o.transform.scale, o.transform.translation.x(),
                             o.transform.translation.y(), o.transform.translation.z());
  }
  for (const auto& p : layout.pairs) {
    if (p.overlap_flag || p.gap_flag) {
      std::cout << fmt::format("  warning: {} / {}: overlap {:.3f}, distance {:.3f}\n", p.a, p.b,
                               p.overlap_fraction, p.distance);
    }
  }
  return true;
}

int cmd_plan(const Options& o) {
  std::unique_ptr<PlannerClient> planner;
  if (o.planner == "canned") {
    planner = std::make_unique<CannedPlanner>(o.fixture.empty() ? o.data / "fixtures/plans" : o.fixture);
  } else if (o.planner == "remote") {
    RemotePlannerOptions r;
    r.endpoint = o.planner_url;
    if (r.endpoint.empty()) {
      const char* env = std::getenv("PLANNER_URL");
      if (env) r.endpoint = env;
    }
    if (r.endpoint.empty()) {
      std::cerr << "remote planner needs --planner-url or PLANNER_URL\n";
      return kConfiguration;
    }
    if (!std::getenv(r.api_key_env.c_str())) {
      std::cerr << "remote planner needs an API key: export " << r.api_key_env << "=<key>\n";
      return kConfiguration;
    }
    r.model = o.planner_model;
    r.templates_dir = o.data / "prompts";
    planner = std::make_unique<RemotePlanner>(r);
  } else {
    std::cerr << "unknown planner '" << o.planner << "' (canned or remote)\n";
    return kConfiguration;
  }
  const Plan plan = planner->plan(o.prompt);
  if (!report_plan(plan)) return kValidation;
  const fs::path out = o.out.empty() ? fs::path("plan.json") : o.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_plan(out, plan);
  std::cout << "wrote " << out.string() << '\n';
  return kOk;
}

int cmd_validate(const Options& o) {
  const Plan plan = load_plan(o.plan_path);
  return report_plan(plan) ? kOk : kValidation;
}

// --config (else `fallback`) with --seed, --oracle, --iterations and --set applied.
TrainConfig resolve_config(const Options& o, const TrainConfig& fallback) {
  TrainConfig cfg = o.config_path.empty() ? fallback : load_config(o.config_path);
  std::vector<std::string> overrides = o.overrides;
  if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
  if (!o.oracle.empty()) overrides.push_back("guidance.oracle.kind=" + o.oracle);
  if (o.iterations) overrides.push_back("iterations=" + std::to_string(*o.iterations));
  return overrides.empty() ? cfg : apply_overrides(cfg, overrides);
}

nlohmann::json region_report(const Trainer& t) {
  const auto& cfg = t.config();
  const auto cams = object_cameras(t.scene(), 8, cfg.camera.width);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : evaluate_regions(t.scene(), t.codec(), t.prompts(), cams, cfg.guidance.background_alpha)) {
    nlohmann::json j{{"object", t.scene().objects[std::size_t(r.id.object)].id},
                     {"region", r.id.region},
                     {"subprompt", r.subprompt},
                     {"mean_color", {r.mean.x(), r.mean.y(), r.mean.z()}},
                     {"pixels", r.pixels}};
    if (cfg.guidance.oracle.kind == "analytic") {
      const auto it = cfg.guidance.oracle.analytic_targets.find(r.subprompt);
      const auto& target = it != cfg.guidance.oracle.analytic_targets.end() ? it->second
                                                                            : cfg.guidance.oracle.analytic_default;
      double err = 0.0;
      for (int c = 0; c < 3; ++c) err = std::max(err, std::abs(r.mean[c] - target[std::size_t(c)]));
      j["target"] = target;
      j["max_channel_error"] = err;
    }
    out.push_back(j);
  }
  return out;
}

int cmd_train(const Options& o) {
  const fs::path out = o.out.empty() ? fs::path("run") : o.out;
  fs::create_directories(out);

  std::optional<Trainer> trainer;
  if (!o.resume.empty()) {
    const TrainConfig cfg = resolve_config(o, load_config(o.resume / "config.json"));
    const Scene scene = load_scene(o.resume / "scene.json");
    trainer.emplace(Trainer::resume(o.resume, make_oracle(cfg, scene), cfg));
  } else {
    if (o.plan_path.empty()) {
      std::cerr << "train needs a plan file (or --resume)\n";
      return kConfiguration;
    }
    const Plan plan = load_plan(o.plan_path);
    const auto diags = check_plan(plan);
    if (!diags.empty()) {
      std::cerr << "plan is invalid:\n";
      print_diagnostics(diags);
      return kValidation;
    }
    const TrainConfig cfg = resolve_config(o, TrainConfig{});
    auto setup = prepare_training(plan, cfg);
    auto oracle = make_oracle(cfg, setup.scene);
    trainer.emplace(std::move(setup), cfg, oracle);
  }

  std::ofstream metrics(out / "metrics.jsonl", o.resume.empty() ? std::ios::trunc : std::ios::app);
  trainer->run(
      [&](const nlohmann::json& line) {
        metrics << line.dump() << '\n';
        const int step = line.at("step").get<int>();
        if (step % 100 == 0 || step == trainer->config().iterations) {
          std::cout << fmt::format("step {} {} loss {:.3e} gaussians {}\n", step, line.at("mode").get<std::string>(),
                                   line.at("loss").get<double>(), line.at("gaussians").get<int>());
        }
      },
      out);
  metrics.flush();
  trainer->save_checkpoint(out / "checkpoint");
  write_turntable(trainer->scene(), out / "turntable", "final", trainer->config().preview_size);
  const nlohmann::json regions = region_report(*trainer);
  std::ofstream(out / "regions.json") << regions.dump(2) << '\n';
  for (const auto& r : regions) {
    std::cout << fmt::format("region '{}': mean ({:.3f}, {:.3f}, {:.3f})", r["subprompt"].get<std::string>(),
                             r["mean_color"][0].get<double>(), r["mean_color"][1].get<double>(),
                             r["mean_color"][2].get<double>());
    if (r.contains("max_channel_error")) std::cout << fmt::format(" error {:.3f}", r["max_channel_error"].get<double>());
    std::cout << '\n';
  }
  std::cout << "wrote " << out.string() << '\n';
  return kOk;
}

int cmd_render(const Options& o) {
  const Scene scene = load_scene(o.checkpoint / "scene.json");
  const fs::path out = o.out.empty() ? o.checkpoint / "renders" : o.out;
  write_turntable(scene, out, "view", o.size, o.views);
  std::cout << fmt::format("wrote {} views to {}\n", o.views, out.string());
  return kOk;
}

int cmd_check(const Options& o) {
  std::vector<std::string> suites = o.suites;
  if (suites.empty() || (suites.size() == 1 && suites[0] == "all")) {
    suites = {"gradients", "compositing", "masks", "layout"};
  }
  nlohmann::json report = nlohmann::json::array();
  bool ok = true;
  for (const auto& name : suites) {
    testing::SuiteReport r;
    if (name == "gradients") {
      r = testing::gradients_suite();
    } else if (name == "compositing") {
      r = testing::compositing_suite();
    } else if (name == "masks") {
      r = testing::masks_suite();
    } else if (name == "layout") {
      r = testing::layout_suite(o.data);
    } else {
      std::cerr << "unknown suite '" << name << "' (gradients, compositing, masks, layout, all)\n";
      return kConfiguration;
    }
    ok = ok && r.passed;
    report.push_back({{"suite", r.name}, {"passed", r.passed}, {"summary", r.summary}, {"detail", r.detail}});
    if (!o.json) std::cout << fmt::format("{} {}: {}\n", r.passed ? "PASS" : "FAIL", r.name, r.summary);
  }
  if (o.json) std::cout << report.dump(2) << '\n';
  return ok ? kOk : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic score distillation for compositional 3D scenes"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--data", o.data, "Data directory (fixtures, prompts)");

  auto* plan = app.add_subcommand("plan", "Decompose a scene prompt into a plan file");
  plan->add_option("prompt", o.prompt, "Scene prompt");
  plan->add_option("--planner", o.planner, "canned or remote")->check(CLI::IsMember({"canned", "remote"}));
  plan->add_option("--fixture", o.fixture, "Canned plan file or directory");
  plan->add_option("--planner-url", o.planner_url, "Chat-completion endpoint (else PLANNER_URL)");
  plan->add_option("--planner-model", o.planner_model, "Remote model name");
  plan->add_option("--out", o.out, "Plan file to write");

  auto* validate = app.add_subcommand("validate", "Check a plan file");
  validate->add_option("plan", o.plan_path, "Plan file")->required();

  auto* train = app.add_subcommand("train", "Optimize a scene");
  train->add_option("plan", o.plan_path, "Plan file");
  train->add_option("--config", o.config_path, "Training config (JSON)");
  train->add_option("--set", o.overrides, "Override key=value (repeatable)");
  train->add_option("--out", o.out, "Output directory");
  train->add_option("--seed", o.seed, "Random seed");
  train->add_option("--oracle", o.oracle, "analytic, remote or recorded")
      ->check(CLI::IsMember({"analytic", "remote", "recorded"}));
  train->add_option("--iterations", o.iterations, "Number of steps");
  train->add_option("--resume", o.resume, "Checkpoint directory to continue from");

  auto* render_cmd = app.add_subcommand("render", "Render a turntable of a checkpoint");
  render_cmd->add_option("checkpoint", o.checkpoint, "Checkpoint directory")->required();
  render_cmd->add_option("--out", o.out, "Output directory");
  render_cmd->add_option("--size", o.size, "Image size in pixels");
  render_cmd->add_option("--views", o.views, "Number of azimuths");

  auto* check = app.add_subcommand("check", "Run verification suites");
  check->add_option("suites", o.suites, "gradients, compositing, masks, layout or all");
  check->add_flag("--json", o.json, "Machine-readable report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfiguration;
  }

  try {
    if (*plan) return cmd_plan(o);
    if (*validate) return cmd_validate(o);
    if (*train) return cmd_train(o);
    if (*render_cmd) return cmd_render(o);
    return cmd_check(o);
  } catch (const ValidationError& e) {
    std::cerr << "validation failed with " << e.diagnostics().size() << " problem(s):\n";
    print_diagnostics(e.diagnostics());
    return kValidation;
  } catch (const Error& e) {
    std::cerr << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
