#pragma once

#include "semsds/core/types.hpp"
#include "semsds/layout/program.hpp"
#include "semsds/layout/region_tree.hpp"
#include "semsds/util/http.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace semsds {

struct PlannedObject {
  std::string id;
  std::string prompt;
  Vec3 size = Vec3::Ones();  // local layout box extent, centered at the origin
};

/// Plan file: {"scene_prompt", "objects": [{"id", "prompt", "size_estimate"}],
/// "program": [statements], "region_trees": {id: tree}}.
struct Plan {
  std::string scene_prompt;
  std::vector<PlannedObject> objects;
  std::vector<std::string> program;
  std::map<std::string, RegionTree> region_trees;

  std::vector<std::string> object_ids() const;
};

Plan plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Plan& plan);
Plan load_plan(const std::filesystem::path& path);
void save_plan(const std::filesystem::path& path, const Plan& plan);

/// Every problem with a plan: JSON structure, program diagnostics, region
/// tree diagnostics (where = "region_trees.<id>..."), missing trees.
std::vector<Diagnostic> check_plan(const Plan& plan);

/// Executes the program and decomposes each object's box. Objects without a
/// region tree get a single region with the object prompt. No Gaussians.
/// Throws ValidationError.
Scene build_scene(const Plan& plan);

class PlannerClient {
 public:
  virtual ~PlannerClient() = default;
  virtual Plan plan(const std::string& scene_prompt) = 0;
};

/// Fixture-backed planner. Given a file it always returns that plan; given
/// a directory it returns the plan whose scene_prompt matches.
class CannedPlanner final : public PlannerClient {
 public:
  explicit CannedPlanner(const std::filesystem::path& source);
  Plan plan(const std::string& scene_prompt) override;

 private:
  std::vector<Plan> plans_;
  bool single_ = false;
};

struct RemotePlannerOptions {
  std::string endpoint;  // full chat-completion URL
  std::string model = "gpt-4o";
  std::string api_key_env = "PLANNER_API_KEY";
  std::filesystem::path templates_dir;  // scene_decomposition.txt, object_decomposition.txt
  int repair_attempts = 3;
  HttpClientOptions http;
};

/// Chat-completion planner. The scene template yields the object list and
/// program, the object template one region tree per object. Responses that
/// fail validation are re-requested with the diagnostics appended.
class RemotePlanner final : public PlannerClient {
 public:
  explicit RemotePlanner(RemotePlannerOptions options);
  Plan plan(const std::string& scene_prompt) override;

 private:
  std::string complete(const std::string& system, const std::string& user) const;

  RemotePlannerOptions options_;
  std::string scene_template_;
  std::string object_template_;
  std::unique_ptr<JsonHttpClient> client_;
};

/// The first balanced {...} block in `text` (code fences and prose ignored).
nlohmann::json extract_json(const std::string& text);

/// Replaces each {{key}} in `tmpl`.
std::string fill_template(std::string tmpl, const std::map<std::string, std::string>& values);

}  // namespace semsds
