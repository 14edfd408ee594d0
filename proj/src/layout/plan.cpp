#include "semsds/layout/plan.hpp"

#include "semsds/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace semsds {

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Vec3 vec3_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw_error(ErrorKind::InvalidInput, "expected 3 numbers");
  return Vec3(v[0], v[1], v[2]);
}

std::vector<PlannedObject> objects_from_json(const nlohmann::json& j) {
  std::vector<PlannedObject> out;
  for (const auto& o : j) {
    PlannedObject p;
    p.id = o.at("id").get<std::string>();
    p.prompt = o.at("prompt").get<std::string>();
    if (o.contains("size_estimate")) p.size = vec3_from_json(o.at("size_estimate"));
    out.push_back(std::move(p));
  }
  return out;
}

std::string join(const std::vector<Diagnostic>& diags) {
  std::string out;
  for (const auto& d : diags) out += "- " + d.str() + "\n";
  return out;
}

}  // namespace

std::vector<std::string> Plan::object_ids() const {
  std::vector<std::string> ids;
  for (const auto& o : objects) ids.push_back(o.id);
  return ids;
}

Plan plan_from_json(const nlohmann::json& j) {
  Plan p;
  std::vector<Diagnostic> diags;
  try {
    p.scene_prompt = j.value("scene_prompt", std::string());
    p.objects = objects_from_json(j.at("objects"));
    p.program = j.at("program").get<std::vector<std::string>>();
  } catch (const std::exception& e) {
    throw ValidationError({{-1, "plan", e.what()}});
  }
  if (j.contains("region_trees")) {
    for (const auto& [id, tree] : j.at("region_trees").items()) {
      try {
        p.region_trees[id] = region_tree_from_json(tree);
      } catch (const ValidationError& e) {
        for (auto d : e.diagnostics()) {
          d.where = "region_trees." + id + (d.where.size() > 4 ? d.where.substr(4) : "");
          diags.push_back(std::move(d));
        }
      }
    }
  }
  if (!diags.empty()) throw ValidationError(std::move(diags));
  return p;
}

nlohmann::json to_json(const Plan& plan) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : plan.objects) {
    objects.push_back({{"id", o.id},
                       {"prompt", o.prompt},
                       {"size_estimate", {o.size.x(), o.size.y(), o.size.z()}}});
  }
  nlohmann::json trees = nlohmann::json::object();
  for (const auto& [id, t] : plan.region_trees) trees[id] = to_json(t);
  return {{"scene_prompt", plan.scene_prompt},
          {"objects", objects},
          {"program", plan.program},
          {"region_trees", trees}};
}

Plan load_plan(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw_error(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
  return plan_from_json(j);
}

void save_plan(const std::filesystem::path& path, const Plan& plan) {
  std::ofstream out(path);
  if (!out) throw_error(ErrorKind::Io, "cannot write " + path.string());
  out << to_json(plan).dump(2) << "\n";
}

std::vector<Diagnostic> check_plan(const Plan& plan) {
  std::vector<Diagnostic> diags;
  std::set<std::string> seen;
  for (const auto& o : plan.objects) {
    if (o.id.empty()) diags.push_back({-1, "objects", "object id is empty"});
    if (!seen.insert(o.id).second) diags.push_back({-1, "objects", "duplicate object id '" + o.id + "'"});
    if (!(o.size.array() > 0.0).all()) {
      diags.push_back({-1, "objects." + o.id, "size_estimate must be positive"});
    }
  }
  if (plan.objects.empty()) diags.push_back({-1, "objects", "plan has no objects"});
  try {
    const auto ids = plan.object_ids();
    for (auto d : check_program(LayoutProgram::parse(plan.program), &ids)) {
      d.where = d.where.empty() ? "program" : "program " + d.where;
      diags.push_back(std::move(d));
    }
  } catch (const ValidationError& e) {
    for (auto d : e.diagnostics()) {
      d.where = d.where.empty() ? "program" : "program " + d.where;
      diags.push_back(std::move(d));
    }
  }
  for (const auto& [id, tree] : plan.region_trees) {
    if (!seen.count(id)) diags.push_back({-1, "region_trees." + id, "no such object"});
    for (auto d : check_region_tree(tree)) {
      d.where = "region_trees." + id + d.where.substr(4);
      diags.push_back(std::move(d));
    }
  }
  return diags;
}

Scene build_scene(const Plan& plan) {
  auto diags = check_plan(plan);
  if (!diags.empty()) throw ValidationError(std::move(diags));
  const auto ids = plan.object_ids();
  const ProgramResult result = execute_program(LayoutProgram::parse(plan.program), &ids);
  Scene scene;
  scene.prompt = plan.scene_prompt;
  for (const auto& o : plan.objects) {
    ObjectModel m;
    m.id = o.id;
    m.prompt = o.prompt;
    m.transform = result.transform(o.id);
    const BoundingBox box{-0.5 * o.size, 0.5 * o.size};
    const auto it = plan.region_trees.find(o.id);
    m.regions = it == plan.region_trees.end() ? std::vector<Region>{{o.prompt, box}}
                                              : decompose(box, it->second);
    scene.objects.push_back(std::move(m));
  }
  return scene;
}

CannedPlanner::CannedPlanner(const std::filesystem::path& source) {
  if (std::filesystem::is_directory(source)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(source)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) plans_.push_back(load_plan(f));
  } else {
    plans_.push_back(load_plan(source));
    single_ = true;
  }
  if (plans_.empty()) throw_error(ErrorKind::NotFound, "no plan fixtures in " + source.string());
}

Plan CannedPlanner::plan(const std::string& scene_prompt) {
  if (single_) return plans_.front();
  for (const auto& p : plans_) {
    if (p.scene_prompt == scene_prompt) return p;
  }
  throw_error(ErrorKind::NotFound, "no canned plan for \"" + scene_prompt + "\"");
}

nlohmann::json extract_json(const std::string& text) {
  for (std::size_t start = text.find('{'); start != std::string::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false, escape = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escape) escape = false;
        else if (c == '\\') escape = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        try {
          return nlohmann::json::parse(text.substr(start, i - start + 1));
        } catch (const nlohmann::json::parse_error&) {
          break;
        }
      }
    }
  }
  throw_error(ErrorKind::InvalidInput, "no JSON object found in planner response");
}

std::string fill_template(std::string tmpl, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string needle = "{{" + key + "}}";
    for (auto pos = tmpl.find(needle); pos != std::string::npos;
         pos = tmpl.find(needle, pos + value.size())) {
      tmpl.replace(pos, needle.size(), value);
    }
  }
  return tmpl;
}

RemotePlanner::RemotePlanner(RemotePlannerOptions options) : options_(std::move(options)) {
  if (options_.endpoint.empty()) throw_error(ErrorKind::Configuration, "planner endpoint is not set");
  const char* key = std::getenv(options_.api_key_env.c_str());
  if (!key || !*key) {
    throw_error(ErrorKind::Configuration, "environment variable " + options_.api_key_env + " is not set");
  }
  options_.http.bearer_token = key;
  scene_template_ = read_text(options_.templates_dir / "scene_decomposition.txt");
  object_template_ = read_text(options_.templates_dir / "object_decomposition.txt");
  client_ = std::make_unique<JsonHttpClient>(options_.endpoint, options_.http);
}

std::string RemotePlanner::complete(const std::string& system, const std::string& user) const {
  const nlohmann::json body{{"model", options_.model},
                            {"temperature", 0},
                            {"messages",
                             {{{"role", "system"}, {"content", system}},
                              {{"role", "user"}, {"content", user}}}}};
  const auto res = client_->post("", body);
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorKind::InvalidInput, std::string("malformed chat completion: ") + e.what());
  }
}

Plan RemotePlanner::plan(const std::string& scene_prompt) {
  Plan plan;
  plan.scene_prompt = scene_prompt;
  const std::string system = fill_template(scene_template_, {{"prompt", scene_prompt}});
  std::string user = scene_prompt;
  std::vector<Diagnostic> diags;
  bool done = false;
  for (int attempt = 0; attempt < options_.repair_attempts && !done; ++attempt) {
    diags.clear();
    try {
      const auto j = extract_json(complete(system, user));
      plan.objects = objects_from_json(j.at("objects"));
      plan.program = j.at("program").get<std::vector<std::string>>();
      plan.region_trees.clear();
      diags = check_plan(plan);
    } catch (const ValidationError& e) {
      diags = e.diagnostics();
    } catch (const TransportError&) {
      throw;
    } catch (const std::exception& e) {
      diags.push_back({-1, "response", e.what()});
    }
    done = diags.empty();
    if (!done) {
      user = scene_prompt + "\n\nYour previous answer had these problems:\n" + join(diags) +
             "Return a corrected answer.";
    }
  }
  if (!done) throw ValidationError(std::move(diags));

  for (const auto& o : plan.objects) {
    const std::string size = fmt::format("{} x {} x {}", o.size.x(), o.size.y(), o.size.z());
    const std::string obj_system = fill_template(
        object_template_, {{"prompt", scene_prompt}, {"object", o.id}, {"object_prompt", o.prompt},
                           {"size", size}});
    std::string obj_user = o.prompt;
    done = false;
    for (int attempt = 0; attempt < options_.repair_attempts && !done; ++attempt) {
      diags.clear();
      try {
        auto j = extract_json(complete(obj_system, obj_user));
        if (j.contains("region_tree")) j = j.at("region_tree");
        plan.region_trees[o.id] = region_tree_from_json(j);
      } catch (const ValidationError& e) {
        diags = e.diagnostics();
      } catch (const TransportError&) {
        throw;
      } catch (const std::exception& e) {
        diags.push_back({-1, "response", e.what()});
      }
      done = diags.empty();
      if (!done) {
        obj_user = o.prompt + "\n\nYour previous answer had these problems:\n" + join(diags) +
                   "Return a corrected answer.";
      }
    }
    if (!done) throw ValidationError(std::move(diags));
  }
  return plan;
}

}  // namespace semsds
