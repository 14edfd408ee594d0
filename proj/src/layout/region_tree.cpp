#include "semsds/layout/region_tree.hpp"

#include <fmt/format.h>

#include <cmath>

namespace semsds {

int axis_index(SplitAxis axis) {
  switch (axis) {
    case SplitAxis::Width: return 0;
    case SplitAxis::Length: return 1;
    case SplitAxis::Depth: return 2;
  }
  return 0;
}

const char* to_string(SplitAxis axis) {
  switch (axis) {
    case SplitAxis::Width: return "width";
    case SplitAxis::Length: return "length";
    case SplitAxis::Depth: return "depth";
  }
  return "width";
}

SplitAxis parse_split_axis(const std::string& name) {
  if (name == "width") return SplitAxis::Width;
  if (name == "length") return SplitAxis::Length;
  if (name == "depth") return SplitAxis::Depth;
  throw_error(ErrorKind::InvalidInput, "unknown split axis '" + name + "' (depth, width, length)");
}

std::size_t RegionTree::leaf_count() const {
  if (is_leaf()) return 1;
  std::size_t n = 0;
  for (const auto& c : children) n += c.leaf_count();
  return n;
}

RegionTree RegionTree::leaf(std::string subprompt) {
  RegionTree t;
  t.subprompt = std::move(subprompt);
  return t;
}

RegionTree RegionTree::split(SplitAxis axis, std::vector<double> fractions,
                             std::vector<RegionTree> children) {
  RegionTree t;
  t.axis = axis;
  t.fractions = std::move(fractions);
  t.children = std::move(children);
  return t;
}

namespace {

void check_node(const RegionTree& t, const std::string& path, std::vector<Diagnostic>& out) {
  if (t.is_leaf()) {
    if (!t.fractions.empty()) out.push_back({-1, path, "leaf has fractions but no children"});
    if (t.subprompt.empty()) out.push_back({-1, path, "leaf subprompt is empty"});
    return;
  }
  if (t.children.size() < 2) out.push_back({-1, path, "a split needs at least 2 children"});
  if (t.fractions.size() != t.children.size()) {
    out.push_back({-1, path, fmt::format("{} fractions for {} children", t.fractions.size(),
                                         t.children.size())});
  }
  double sum = 0.0;
  for (double f : t.fractions) {
    if (!(f > 0.0) || !std::isfinite(f)) out.push_back({-1, path, "fractions must be positive"});
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    out.push_back({-1, path, fmt::format("fractions sum to {} instead of 1", sum)});
  }
  for (std::size_t i = 0; i < t.children.size(); ++i) {
    check_node(t.children[i], fmt::format("{}.children[{}]", path, i), out);
  }
}

RegionTree parse_node(const nlohmann::json& j, const std::string& path, std::vector<Diagnostic>& out) {
  RegionTree t;
  if (!j.is_object()) {
    out.push_back({-1, path, "expected an object"});
    return t;
  }
  if (j.contains("children")) {
    try {
      t.axis = parse_split_axis(j.at("axis").get<std::string>());
    } catch (const std::exception& e) {
      out.push_back({-1, path, std::string("bad axis: ") + e.what()});
    }
    try {
      t.fractions = j.at("fractions").get<std::vector<double>>();
    } catch (const std::exception& e) {
      out.push_back({-1, path, std::string("bad fractions: ") + e.what()});
    }
    if (!j.at("children").is_array()) {
      out.push_back({-1, path, "children must be an array"});
      return t;
    }
    const auto& kids = j.at("children");
    for (std::size_t i = 0; i < kids.size(); ++i) {
      t.children.push_back(parse_node(kids[i], fmt::format("{}.children[{}]", path, i), out));
    }
  } else if (j.contains("subprompt") && j.at("subprompt").is_string()) {
    t.subprompt = j.at("subprompt").get<std::string>();
  } else {
    out.push_back({-1, path, "node needs either a subprompt or children"});
  }
  return t;
}

void decompose_into(const BoundingBox& box, const RegionTree& t, std::vector<Region>& out) {
  if (t.is_leaf()) {
    out.push_back({t.subprompt, box});
    return;
  }
  const int a = axis_index(t.axis);
  const double lo = box.min[a], extent = box.max[a] - box.min[a];
  double cumulative = 0.0;
  double start = lo;
  for (std::size_t i = 0; i < t.children.size(); ++i) {
    cumulative += t.fractions[i];
    const double end = i + 1 == t.children.size() ? box.max[a] : lo + cumulative * extent;
    BoundingBox child = box;
    child.min[a] = start;
    child.max[a] = end;
    decompose_into(child, t.children[i], out);
    start = end;
  }
}

}  // namespace

std::vector<Diagnostic> check_region_tree(const RegionTree& tree) {
  std::vector<Diagnostic> out;
  check_node(tree, "root", out);
  return out;
}

RegionTree region_tree_from_json(const nlohmann::json& j) {
  std::vector<Diagnostic> diags;
  RegionTree t = parse_node(j, "root", diags);
  if (diags.empty()) diags = check_region_tree(t);
  if (!diags.empty()) throw ValidationError(std::move(diags));
  return t;
}

nlohmann::json to_json(const RegionTree& tree) {
  if (tree.is_leaf()) return {{"subprompt", tree.subprompt}};
  nlohmann::json kids = nlohmann::json::array();
  for (const auto& c : tree.children) kids.push_back(to_json(c));
  return {{"axis", to_string(tree.axis)}, {"fractions", tree.fractions}, {"children", kids}};
}

std::vector<Region> decompose(const BoundingBox& box, const RegionTree& tree) {
  auto diags = check_region_tree(tree);
  if (!diags.empty()) throw ValidationError(std::move(diags));
  std::vector<Region> out;
  decompose_into(box, tree, out);
  return out;
}

}  // namespace semsds
