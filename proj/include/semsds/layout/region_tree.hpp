#pragma once

#include "semsds/core/types.hpp"
#include "semsds/error.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace semsds {

enum class SplitAxis { Depth, Width, Length };

/// depth -> z, width -> x, length -> y.
int axis_index(SplitAxis axis);
const char* to_string(SplitAxis axis);
SplitAxis parse_split_axis(const std::string& name);

/// Either a leaf {"subprompt": text} or a split
/// {"axis": "depth"|"width"|"length", "fractions": [...], "children": [...]}.
struct RegionTree {
  std::string subprompt;  // leaf when children is empty
  SplitAxis axis = SplitAxis::Width;
  std::vector<double> fractions;
  std::vector<RegionTree> children;

  bool is_leaf() const { return children.empty(); }
  std::size_t leaf_count() const;

  static RegionTree leaf(std::string subprompt);
  static RegionTree split(SplitAxis axis, std::vector<double> fractions,
                          std::vector<RegionTree> children);
};

/// Structural problems with JSON-path locations ("root.children[1]").
std::vector<Diagnostic> check_region_tree(const RegionTree& tree);

/// Parses and validates; throws ValidationError.
RegionTree region_tree_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RegionTree& tree);

/// Leaves in depth-first order with their boxes. Child boundaries are
/// min + cumulative fraction * extent, the last child ending exactly at max.
std::vector<Region> decompose(const BoundingBox& box, const RegionTree& tree);

}  // namespace semsds
