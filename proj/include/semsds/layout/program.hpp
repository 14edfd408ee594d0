#pragma once

#include "semsds/core/types.hpp"
#include "semsds/error.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace semsds {

/// Straight-line placement language. One statement per line:
///
///   name = expr
///   place(object_id, scale, euler_xyz_degrees, translation)
///
/// Expressions are scalars or 3-vectors built from numbers, variables,
/// tuples `(a, b, c)`, `vec(a, b, c)`, `min`/`max`, `+ - * /` (component-wise
/// for vectors, broadcast with scalars), unary minus and `.x/.y/.z`.
/// `#` starts a comment.
struct Expr {
  enum class Kind { Number, Variable, Tuple, Call, Negate, Binary, Component };
  Kind kind = Kind::Number;
  double number = 0.0;
  std::string name;  // variable, function or component name
  char op = 0;       // binary operator
  std::vector<Expr> args;
  int column = 0;
};

struct Statement {
  enum class Kind { Assign, Place };
  Kind kind = Kind::Assign;
  std::string target;      // variable name or placed object id
  std::vector<Expr> args;  // one for Assign, three for Place
};

class LayoutProgram {
 public:
  /// Throws ValidationError listing every statement that fails to parse.
  static LayoutProgram parse(const std::vector<std::string>& lines);

  /// Canonical text: numbers in shortest round-trip form, binary operations
  /// parenthesized. Re-parsing it yields an identical program.
  std::vector<std::string> print() const;

  const std::vector<Statement>& statements() const { return statements_; }

 private:
  std::vector<Statement> statements_;
};

struct Value {
  bool is_vector = false;
  double scalar = 0.0;
  Vec3 vector = Vec3::Zero();
};

struct Placement {
  std::string object;
  ObjectTransform transform;
  int statement = 0;
};

struct ProgramResult {
  std::vector<Placement> placements;  // in statement order
  std::map<std::string, Value> variables;

  const ObjectTransform& transform(const std::string& object) const;
};

/// Static and dynamic checks without throwing: duplicate assignment,
/// unbound variables, type errors, division by zero, non-positive scale,
/// duplicate placement, and (when `objects` is given) unknown or missing
/// objects. Statement indices are 0-based.
std::vector<Diagnostic> check_program(const LayoutProgram& program,
                                      const std::vector<std::string>* objects = nullptr);

/// Runs the program in double precision. Euler angles are xyz degrees.
/// Throws ValidationError when check_program reports anything.
ProgramResult execute_program(const LayoutProgram& program,
                              const std::vector<std::string>* objects = nullptr);

}  // namespace semsds
