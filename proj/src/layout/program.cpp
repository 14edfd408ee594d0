#include "semsds/layout/program.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cmath>
#include <set>

namespace semsds {

namespace {

struct Token {
  enum class Kind { Number, Ident, Symbol, End };
  Kind kind = Kind::End;
  std::string text;
  double number = 0.0;
  int column = 0;
};

struct SyntaxError {
  std::string message;
  int column = 0;
};

std::vector<Token> lex(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.column = static_cast<int>(i) + 1;
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < line.size() && std::isdigit(static_cast<unsigned char>(line[i + 1])))) {
      std::size_t used = 0;
      try {
        t.number = std::stod(line.substr(i), &used);
      } catch (const std::exception&) {
        throw SyntaxError{"malformed number", t.column};
      }
      if (!std::isfinite(t.number)) throw SyntaxError{"number out of range", t.column};
      t.kind = Token::Kind::Number;
      t.text = line.substr(i, used);
      i += used;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < line.size() && (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_')) ++j;
      t.kind = Token::Kind::Ident;
      t.text = line.substr(i, j - i);
      i = j;
    } else if (c == '"') {
      const auto end = line.find('"', i + 1);
      if (end == std::string::npos) throw SyntaxError{"unterminated string", t.column};
      t.kind = Token::Kind::Ident;
      t.text = line.substr(i + 1, end - i - 1);
      if (t.text.empty()) throw SyntaxError{"empty object id", t.column};
      i = end + 1;
    } else if (std::string_view("+-*/(),=.").find(c) != std::string_view::npos) {
      t.kind = Token::Kind::Symbol;
      t.text = std::string(1, c);
      ++i;
    } else {
      throw SyntaxError{fmt::format("unexpected character '{}'", c), t.column};
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.column = static_cast<int>(line.size()) + 1;
  out.push_back(end);
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  bool empty() const { return tokens_.front().kind == Token::Kind::End; }

  Statement statement() {
    Statement s;
    const Token& head = next();
    if (head.kind != Token::Kind::Ident) throw SyntaxError{"expected a statement", head.column};
    if (head.text == "place" && is("(")) {
      s.kind = Statement::Kind::Place;
      expect("(");
      const Token& id = next();
      if (id.kind != Token::Kind::Ident) throw SyntaxError{"expected an object id", id.column};
      s.target = id.text;
      for (int k = 0; k < 3; ++k) {
        expect(",");
        s.args.push_back(expression());
      }
      expect(")");
    } else {
      if (reserved(head.text)) {
        throw SyntaxError{"cannot assign to reserved name '" + head.text + "'", head.column};
      }
      s.kind = Statement::Kind::Assign;
      s.target = head.text;
      expect("=");
      s.args.push_back(expression());
    }
    if (peek().kind != Token::Kind::End) throw SyntaxError{"unexpected trailing input", peek().column};
    return s;
  }

  static bool reserved(const std::string& name) {
    return name == "place" || name == "vec" || name == "min" || name == "max";
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() {
    const Token& t = tokens_[pos_];
    if (t.kind != Token::Kind::End) ++pos_;
    return t;
  }
  bool is(const char* sym) const {
    return peek().kind == Token::Kind::Symbol && peek().text == sym;
  }
  void expect(const char* sym) {
    if (!is(sym)) throw SyntaxError{fmt::format("expected '{}'", sym), peek().column};
    ++pos_;
  }

  Expr expression() {
    Expr lhs = term();
    while (is("+") || is("-")) {
      Expr b;
      b.kind = Expr::Kind::Binary;
      b.column = peek().column;
      b.op = next().text[0];
      b.args.push_back(std::move(lhs));
      b.args.push_back(term());
      lhs = std::move(b);
    }
    return lhs;
  }

  Expr term() {
    Expr lhs = unary();
    while (is("*") || is("/")) {
      Expr b;
      b.kind = Expr::Kind::Binary;
      b.column = peek().column;
      b.op = next().text[0];
      b.args.push_back(std::move(lhs));
      b.args.push_back(unary());
      lhs = std::move(b);
    }
    return lhs;
  }

  Expr unary() {
    if (is("-")) {
      Expr e;
      e.kind = Expr::Kind::Negate;
      e.column = next().column;
      e.args.push_back(unary());
      return e;
    }
    if (is("+")) {
      next();
      return unary();
    }
    return postfix();
  }

  Expr postfix() {
    Expr e = primary();
    while (is(".")) {
      next();
      const Token& c = next();
      if (c.kind != Token::Kind::Ident || (c.text != "x" && c.text != "y" && c.text != "z")) {
        throw SyntaxError{"expected component x, y or z", c.column};
      }
      Expr m;
      m.kind = Expr::Kind::Component;
      m.name = c.text;
      m.column = c.column;
      m.args.push_back(std::move(e));
      e = std::move(m);
    }
    return e;
  }

  Expr primary() {
    const Token& t = next();
    Expr e;
    e.column = t.column;
    if (t.kind == Token::Kind::Number) {
      e.kind = Expr::Kind::Number;
      e.number = t.number;
      return e;
    }
    if (t.kind == Token::Kind::Ident) {
      if (is("(")) {
        if (t.text != "vec" && t.text != "min" && t.text != "max") {
          throw SyntaxError{"unknown function '" + t.text + "'", t.column};
        }
        e.kind = Expr::Kind::Call;
        e.name = t.text;
        expect("(");
        e.args.push_back(expression());
        while (is(",")) {
          next();
          e.args.push_back(expression());
        }
        expect(")");
        if (e.name == "vec" && e.args.size() != 3) {
          throw SyntaxError{"vec takes exactly 3 arguments", t.column};
        }
        if (e.name != "vec" && e.args.size() < 2) {
          throw SyntaxError{e.name + " takes at least 2 arguments", t.column};
        }
        return e;
      }
      if (reserved(t.text)) throw SyntaxError{"'" + t.text + "' is not a value", t.column};
      e.kind = Expr::Kind::Variable;
      e.name = t.text;
      return e;
    }
    if (t.kind == Token::Kind::Symbol && t.text == "(") {
      Expr first = expression();
      if (is(")")) {
        next();
        return first;
      }
      e.kind = Expr::Kind::Tuple;
      e.args.push_back(std::move(first));
      while (is(",")) {
        next();
        e.args.push_back(expression());
      }
      expect(")");
      if (e.args.size() != 3) throw SyntaxError{"tuples must have 3 components", t.column};
      return e;
    }
    throw SyntaxError{t.kind == Token::Kind::End ? "unexpected end of statement"
                                                 : "unexpected '" + t.text + "'",
                      t.column};
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

std::string print_number(double v) {
  std::string s = fmt::format("{}", v);
  if (v < 0) s = "(" + s + ")";
  return s;
}

bool needs_quotes(const std::string& id) {
  if (id.empty() || std::isdigit(static_cast<unsigned char>(id[0]))) return true;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return true;
  }
  return Parser::reserved(id);
}

std::string print_expr(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Number: return print_number(e.number);
    case Expr::Kind::Variable: return e.name;
    case Expr::Kind::Tuple:
      return "(" + print_expr(e.args[0]) + ", " + print_expr(e.args[1]) + ", " +
             print_expr(e.args[2]) + ")";
    case Expr::Kind::Call: {
      std::string s = e.name + "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) s += ", ";
        s += print_expr(e.args[i]);
      }
      return s + ")";
    }
    case Expr::Kind::Negate: return "-" + print_expr(e.args[0]);
    case Expr::Kind::Binary:
      return "(" + print_expr(e.args[0]) + " " + e.op + " " + print_expr(e.args[1]) + ")";
    case Expr::Kind::Component: return print_expr(e.args[0]) + "." + e.name;
  }
  return {};
}

struct EvalError {
  std::string message;
  int column = 0;
  bool silent = false;  // caused by an earlier failed statement
};

class Evaluator {
 public:
  std::map<std::string, Value> vars;
  std::set<std::string> poisoned;

  Value eval(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Number: return scalar(e.number);
      case Expr::Kind::Variable: {
        const auto it = vars.find(e.name);
        if (it != vars.end()) return it->second;
        if (poisoned.count(e.name)) throw EvalError{"", e.column, true};
        throw EvalError{"unbound variable '" + e.name + "'", e.column};
      }
      case Expr::Kind::Tuple: {
        Value v;
        v.is_vector = true;
        for (int i = 0; i < 3; ++i) v.vector[i] = as_scalar(eval(e.args[std::size_t(i)]), e.args[std::size_t(i)]);
        return v;
      }
      case Expr::Kind::Call: {
        if (e.name == "vec") {
          Value v;
          v.is_vector = true;
          for (int i = 0; i < 3; ++i) v.vector[i] = as_scalar(eval(e.args[std::size_t(i)]), e.args[std::size_t(i)]);
          return v;
        }
        Value acc = eval(e.args[0]);
        for (std::size_t i = 1; i < e.args.size(); ++i) {
          const Value b = eval(e.args[i]);
          if (acc.is_vector != b.is_vector) {
            throw EvalError{e.name + " arguments must all be scalars or all vectors", e.column};
          }
          if (acc.is_vector) {
            acc.vector = e.name == "min" ? Vec3(acc.vector.cwiseMin(b.vector)) : Vec3(acc.vector.cwiseMax(b.vector));
          } else {
            acc.scalar = e.name == "min" ? std::min(acc.scalar, b.scalar) : std::max(acc.scalar, b.scalar);
          }
        }
        return acc;
      }
      case Expr::Kind::Negate: {
        Value v = eval(e.args[0]);
        v.scalar = -v.scalar;
        v.vector = -v.vector;
        return v;
      }
      case Expr::Kind::Component: {
        const Value v = eval(e.args[0]);
        if (!v.is_vector) throw EvalError{"component access on a scalar", e.column};
        return scalar(v.vector[e.name[0] - 'x']);
      }
      case Expr::Kind::Binary: return binary(e);
    }
    throw EvalError{"bad expression", e.column};
  }

 private:
  static Value scalar(double s) {
    Value v;
    v.scalar = s;
    return v;
  }

  static double as_scalar(const Value& v, const Expr& e) {
    if (v.is_vector) throw EvalError{"expected a scalar", e.column};
    return v.scalar;
  }

  Value binary(const Expr& e) {
    const Value a = eval(e.args[0]);
    const Value b = eval(e.args[1]);
    const bool vec = a.is_vector || b.is_vector;
    const Vec3 av = a.is_vector ? a.vector : Vec3::Constant(a.scalar);
    const Vec3 bv = b.is_vector ? b.vector : Vec3::Constant(b.scalar);
    if ((e.op == '+' || e.op == '-') && a.is_vector != b.is_vector) {
      throw EvalError{fmt::format("cannot apply '{}' to a scalar and a vector", e.op), e.column};
    }
    if (e.op == '/' && (b.is_vector ? (b.vector.array() == 0.0).any() : b.scalar == 0.0)) {
      throw EvalError{"division by zero", e.column};
    }
    Value r;
    r.is_vector = vec;
    if (vec) {
      switch (e.op) {
        case '+': r.vector = av + bv; break;
        case '-': r.vector = av - bv; break;
        case '*': r.vector = av.cwiseProduct(bv); break;
        default: r.vector = av.cwiseQuotient(bv); break;
      }
    } else {
      switch (e.op) {
        case '+': r.scalar = a.scalar + b.scalar; break;
        case '-': r.scalar = a.scalar - b.scalar; break;
        case '*': r.scalar = a.scalar * b.scalar; break;
        default: r.scalar = a.scalar / b.scalar; break;
      }
    }
    const bool finite = vec ? r.vector.allFinite() : std::isfinite(r.scalar);
    if (!finite) throw EvalError{"non-finite result", e.column};
    return r;
  }
};

ProgramResult run(const LayoutProgram& program, const std::vector<std::string>* objects,
                  std::vector<Diagnostic>& diags) {
  ProgramResult result;
  Evaluator ev;
  std::set<std::string> placed;
  const auto& stmts = program.statements();
  for (std::size_t i = 0; i < stmts.size(); ++i) {
    const Statement& s = stmts[i];
    const int index = static_cast<int>(i);
    auto report = [&](const std::string& msg, int column) {
      diags.push_back({index, column > 0 ? fmt::format("col {}", column) : std::string(), msg});
    };
    if (s.kind == Statement::Kind::Assign) {
      if (ev.vars.count(s.target) || ev.poisoned.count(s.target)) {
        report("variable '" + s.target + "' is assigned more than once", 0);
        continue;
      }
      try {
        ev.vars[s.target] = ev.eval(s.args[0]);
      } catch (const EvalError& err) {
        ev.poisoned.insert(s.target);
        if (!err.silent) report(err.message, err.column);
      }
      continue;
    }
    if (placed.count(s.target)) {
      report("object '" + s.target + "' is placed more than once", 0);
      continue;
    }
    placed.insert(s.target);
    if (objects && std::find(objects->begin(), objects->end(), s.target) == objects->end()) {
      report("unknown object '" + s.target + "'", 0);
      continue;
    }
    try {
      const Value scale = ev.eval(s.args[0]);
      const Value euler = ev.eval(s.args[1]);
      const Value t = ev.eval(s.args[2]);
      if (scale.is_vector) throw EvalError{"place: scale must be a scalar", s.args[0].column};
      if (!(scale.scalar > 0.0)) throw EvalError{"place: scale must be positive", s.args[0].column};
      if (!euler.is_vector) throw EvalError{"place: euler angles must be a vector", s.args[1].column};
      if (!t.is_vector) throw EvalError{"place: translation must be a vector", s.args[2].column};
      Placement p;
      p.object = s.target;
      p.statement = index;
      p.transform.scale = scale.scalar;
      p.transform.rotation = quat_from_euler_xyz_degrees(euler.vector);
      p.transform.translation = t.vector;
      result.placements.push_back(std::move(p));
    } catch (const EvalError& err) {
      if (!err.silent) report(err.message, err.column);
    }
  }
  if (objects) {
    for (const auto& id : *objects) {
      if (!placed.count(id)) diags.push_back({-1, {}, "object '" + id + "' is never placed"});
    }
  }
  result.variables = std::move(ev.vars);
  return result;
}

}  // namespace

LayoutProgram LayoutProgram::parse(const std::vector<std::string>& lines) {
  LayoutProgram p;
  std::vector<Diagnostic> diags;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      Parser parser(lex(lines[i]));
      if (parser.empty()) {
        diags.push_back({int(i), {}, "empty statement"});
        continue;
      }
      p.statements_.push_back(parser.statement());
    } catch (const SyntaxError& e) {
      diags.push_back({int(i), fmt::format("col {}", e.column), e.message});
    }
  }
  if (!diags.empty()) throw ValidationError(std::move(diags));
  return p;
}

std::vector<std::string> LayoutProgram::print() const {
  std::vector<std::string> out;
  for (const auto& s : statements_) {
    if (s.kind == Statement::Kind::Assign) {
      out.push_back(s.target + " = " + print_expr(s.args[0]));
    } else {
      const std::string id = needs_quotes(s.target) ? "\"" + s.target + "\"" : s.target;
      out.push_back("place(" + id + ", " + print_expr(s.args[0]) + ", " + print_expr(s.args[1]) +
                    ", " + print_expr(s.args[2]) + ")");
    }
  }
  return out;
}

const ObjectTransform& ProgramResult::transform(const std::string& object) const {
  for (const auto& p : placements) {
    if (p.object == object) return p.transform;
  }
  throw_error(ErrorKind::NotFound, "object '" + object + "' was not placed");
}

std::vector<Diagnostic> check_program(const LayoutProgram& program,
                                      const std::vector<std::string>* objects) {
  std::vector<Diagnostic> diags;
  run(program, objects, diags);
  return diags;
}

ProgramResult execute_program(const LayoutProgram& program, const std::vector<std::string>* objects) {
  std::vector<Diagnostic> diags;
  ProgramResult r = run(program, objects, diags);
  if (!diags.empty()) throw ValidationError(std::move(diags));
  return r;
}

}  // namespace semsds
