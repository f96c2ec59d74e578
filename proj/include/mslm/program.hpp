#pragma once

// Restricted plan-program language: the subset of Python that plan code
// uses (calls, assignments, `for i in range(n):`, arithmetic, comments).

#include <string>
#include <string_view>
#include <vector>

namespace mslm {

struct Expr {
  enum class Kind { Number, String, Name, Call, Binary, Negate };

  Kind kind = Kind::Number;
  double number = 0.0;
  std::string text;  // string value, variable name or callee
  char op = 0;       // Binary: one of + - * /
  // Call: positional arguments. Binary: {lhs, rhs}. Negate: {operand}.
  std::vector<Expr> args;
  std::vector<std::string> keyword_names;
  std::vector<Expr> keyword_values;
  int line = 0;
  int column = 0;

  static Expr make_number(double v);
  static Expr make_string(std::string s);
  static Expr make_name(std::string n);
  static Expr make_call(std::string callee, std::vector<Expr> args);
  static Expr make_binary(char op, Expr lhs, Expr rhs);

  /// Structural equality; source positions are ignored.
  bool operator==(const Expr& o) const;
};

struct Statement {
  enum class Kind { Call, Assign, For };

  Kind kind = Kind::Call;
  std::string target;  // assigned variable or loop variable
  Expr value;          // the call, or the assigned expression
  long long count = 0; // range bound of a for loop
  std::vector<Statement> body;
  int line = 0;
  int column = 0;

  bool operator==(const Statement& o) const;
};

struct PlanProgram {
  std::vector<Statement> statements;

  std::size_t size() const { return statements.size(); }
  bool empty() const { return statements.empty(); }
  bool operator==(const PlanProgram& o) const { return statements == o.statements; }
};

/// Functions a program may call (the `robot.` prefix is optional).
bool is_whitelisted_call(std::string_view name);

/// Throws ParseError with the 1-based line and column of the first problem,
/// including calls outside the whitelist.
PlanProgram parse_program(std::string_view code);

/// Canonical source: `robot.` prefixes, single quotes, 4-space blocks.
std::string print_program(const PlanProgram& program);
std::string print_expr(const Expr& e);

}  // namespace mslm
