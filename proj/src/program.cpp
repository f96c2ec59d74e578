#include "mslm/program.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "mslm/error.hpp"
#include "mslm/plan.hpp"

namespace mslm {

namespace {

constexpr std::array kExtraCalls = {"move_to", "get_pos", "get_map", "get_major_map", "get_max_pos_3d",
                                    "get_max_pose_3d", "load_image"};

constexpr std::array kKeywords = {"import", "from", "def", "class", "while", "if", "elif", "else", "return",
                                  "lambda", "with", "try", "except", "finally", "raise", "del", "global",
                                  "nonlocal", "assert", "yield", "pass", "break", "continue", "async", "await",
                                  "in", "is", "not", "and", "or", "as", "None", "True", "False"};

bool is_keyword(std::string_view s) {
  for (const char* k : kKeywords) {
    if (s == k) return true;
  }
  return false;
}

enum class Tok { Name, Number, String, Op, Newline, Indent, Dedent, End };

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  int line = 0;
  int column = 0;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    indents_.push_back(0);
    while (pos_ < src_.size()) {
      if (at_line_start_ && depth_ == 0) {
        if (!line_indent()) continue;
      }
      const char c = src_[pos_];
      if (c == '\n') {
        newline();
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
        continue;
      }
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      if (c == '\\') {
        std::size_t p = pos_ + 1;
        if (p < src_.size() && src_[p] == '\r') ++p;
        if (p < src_.size() && src_[p] == '\n') {
          while (pos_ <= p) advance();
          continue;
        }
        fail("unexpected backslash");
      }
      if (ident_start(c)) {
        name();
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        number();
      } else if (c == '\'' || c == '"') {
        string(c);
      } else if (std::string_view("()=,.:+-*/").find(c) != std::string_view::npos) {
        if (c == '(') ++depth_;
        if (c == ')' && depth_ > 0) --depth_;
        mark();
        push(Tok::Op, std::string(1, c));
        advance();
      } else {
        fail(std::string("unexpected character '") + c + "'");
      }
    }
    mark();
    if (!at_line_start_) push(Tok::Newline, "");
    while (indents_.size() > 1) {
      indents_.pop_back();
      push(Tok::Dedent, "");
    }
    push(Tok::End, "");
    return std::move(out_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line_, col_); }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void push(Tok k, std::string text, double num = 0.0) {
    out_.push_back({k, std::move(text), num, tok_line_, tok_col_});
  }

  void mark() {
    tok_line_ = line_;
    tok_col_ = col_;
  }

  void newline() {
    mark();
    if (depth_ == 0 && !at_line_start_) {
      push(Tok::Newline, "");
      at_line_start_ = true;
    }
    advance();
  }

  // Measures indentation; false when the line is blank or a comment.
  bool line_indent() {
    int width = 0;
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) {
      width += src_[pos_] == '\t' ? 8 - width % 8 : 1;
      advance();
    }
    if (pos_ >= src_.size()) return false;
    const char c = src_[pos_];
    if (c == '\n' || c == '\r' || c == '#') {
      while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      if (pos_ < src_.size()) advance();
      return false;
    }
    mark();
    at_line_start_ = false;
    if (width > indents_.back()) {
      indents_.push_back(width);
      push(Tok::Indent, "");
    } else {
      while (width < indents_.back()) {
        indents_.pop_back();
        push(Tok::Dedent, "");
      }
      if (width != indents_.back()) fail("inconsistent dedent");
    }
    return true;
  }

  void name() {
    mark();
    const std::size_t start = pos_;
    while (pos_ < src_.size() && ident_char(src_[pos_])) advance();
    push(Tok::Name, std::string(src_.substr(start, pos_ - start)));
  }

  void number() {
    mark();
    const std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
        while (pos_ < p) advance();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      }
    }
    if (pos_ < src_.size() && ident_char(src_[pos_])) fail("malformed number");
    const std::string text(src_.substr(start, pos_ - start));
    const double v = std::strtod(text.c_str(), nullptr);
    if (!std::isfinite(v)) fail("number out of range");
    push(Tok::Number, text, v);
  }

  void string(char quote) {
    mark();
    advance();
    std::string value;
    while (true) {
      if (pos_ >= src_.size() || src_[pos_] == '\n') {
        line_ = tok_line_;
        col_ = tok_col_;
        fail("unterminated string");
      }
      const char c = src_[pos_];
      advance();
      if (c == quote) break;
      if (c == '\\' && pos_ < src_.size()) {
        const char e = src_[pos_];
        advance();
        switch (e) {
          case 'n': value += '\n'; break;
          case 't': value += '\t'; break;
          case '\\': case '\'': case '"': value += e; break;
          default: value += '\\'; value += e;
        }
      } else {
        value += c;
      }
    }
    push(Tok::String, value);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  int tok_line_ = 1;
  int tok_col_ = 1;
  int depth_ = 0;
  bool at_line_start_ = true;
  std::vector<int> indents_;
  std::vector<Token> out_;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

  PlanProgram program() {
    PlanProgram p;
    while (peek().kind != Tok::End) {
      if (peek().kind == Tok::Indent) fail(peek(), "unexpected indent");
      p.statements.push_back(statement());
    }
    return p;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return t_[std::min(i_ + k, t_.size() - 1)]; }
  const Token& next() { return t_[std::min(i_++, t_.size() - 1)]; }

  [[noreturn]] static void fail(const Token& at, const std::string& msg) { throw ParseError(msg, at.line, at.column); }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::Newline: return "end of line";
      case Tok::Indent: return "indent";
      case Tok::Dedent: return "dedent";
      case Tok::End: return "end of input";
      case Tok::String: return "string";
      default: return "'" + t.text + "'";
    }
  }

  bool is_op(const Token& t, char c) const { return t.kind == Tok::Op && t.text[0] == c; }

  const Token& expect_op(char c) {
    if (!is_op(peek(), c)) fail(peek(), std::string("expected '") + c + "', found " + describe(peek()));
    return next();
  }

  const Token& expect_name(std::string_view what) {
    if (peek().kind != Tok::Name) fail(peek(), "expected " + std::string(what) + ", found " + describe(peek()));
    return next();
  }

  void end_of_statement() {
    if (peek().kind == Tok::End) return;
    if (peek().kind != Tok::Newline) fail(peek(), "expected end of line, found " + describe(peek()));
    next();
  }

  Statement statement() {
    const Token& first = peek();
    if (first.kind == Tok::Name && first.text == "for") return for_loop();
    if (first.kind == Tok::Name && (first.text == "import" || first.text == "from")) {
      fail(first, "'" + first.text + "' is not allowed in plan programs");
    }
    if (first.kind == Tok::Name && is_keyword(first.text)) fail(first, "unsupported statement '" + first.text + "'");
    Statement s = simple_statement();
    end_of_statement();
    return s;
  }

  Statement simple_statement() {
    const Token& first = peek();
    Statement s;
    s.line = first.line;
    s.column = first.column;
    if (first.kind == Tok::Name && is_op(peek(1), '=')) {
      if (is_keyword(first.text) || first.text == "robot") fail(first, "cannot assign to '" + first.text + "'");
      s.kind = Statement::Kind::Assign;
      s.target = next().text;
      next();
      s.value = expression();
      return s;
    }
    s.kind = Statement::Kind::Call;
    s.value = expression();
    if (s.value.kind != Expr::Kind::Call) fail(first, "statement must be a call or an assignment");
    return s;
  }

  Statement for_loop() {
    Statement s;
    s.kind = Statement::Kind::For;
    s.line = peek().line;
    s.column = peek().column;
    next();
    const Token& var = expect_name("loop variable");
    if (is_keyword(var.text) || var.text == "robot") fail(var, "bad loop variable '" + var.text + "'");
    s.target = var.text;
    const Token& in = expect_name("'in'");
    if (in.text != "in") fail(in, "expected 'in', found " + describe(in));
    const Token& range = expect_name("'range'");
    if (range.text != "range") fail(range, "loops must iterate over range(n)");
    expect_op('(');
    const Token& bound = peek();
    if (bound.kind != Tok::Number || bound.text.find_first_not_of("0123456789") != std::string::npos) {
      fail(bound, "loop bound must be a non-negative integer literal");
    }
    next();
    s.count = std::stoll(bound.text);
    expect_op(')');
    expect_op(':');
    if (peek().kind == Tok::Newline) {
      next();
      if (peek().kind != Tok::Indent) fail(peek(), "expected an indented block");
      next();
      while (peek().kind != Tok::Dedent && peek().kind != Tok::End) s.body.push_back(statement());
      if (peek().kind == Tok::Dedent) next();
    } else {
      s.body.push_back(simple_statement());
      end_of_statement();
    }
    return s;
  }

  Expr expression() {
    Expr e = term();
    while (is_op(peek(), '+') || is_op(peek(), '-')) {
      const Token& op = next();
      Expr rhs = term();
      e = positioned(Expr::make_binary(op.text[0], std::move(e), std::move(rhs)), op);
    }
    return e;
  }

  Expr term() {
    Expr e = unary();
    while (is_op(peek(), '*') || is_op(peek(), '/')) {
      const Token& op = next();
      Expr rhs = unary();
      e = positioned(Expr::make_binary(op.text[0], std::move(e), std::move(rhs)), op);
    }
    return e;
  }

  Expr unary() {
    if (is_op(peek(), '-')) {
      const Token& op = next();
      Expr e;
      e.kind = Expr::Kind::Negate;
      e.args.push_back(unary());
      return positioned(std::move(e), op);
    }
    return primary();
  }

  static Expr positioned(Expr e, const Token& at) {
    e.line = at.line;
    e.column = at.column;
    return e;
  }

  Expr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number: next(); return positioned(Expr::make_number(t.number), t);
      case Tok::String: next(); return positioned(Expr::make_string(t.text), t);
      case Tok::Name: return name_or_call();
      case Tok::Op:
        if (is_op(t, '(')) {
          next();
          Expr e = expression();
          expect_op(')');
          return e;
        }
        [[fallthrough]];
      default: fail(t, "unexpected " + describe(t));
    }
  }

  Expr name_or_call() {
    const Token& first = next();
    if (is_keyword(first.text)) fail(first, "unexpected keyword '" + first.text + "'");
    const Token* callee = &first;
    bool attribute = false;
    if (is_op(peek(), '.')) {
      if (first.text != "robot") fail(first, "attribute access is only allowed on robot");
      next();
      callee = &expect_name("method name");
      attribute = true;
      if (!is_op(peek(), '(')) fail(peek(), "expected a call on robot");
    }
    if (!is_op(peek(), '(')) {
      if (first.text == "robot") fail(first, "'robot' is not a value");
      return positioned(Expr::make_name(first.text), first);
    }
    if (!is_whitelisted_call(callee->text)) fail(*callee, "call to '" + callee->text + "' is not allowed");
    next();
    Expr call = Expr::make_call(callee->text, {});
    call = positioned(std::move(call), attribute ? first : *callee);
    bool keyword_seen = false;
    while (!is_op(peek(), ')')) {
      if (peek().kind == Tok::Name && is_op(peek(1), '=')) {
        const Token& kw = next();
        next();
        for (const auto& n : call.keyword_names) {
          if (n == kw.text) fail(kw, "repeated keyword argument '" + kw.text + "'");
        }
        call.keyword_names.push_back(kw.text);
        call.keyword_values.push_back(expression());
        keyword_seen = true;
      } else {
        if (keyword_seen) fail(peek(), "positional argument after keyword argument");
        call.args.push_back(expression());
      }
      if (!is_op(peek(), ',')) break;
      next();
    }
    expect_op(')');
    return call;
  }

  std::vector<Token> t_;
  std::size_t i_ = 0;
};

std::string format_number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  std::string s = buf;
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    switch (c) {
      case '\'': out += "\\'"; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "'";
}

int precedence(const Expr& e) {
  if (e.kind == Expr::Kind::Binary) return (e.op == '+' || e.op == '-') ? 1 : 2;
  if (e.kind == Expr::Kind::Negate) return 3;
  return 4;
}

void print_statement(const Statement& s, int indent, std::string& out) {
  out.append(static_cast<std::size_t>(indent), ' ');
  switch (s.kind) {
    case Statement::Kind::Call: out += print_expr(s.value); break;
    case Statement::Kind::Assign: out += s.target + " = " + print_expr(s.value); break;
    case Statement::Kind::For:
      out += "for " + s.target + " in range(" + std::to_string(s.count) + "):\n";
      for (const auto& b : s.body) print_statement(b, indent + 4, out);
      return;
  }
  out += '\n';
}

}  // namespace

Expr Expr::make_number(double v) {
  Expr e;
  e.kind = Kind::Number;
  e.number = v;
  return e;
}

Expr Expr::make_string(std::string s) {
  Expr e;
  e.kind = Kind::String;
  e.text = std::move(s);
  return e;
}

Expr Expr::make_name(std::string n) {
  Expr e;
  e.kind = Kind::Name;
  e.text = std::move(n);
  return e;
}

Expr Expr::make_call(std::string callee, std::vector<Expr> args) {
  Expr e;
  e.kind = Kind::Call;
  e.text = std::move(callee);
  e.args = std::move(args);
  return e;
}

Expr Expr::make_binary(char op, Expr lhs, Expr rhs) {
  Expr e;
  e.kind = Kind::Binary;
  e.op = op;
  e.args.push_back(std::move(lhs));
  e.args.push_back(std::move(rhs));
  return e;
}

bool Expr::operator==(const Expr& o) const {
  return kind == o.kind && number == o.number && text == o.text && op == o.op && args == o.args &&
         keyword_names == o.keyword_names && keyword_values == o.keyword_values;
}

bool Statement::operator==(const Statement& o) const {
  return kind == o.kind && target == o.target && value == o.value && count == o.count && body == o.body;
}

bool is_whitelisted_call(std::string_view name) {
  for (const char* c : kExtraCalls) {
    if (name == c) return true;
  }
  return primitive_from_name(name).has_value();
}

PlanProgram parse_program(std::string_view code) { return Parser(Lexer(code).run()).program(); }

std::string print_expr(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Number: return format_number(e.number);
    case Expr::Kind::String: return quote(e.text);
    case Expr::Kind::Name: return e.text;
    case Expr::Kind::Negate: {
      const auto inner = print_expr(e.args[0]);
      return precedence(e.args[0]) < 3 ? "-(" + inner + ")" : "-" + inner;
    }
    case Expr::Kind::Binary: {
      const int p = precedence(e);
      auto lhs = print_expr(e.args[0]);
      auto rhs = print_expr(e.args[1]);
      if (precedence(e.args[0]) < p) lhs = "(" + lhs + ")";
      if (precedence(e.args[1]) <= p) rhs = "(" + rhs + ")";
      return lhs + " " + e.op + " " + rhs;
    }
    case Expr::Kind::Call: {
      std::string s = "robot." + e.text + "(";
      bool first = true;
      for (const auto& a : e.args) {
        if (!first) s += ", ";
        s += print_expr(a);
        first = false;
      }
      for (std::size_t k = 0; k < e.keyword_names.size(); ++k) {
        if (!first) s += ", ";
        s += e.keyword_names[k] + "=" + print_expr(e.keyword_values[k]);
        first = false;
      }
      return s + ")";
    }
  }
  return {};
}

std::string print_program(const PlanProgram& program) {
  std::string out;
  for (const auto& s : program.statements) print_statement(s, 0, out);
  return out;
}

}  // namespace mslm
