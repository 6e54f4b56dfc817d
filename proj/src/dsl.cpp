#include "pcrd/dsl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>

#include "pcrd/util.hpp"

namespace pcrd::dsl {

namespace {

// ---------------------------------------------------------------- lexer ----

enum class Tok {
  End, Ident, Number,
  KwTerm, KwWeight, KwAnd, KwOr, KwNot,
  LParen, RParen, Comma, Colon, Question,
  Plus, Minus, Star, Slash,
  Lt, Le, Gt, Ge, Eq, Ne,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  DslResult<std::vector<Token>> run() {
    std::vector<Token> out;
    while (true) {
      skip_ws_and_comments();
      Token t;
      t.line = line_;
      t.column = column_;
      if (pos_ >= src_.size()) {
        t.kind = Tok::End;
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                src_[pos_] == '_')) {
          advance();
        }
        t.text = std::string(src_.substr(start, pos_ - start));
        if (t.text == "term") t.kind = Tok::KwTerm;
        else if (t.text == "weight") t.kind = Tok::KwWeight;
        else if (t.text == "and") t.kind = Tok::KwAnd;
        else if (t.text == "or") t.kind = Tok::KwOr;
        else if (t.text == "not") t.kind = Tok::KwNot;
        else t.kind = Tok::Ident;
        out.push_back(std::move(t));
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '.' && pos_ + 1 < src_.size() &&
           std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) ||
                src_[pos_] == '.')) {
          advance();
        }
        // exponent part
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
          size_t mark = pos_;
          advance();
          if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
            advance();
          }
          if (pos_ < src_.size() &&
              std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            while (pos_ < src_.size() &&
                   std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
              advance();
            }
          } else {
            pos_ = mark;  // lone 'e' belongs to the next token
          }
        }
        std::string text(src_.substr(start, pos_ - start));
        char* end = nullptr;
        double v = std::strtod(text.c_str(), &end);
        if (end != text.c_str() + text.size()) {
          return DslError{DslError::Kind::Syntax,
                          "malformed number literal '" + text + "'", t.line,
                          t.column};
        }
        if (!std::isfinite(v)) {
          return DslError{DslError::Kind::Syntax,
                          "non-finite number literal '" + text + "'", t.line,
                          t.column};
        }
        t.kind = Tok::Number;
        t.number = v;
        t.text = std::move(text);
        out.push_back(std::move(t));
        continue;
      }
      auto two = [&](char a, char b) {
        return c == a && pos_ + 1 < src_.size() && src_[pos_ + 1] == b;
      };
      if (two('<', '=')) { t.kind = Tok::Le; advance(); advance(); }
      else if (two('>', '=')) { t.kind = Tok::Ge; advance(); advance(); }
      else if (two('=', '=')) { t.kind = Tok::Eq; advance(); advance(); }
      else if (two('!', '=')) { t.kind = Tok::Ne; advance(); advance(); }
      else if (c == '<') { t.kind = Tok::Lt; advance(); }
      else if (c == '>') { t.kind = Tok::Gt; advance(); }
      else if (c == '(') { t.kind = Tok::LParen; advance(); }
      else if (c == ')') { t.kind = Tok::RParen; advance(); }
      else if (c == ',') { t.kind = Tok::Comma; advance(); }
      else if (c == ':') { t.kind = Tok::Colon; advance(); }
      else if (c == '?') { t.kind = Tok::Question; advance(); }
      else if (c == '+') { t.kind = Tok::Plus; advance(); }
      else if (c == '-') { t.kind = Tok::Minus; advance(); }
      else if (c == '*') { t.kind = Tok::Star; advance(); }
      else if (c == '/') { t.kind = Tok::Slash; advance(); }
      else {
        return DslError{DslError::Kind::Syntax,
                        std::string("unexpected character '") + c + "'",
                        t.line, t.column};
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_ws_and_comments() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        return;
      }
    }
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

// --------------------------------------------------------------- parser ----

struct Builtin {
  const char* name;
  int arity;
};

constexpr Builtin kBuiltins[] = {
    {"min", 2}, {"max", 2}, {"abs", 1}, {"clamp", 3}, {"exp", 1}, {"tanh", 1},
};

const Builtin* find_builtin(std::string_view name) {
  for (const auto& b : kBuiltins) {
    if (name == b.name) return &b;
  }
  return nullptr;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  DslResult<RewardProgram> parse_program(std::string_view source) {
    RewardProgram program;
    program.source_text = std::string(source);
    if (peek().kind == Tok::End) {
      return err("empty program: expected at least one 'term'");
    }
    while (peek().kind != Tok::End) {
      auto term = parse_term();
      if (!term.ok()) return term.error();
      program.terms.push_back(std::move(term.value()));
    }
    return program;
  }

 private:
  const Token& peek(size_t ahead = 0) const {
    size_t i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  Token take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  DslError err(const std::string& msg) const {
    const Token& t = peek();
    return DslError{DslError::Kind::Syntax, msg, t.line, t.column};
  }

  DslResult<Term> parse_term() {
    Term term;
    term.line = peek().line;
    if (peek().kind != Tok::KwTerm) {
      return err("expected 'term'");
    }
    take();
    if (peek().kind != Tok::Ident) {
      return err("expected term name identifier after 'term'");
    }
    term.name = take().text;
    if (peek().kind != Tok::KwWeight) {
      return err("expected 'weight' after term name");
    }
    take();
    bool negate = false;
    if (peek().kind == Tok::Minus) {
      take();
      negate = true;
    }
    if (peek().kind != Tok::Number) {
      return err("expected numeric weight");
    }
    term.weight = take().number;
    if (negate) term.weight = -term.weight;
    if (peek().kind != Tok::Colon) {
      return err("expected ':' after weight");
    }
    take();
    auto body = parse_expr(1);
    if (!body.ok()) return body.error();
    term.body = std::move(body.value());
    return term;
  }

  DslResult<ExprPtr> parse_expr(int depth) {
    if (depth > kMaxAstDepth) {
      return err("expression nesting exceeds depth limit of " +
                 std::to_string(kMaxAstDepth));
    }
    auto cond = parse_or(depth + 1);
    if (!cond.ok()) return cond;
    if (peek().kind != Tok::Question) return cond;
    Token q = take();
    auto then_branch = parse_expr(depth + 1);
    if (!then_branch.ok()) return then_branch;
    if (peek().kind != Tok::Colon) {
      return err("expected ':' in conditional expression");
    }
    take();
    auto else_branch = parse_expr(depth + 1);
    if (!else_branch.ok()) return else_branch;
    auto node = std::make_unique<Expr>();
    node->kind = Expr::Kind::Ternary;
    node->line = q.line;
    node->column = q.column;
    node->args.push_back(std::move(cond.value()));
    node->args.push_back(std::move(then_branch.value()));
    node->args.push_back(std::move(else_branch.value()));
    return node;
  }

  DslResult<ExprPtr> parse_or(int depth) {
    if (depth > kMaxAstDepth) return depth_error();
    auto lhs = parse_and(depth + 1);
    if (!lhs.ok()) return lhs;
    while (peek().kind == Tok::KwOr) {
      Token op = take();
      auto rhs = parse_and(depth + 1);
      if (!rhs.ok()) return rhs;
      lhs = binary(BinaryOp::Or, std::move(lhs.value()), std::move(rhs.value()),
                   op);
    }
    return lhs;
  }

  DslResult<ExprPtr> parse_and(int depth) {
    if (depth > kMaxAstDepth) return depth_error();
    auto lhs = parse_not(depth + 1);
    if (!lhs.ok()) return lhs;
    while (peek().kind == Tok::KwAnd) {
      Token op = take();
      auto rhs = parse_not(depth + 1);
      if (!rhs.ok()) return rhs;
      lhs = binary(BinaryOp::And, std::move(lhs.value()),
                   std::move(rhs.value()), op);
    }
    return lhs;
  }

  DslResult<ExprPtr> parse_not(int depth) {
    if (depth > kMaxAstDepth) return depth_error();
    if (peek().kind == Tok::KwNot) {
      Token op = take();
      auto operand = parse_not(depth + 1);
      if (!operand.ok()) return operand;
      auto node = std::make_unique<Expr>();
      node->kind = Expr::Kind::Unary;
      node->unary_op = UnaryOp::Not;
      node->line = op.line;
      node->column = op.column;
      node->args.push_back(std::move(operand.value()));
      return node;
    }
    return parse_comparison(depth + 1);
  }

  DslResult<ExprPtr> parse_comparison(int depth) {
    if (depth > kMaxAstDepth) return depth_error();
    auto lhs = parse_additive(depth + 1);
    if (!lhs.ok()) return lhs;
    while (true) {
      BinaryOp bop;
      switch (peek().kind) {
        case Tok::Lt: bop = BinaryOp::Lt; break;
        case Tok::Le: bop = BinaryOp::Le; break;
        case Tok::Gt: bop = BinaryOp::Gt; break;
        case Tok::Ge: bop = BinaryOp::Ge; break;
        case Tok::Eq: bop = BinaryOp::Eq; break;
        case Tok::Ne: bop = BinaryOp::Ne; break;
        default: return lhs;
      }
      Token op = take();
      auto rhs = parse_additive(depth + 1);
      if (!rhs.ok()) return rhs;
      lhs = binary(bop, std::move(lhs.value()), std::move(rhs.value()), op);
    }
  }

  DslResult<ExprPtr> parse_additive(int depth) {
    if (depth > kMaxAstDepth) return depth_error();
    auto lhs = parse_multiplicative(depth + 1);
    if (!lhs.ok()) return lhs;
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      Token op = take();
      auto rhs = parse_multiplicative(depth + 1);
      if (!rhs.ok()) return rhs;
      lhs = binary(op.kind == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub,
                   std::move(lhs.value()), std::move(rhs.value()), op);
    }
    return lhs;
  }

  DslResult<ExprPtr> parse_multiplicative(int depth) {
    if (depth > kMaxAstDepth) return depth_error();
    auto lhs = parse_unary(depth + 1);
    if (!lhs.ok()) return lhs;
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      Token op = take();
      auto rhs = parse_unary(depth + 1);
      if (!rhs.ok()) return rhs;
      lhs = binary(op.kind == Tok::Star ? BinaryOp::Mul : BinaryOp::Div,
                   std::move(lhs.value()), std::move(rhs.value()), op);
    }
    return lhs;
  }

  DslResult<ExprPtr> parse_unary(int depth) {
    if (depth > kMaxAstDepth) return depth_error();
    if (peek().kind == Tok::Minus) {
      Token op = take();
      auto operand = parse_unary(depth + 1);
      if (!operand.ok()) return operand;
      auto node = std::make_unique<Expr>();
      node->kind = Expr::Kind::Unary;
      node->unary_op = UnaryOp::Neg;
      node->line = op.line;
      node->column = op.column;
      node->args.push_back(std::move(operand.value()));
      return node;
    }
    return parse_primary(depth + 1);
  }

  DslResult<ExprPtr> parse_primary(int depth) {
    if (depth > kMaxAstDepth) return depth_error();
    const Token& t = peek();
    if (t.kind == Tok::Number) {
      Token tok = take();
      auto node = std::make_unique<Expr>();
      node->kind = Expr::Kind::Number;
      node->number = tok.number;
      node->line = tok.line;
      node->column = tok.column;
      return node;
    }
    if (t.kind == Tok::Ident) {
      Token tok = take();
      if (peek().kind == Tok::LParen) {
        take();
        auto node = std::make_unique<Expr>();
        node->kind = Expr::Kind::Call;
        node->name = tok.text;
        node->line = tok.line;
        node->column = tok.column;
        if (peek().kind != Tok::RParen) {
          while (true) {
            auto arg = parse_expr(depth + 1);
            if (!arg.ok()) return arg;
            node->args.push_back(std::move(arg.value()));
            if (peek().kind == Tok::Comma) {
              take();
              continue;
            }
            break;
          }
        }
        if (peek().kind != Tok::RParen) {
          return err("expected ')' to close call to '" + tok.text + "'");
        }
        take();
        return node;
      }
      auto node = std::make_unique<Expr>();
      node->kind = Expr::Kind::Feature;
      node->name = tok.text;
      node->line = tok.line;
      node->column = tok.column;
      return node;
    }
    if (t.kind == Tok::LParen) {
      take();
      auto inner = parse_expr(depth + 1);
      if (!inner.ok()) return inner;
      if (peek().kind != Tok::RParen) {
        return err("expected ')' to close parenthesized expression");
      }
      take();
      return inner;
    }
    return err("expected expression");
  }

  DslResult<ExprPtr> binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs,
                            const Token& tok) {
    auto node = std::make_unique<Expr>();
    node->kind = Expr::Kind::Binary;
    node->binary_op = op;
    node->line = tok.line;
    node->column = tok.column;
    node->args.push_back(std::move(lhs));
    node->args.push_back(std::move(rhs));
    return DslResult<ExprPtr>(std::move(node));
  }

  DslError depth_error() const {
    const Token& t = peek();
    return DslError{DslError::Kind::Syntax,
                    "expression nesting exceeds depth limit of " +
                        std::to_string(kMaxAstDepth),
                    t.line, t.column};
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

// ------------------------------------------------------------- validate ----

std::optional<DslError> validate_expr(Expr& e, const FeatureCatalog& catalog) {
  switch (e.kind) {
    case Expr::Kind::Number:
      return std::nullopt;
    case Expr::Kind::Feature: {
      int idx = catalog.index_of(e.name);
      if (idx < 0) {
        return DslError{DslError::Kind::Semantic,
                        "unknown identifier '" + e.name + "'", e.line,
                        e.column};
      }
      e.feature_index = idx;
      return std::nullopt;
    }
    case Expr::Kind::Call: {
      const Builtin* b = find_builtin(e.name);
      if (b == nullptr) {
        return DslError{DslError::Kind::Semantic,
                        "unknown function '" + e.name + "'", e.line, e.column};
      }
      if (static_cast<int>(e.args.size()) != b->arity) {
        return DslError{DslError::Kind::Semantic,
                        "'" + e.name + "' expects " +
                            std::to_string(b->arity) + " argument(s), got " +
                            std::to_string(e.args.size()),
                        e.line, e.column};
      }
      break;
    }
    default:
      break;
  }
  for (auto& arg : e.args) {
    if (auto err = validate_expr(*arg, catalog)) return err;
  }
  return std::nullopt;
}

// ------------------------------------------------------------- evaluate ----

struct EvalContext {
  const FeatureMap* features;
  DslError* error;  // set once; evaluation short-circuits afterwards
};

double eval_expr(const Expr& e, EvalContext& ctx);

double check_finite(double v, const Expr& at, EvalContext& ctx) {
  if (!std::isfinite(v) && ctx.error->message.empty()) {
    *ctx.error = DslError{DslError::Kind::Runtime,
                          "non-finite intermediate value", at.line, at.column};
  }
  return v;
}

double eval_expr(const Expr& e, EvalContext& ctx) {
  if (!ctx.error->message.empty()) return 0.0;
  switch (e.kind) {
    case Expr::Kind::Number:
      return e.number;
    case Expr::Kind::Feature:
      return (*ctx.features)[e.feature_index];
    case Expr::Kind::Unary: {
      double v = eval_expr(*e.args[0], ctx);
      if (e.unary_op == UnaryOp::Neg) return -v;
      return v == 0.0 ? 1.0 : 0.0;
    }
    case Expr::Kind::Binary: {
      // and/or short-circuit so gating guards division, like the ternary.
      if (e.binary_op == BinaryOp::And) {
        double a = eval_expr(*e.args[0], ctx);
        if (!ctx.error->message.empty() || a == 0.0) return 0.0;
        double b = eval_expr(*e.args[1], ctx);
        return b != 0.0 ? 1.0 : 0.0;
      }
      if (e.binary_op == BinaryOp::Or) {
        double a = eval_expr(*e.args[0], ctx);
        if (!ctx.error->message.empty()) return 0.0;
        if (a != 0.0) return 1.0;
        double b = eval_expr(*e.args[1], ctx);
        return b != 0.0 ? 1.0 : 0.0;
      }
      double a = eval_expr(*e.args[0], ctx);
      double b = eval_expr(*e.args[1], ctx);
      if (!ctx.error->message.empty()) return 0.0;
      switch (e.binary_op) {
        case BinaryOp::Add: return check_finite(a + b, e, ctx);
        case BinaryOp::Sub: return check_finite(a - b, e, ctx);
        case BinaryOp::Mul: return check_finite(a * b, e, ctx);
        case BinaryOp::Div:
          if (b == 0.0) {
            *ctx.error = DslError{DslError::Kind::Runtime, "division by zero",
                                  e.line, e.column};
            return 0.0;
          }
          return check_finite(a / b, e, ctx);
        case BinaryOp::Lt: return a < b ? 1.0 : 0.0;
        case BinaryOp::Le: return a <= b ? 1.0 : 0.0;
        case BinaryOp::Gt: return a > b ? 1.0 : 0.0;
        case BinaryOp::Ge: return a >= b ? 1.0 : 0.0;
        case BinaryOp::Eq: return a == b ? 1.0 : 0.0;
        case BinaryOp::Ne: return a != b ? 1.0 : 0.0;
        default: return 0.0;
      }
    }
    case Expr::Kind::Ternary: {
      double c = eval_expr(*e.args[0], ctx);
      if (!ctx.error->message.empty()) return 0.0;
      return c != 0.0 ? eval_expr(*e.args[1], ctx)
                      : eval_expr(*e.args[2], ctx);
    }
    case Expr::Kind::Call: {
      double a0 = eval_expr(*e.args[0], ctx);
      if (!ctx.error->message.empty()) return 0.0;
      if (e.name == "abs") return std::fabs(a0);
      if (e.name == "exp") return check_finite(std::exp(a0), e, ctx);
      if (e.name == "tanh") return std::tanh(a0);
      double a1 = eval_expr(*e.args[1], ctx);
      if (!ctx.error->message.empty()) return 0.0;
      if (e.name == "min") return std::min(a0, a1);
      if (e.name == "max") return std::max(a0, a1);
      // clamp(x, lo, hi) == min(max(x, lo), hi); total, no error on lo > hi
      double a2 = eval_expr(*e.args[2], ctx);
      if (!ctx.error->message.empty()) return 0.0;
      return std::min(std::max(a0, a1), a2);
    }
  }
  return 0.0;
}

// --------------------------------------------------------- pretty print ----

// Higher binds tighter; used to drop redundant parentheses.
int precedence(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Ternary: return 1;
    case Expr::Kind::Binary:
      switch (e.binary_op) {
        case BinaryOp::Or: return 2;
        case BinaryOp::And: return 3;
        case BinaryOp::Lt: case BinaryOp::Le: case BinaryOp::Gt:
        case BinaryOp::Ge: case BinaryOp::Eq: case BinaryOp::Ne: return 5;
        case BinaryOp::Add: case BinaryOp::Sub: return 6;
        case BinaryOp::Mul: case BinaryOp::Div: return 7;
      }
      return 0;
    case Expr::Kind::Unary:
      return e.unary_op == UnaryOp::Not ? 4 : 8;
    default:
      return 9;
  }
}

const char* op_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::And: return "and";
    case BinaryOp::Or: return "or";
  }
  return "?";
}

void print_expr(const Expr& e, std::string& out, int parent_prec) {
  int prec = precedence(e);
  bool parens = prec < parent_prec;
  if (parens) out += '(';
  switch (e.kind) {
    case Expr::Kind::Number:
      out += format_double(e.number);
      break;
    case Expr::Kind::Feature:
      out += e.name;
      break;
    case Expr::Kind::Unary:
      if (e.unary_op == UnaryOp::Neg) {
        out += '-';
        print_expr(*e.args[0], out, 9);  // operand as primary
      } else {
        out += "not ";
        print_expr(*e.args[0], out, prec);
      }
      break;
    case Expr::Kind::Binary:
      print_expr(*e.args[0], out, prec);
      out += ' ';
      out += op_text(e.binary_op);
      out += ' ';
      // left-assoc: right child needs strictly higher precedence
      print_expr(*e.args[1], out, prec + 1);
      break;
    case Expr::Kind::Ternary:
      print_expr(*e.args[0], out, prec + 1);
      out += " ? ";
      print_expr(*e.args[1], out, prec);
      out += " : ";
      print_expr(*e.args[2], out, prec);
      break;
    case Expr::Kind::Call:
      out += e.name;
      out += '(';
      for (size_t i = 0; i < e.args.size(); ++i) {
        if (i > 0) out += ", ";
        print_expr(*e.args[i], out, 1);
      }
      out += ')';
      break;
  }
  if (parens) out += ')';
}

ExprPtr clone_expr(const Expr& e) {
  auto c = std::make_unique<Expr>();
  c->kind = e.kind;
  c->number = e.number;
  c->name = e.name;
  c->feature_index = e.feature_index;
  c->unary_op = e.unary_op;
  c->binary_op = e.binary_op;
  c->line = e.line;
  c->column = e.column;
  for (const auto& a : e.args) c->args.push_back(clone_expr(*a));
  return c;
}

}  // namespace

const char* kind_name(DslError::Kind kind) {
  switch (kind) {
    case DslError::Kind::Syntax: return "SYNTAX";
    case DslError::Kind::Semantic: return "SEMANTIC";
    case DslError::Kind::Runtime: return "RUNTIME";
  }
  return "UNKNOWN";
}

std::string DslError::to_string() const {
  std::string s = kind_name(kind);
  s += ": ";
  s += message;
  if (line > 0) {
    s += " (line " + std::to_string(line) + ", col " + std::to_string(column) +
         ")";
  }
  return s;
}

RewardProgram RewardProgram::clone() const {
  RewardProgram copy;
  copy.source_text = source_text;
  for (const auto& t : terms) {
    Term ct;
    ct.name = t.name;
    ct.weight = t.weight;
    ct.line = t.line;
    ct.body = clone_expr(*t.body);
    copy.terms.push_back(std::move(ct));
  }
  return copy;
}

DslResult<RewardProgram> parse(std::string_view text) {
  Lexer lexer(text);
  auto tokens = lexer.run();
  if (!tokens.ok()) return tokens.error();
  Parser parser(std::move(tokens.value()));
  return parser.parse_program(text);
}

std::optional<DslError> validate(RewardProgram& program,
                                 const FeatureCatalog& catalog) {
  std::set<std::string> seen;
  for (auto& term : program.terms) {
    if (!seen.insert(term.name).second) {
      return DslError{DslError::Kind::Semantic,
                      "duplicate term name '" + term.name + "'", term.line, 1};
    }
    if (!std::isfinite(term.weight)) {
      return DslError{DslError::Kind::Semantic,
                      "non-finite weight for term '" + term.name + "'",
                      term.line, 1};
    }
    if (auto err = validate_expr(*term.body, catalog)) return err;
  }
  return std::nullopt;
}

DslResult<double> evaluate(const RewardProgram& program,
                           const FeatureMap& features) {
  DslError error;
  EvalContext ctx{&features, &error};
  double total = 0.0;
  for (const auto& term : program.terms) {
    double v = eval_expr(*term.body, ctx);
    if (!error.message.empty()) return error;
    total += term.weight * v;
    if (!std::isfinite(total)) {
      return DslError{DslError::Kind::Runtime,
                      "non-finite total after term '" + term.name + "'",
                      term.line, 1};
    }
  }
  return total;
}

std::string pretty_print(const RewardProgram& program) {
  std::string out;
  for (const auto& term : program.terms) {
    out += "term ";
    out += term.name;
    out += " weight ";
    out += format_double(term.weight);
    out += ": ";
    print_expr(*term.body, out, 1);
    out += '\n';
  }
  return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::Number:
      return a.number == b.number;
    case Expr::Kind::Feature:
      return a.name == b.name;
    case Expr::Kind::Unary:
      if (a.unary_op != b.unary_op) return false;
      break;
    case Expr::Kind::Binary:
      if (a.binary_op != b.binary_op) return false;
      break;
    case Expr::Kind::Call:
      if (a.name != b.name) return false;
      break;
    case Expr::Kind::Ternary:
      break;
  }
  if (a.args.size() != b.args.size()) return false;
  for (size_t i = 0; i < a.args.size(); ++i) {
    if (!structurally_equal(*a.args[i], *b.args[i])) return false;
  }
  return true;
}

bool structurally_equal(const RewardProgram& a, const RewardProgram& b) {
  if (a.terms.size() != b.terms.size()) return false;
  for (size_t i = 0; i < a.terms.size(); ++i) {
    if (a.terms[i].name != b.terms[i].name) return false;
    if (a.terms[i].weight != b.terms[i].weight) return false;
    if (!structurally_equal(*a.terms[i].body, *b.terms[i].body)) return false;
  }
  return true;
}

StructuralDiff structural_diff(const RewardProgram& old_program,
                               const RewardProgram& new_program) {
  StructuralDiff diff;
  std::map<std::string, const Term*> old_terms, new_terms;
  for (const auto& t : old_program.terms) old_terms[t.name] = &t;
  for (const auto& t : new_program.terms) new_terms[t.name] = &t;
  for (const auto& [name, term] : new_terms) {
    auto it = old_terms.find(name);
    if (it == old_terms.end()) {
      diff.added.push_back(name);
      continue;
    }
    if (term->weight != it->second->weight) diff.reweighted.push_back(name);
    if (!structurally_equal(*term->body, *it->second->body)) {
      diff.bodies_changed.push_back(name);
    }
  }
  for (const auto& [name, term] : old_terms) {
    (void)term;
    if (new_terms.find(name) == new_terms.end()) diff.removed.push_back(name);
  }
  return diff;
}

std::string StructuralDiff::to_string() const {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
      if (i > 0) s += ",";
      s += v[i];
    }
    return s.empty() ? std::string("-") : s;
  };
  std::string s;
  s += "added=" + std::to_string(added.size()) + "[" + join(added) + "] ";
  s += "removed=" + std::to_string(removed.size()) + "[" + join(removed) +
       "] ";
  s += "reweighted=" + std::to_string(reweighted.size()) + "[" +
       join(reweighted) + "] ";
  s += "bodies_changed=" + std::to_string(bodies_changed.size()) + "[" +
       join(bodies_changed) + "]";
  return s;
}

Classification classify(std::string_view text, const FeatureCatalog& catalog) {
  Classification result;
  auto parsed = parse(text);
  if (!parsed.ok()) {
    result.error = parsed.error();
    return result;
  }
  RewardProgram program = std::move(parsed.value());
  if (auto err = validate(program, catalog)) {
    result.error = *err;
    return result;
  }
  // Probe at all-zero features: the initial state every truck starts from.
  FeatureMap probe(catalog);
  auto value = evaluate(program, probe);
  if (!value.ok()) {
    result.error = value.error();
    return result;
  }
  result.valid = true;
  result.probe_value = value.value();
  return result;
}

std::string grammar_summary() {
  return
      "program   := term+\n"
      "term      := \"term\" NAME \"weight\" NUMBER \":\" expr\n"
      "expr      := or_expr [\"?\" expr \":\" expr]   (conditional; only the "
      "taken branch is evaluated)\n"
      "operators := + - * /   < <= > >= == !=   and or not   (comparisons and "
      "booleans yield 1.0/0.0; and/or short-circuit)\n"
      "calls     := min(a,b) max(a,b) abs(x) clamp(x,lo,hi) exp(x) tanh(x)\n"
      "atoms     := NUMBER | feature identifier | ( expr )\n"
      "comments  := '#' to end of line\n"
      "No loops, no recursion, no assignment, no strings; identifiers must "
      "come from the feature catalog; division by zero or non-finite values "
      "are runtime errors that invalidate the program.\n";
}

}  // namespace pcrd::dsl
