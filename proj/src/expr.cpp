#include "paroc/expr.hpp"

#include <array>
#include <cassert>
#include <charconv>
#include <cmath>
#include <cstring>

namespace paroc {

const char* var_name(Var v) {
  switch (v) {
    case Var::x: return "x";
    case Var::x2: return "x2";
    case Var::t: return "t";
    case Var::y: return "y";
    case Var::u: return "u";
    case Var::w: return "w";
  }
  return "?";
}

double EvalPoint::get(Var v) const {
  switch (v) {
    case Var::x: return x;
    case Var::x2: return x2;
    case Var::t: return t;
    case Var::y: return y;
    case Var::u: return u;
    case Var::w: return w;
  }
  return 0;
}

std::string format_double(double v) {
  std::array<char, 64> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace {

// ---------------------------------------------------------------------------
// Second-order forward dual number over the active variables (y, u, w).

// Upper-triangle index for the 3x3 symmetric Hessian: (0,0)(0,1)(0,2)(1,1)(1,2)(2,2).
constexpr int hidx(int i, int j) {
  return (i <= j) ? (i * (5 - i)) / 2 + j : (j * (5 - j)) / 2 + i;
}

struct Dual2 {
  double v = 0;
  std::array<double, 3> g{{0, 0, 0}};
  std::array<double, 6> h{{0, 0, 0, 0, 0, 0}};
};

Dual2 dual_const(double c) {
  Dual2 r;
  r.v = c;
  return r;
}

Dual2 operator+(const Dual2& a, const Dual2& b) {
  Dual2 r;
  r.v = a.v + b.v;
  for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] + b.g[i];
  for (int k = 0; k < 6; ++k) r.h[k] = a.h[k] + b.h[k];
  return r;
}

Dual2 operator-(const Dual2& a, const Dual2& b) {
  Dual2 r;
  r.v = a.v - b.v;
  for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] - b.g[i];
  for (int k = 0; k < 6; ++k) r.h[k] = a.h[k] - b.h[k];
  return r;
}

Dual2 operator-(const Dual2& a) {
  Dual2 r;
  r.v = -a.v;
  for (int i = 0; i < 3; ++i) r.g[i] = -a.g[i];
  for (int k = 0; k < 6; ++k) r.h[k] = -a.h[k];
  return r;
}

Dual2 operator*(const Dual2& a, const Dual2& b) {
  Dual2 r;
  r.v = a.v * b.v;
  for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      int k = hidx(i, j);
      r.h[k] = a.h[k] * b.v + a.v * b.h[k] + a.g[i] * b.g[j] + a.g[j] * b.g[i];
    }
  return r;
}

Dual2 operator/(const Dual2& a, const Dual2& b) {
  Dual2 r;
  r.v = a.v / b.v;
  for (int i = 0; i < 3; ++i) r.g[i] = (a.g[i] - r.v * b.g[i]) / b.v;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      int k = hidx(i, j);
      r.h[k] =
          (a.h[k] - r.v * b.h[k] - r.g[i] * b.g[j] - r.g[j] * b.g[i]) / b.v;
    }
  return r;
}

// f(a) with f value/first/second derivative at a.v supplied.
Dual2 chain(const Dual2& a, double f, double fp, double fpp) {
  Dual2 r;
  r.v = f;
  for (int i = 0; i < 3; ++i) r.g[i] = fp * a.g[i];
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      r.h[hidx(i, j)] = fp * a.h[hidx(i, j)] + fpp * a.g[i] * a.g[j];
  return r;
}

double ipow(double b, long long e) {
  if (e < 0) return 1.0 / ipow(b, -e);
  double r = 1.0, p = b;
  while (e > 0) {
    if (e & 1) r *= p;
    p *= p;
    e >>= 1;
  }
  return r;
}

Dual2 dual_pow(const Dual2& a, long long k) {
  if (k == 0) return dual_const(1.0);
  if (k == 1) return a;
  double f = ipow(a.v, k);
  double fp = static_cast<double>(k) * ipow(a.v, k - 1);
  // k*(k-1) == 0 never reaches here, so the ipow(0, negative) hazard is only
  // a genuine pole of the function itself.
  double fpp = static_cast<double>(k) * static_cast<double>(k - 1) * ipow(a.v, k - 2);
  return chain(a, f, fp, fpp);
}

// ---------------------------------------------------------------------------
// Lexer.

struct Token {
  enum Kind {
    kNumber,
    kIdent,
    kPlus,
    kMinus,
    kStar,
    kSlash,
    kCaret,
    kLParen,
    kRParen,
    kEnd,
  };
  Kind kind;
  std::size_t pos;
  double number = 0;
  std::string_view ident;
};

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto push = [&](Token::Kind k, std::size_t pos) {
    out.push_back(Token{k, pos, 0, {}});
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    if ((c >= '0' && c <= '9') || c == '.') {
      double val = 0;
      auto res = std::from_chars(text.data() + i, text.data() + text.size(), val);
      if (res.ec != std::errc()) throw ParseError("malformed number", i);
      Token tk{Token::kNumber, i, val, {}};
      out.push_back(tk);
      i = static_cast<std::size_t>(res.ptr - text.data());
      continue;
    }
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') {
      std::size_t j = i + 1;
      while (j < text.size() &&
             ((text[j] >= 'a' && text[j] <= 'z') ||
              (text[j] >= 'A' && text[j] <= 'Z') ||
              (text[j] >= '0' && text[j] <= '9') || text[j] == '_'))
        ++j;
      Token tk{Token::kIdent, i, 0, text.substr(i, j - i)};
      out.push_back(tk);
      i = j;
      continue;
    }
    switch (c) {
      case '+': push(Token::kPlus, i); break;
      case '-': push(Token::kMinus, i); break;
      case '*': push(Token::kStar, i); break;
      case '/': push(Token::kSlash, i); break;
      case '^': push(Token::kCaret, i); break;
      case '(': push(Token::kLParen, i); break;
      case ')': push(Token::kRParen, i); break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", i);
    }
    ++i;
  }
  push(Token::kEnd, text.size());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parser. Grammar (left-associative, standard precedence):
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' ['-'] integer)?
//   atom   := number | variable | ('sin'|'cos'|'exp') '(' expr ')' | '(' expr ')'

class ExprParser {
 public:
  ExprParser(std::string_view text, VarSet allowed)
      : tokens_(lex(text)), allowed_(allowed) {}

  ScalarFn2 run() {
    parse_expr();
    expect(Token::kEnd, "unexpected trailing input");
    fn_.max_depth_ = max_depth_;
    return std::move(fn_);
  }

 private:
  using Op = detail::ExprOp;

  const Token& cur() const { return tokens_[idx_]; }
  void advance() { ++idx_; }

  void expect(Token::Kind k, const char* msg) {
    if (cur().kind != k) throw ParseError(msg, cur().pos);
    advance();
  }

  void emit(Op op, int stack_delta) {
    fn_.tape_.push_back(op);
    depth_ += stack_delta;
    if (depth_ > max_depth_) max_depth_ = depth_;
  }

  void parse_expr() {
    parse_term();
    while (cur().kind == Token::kPlus || cur().kind == Token::kMinus) {
      bool plus = cur().kind == Token::kPlus;
      advance();
      parse_term();
      emit(Op{plus ? Op::kAdd : Op::kSub}, -1);
    }
  }

  void parse_term() {
    parse_unary();
    while (cur().kind == Token::kStar || cur().kind == Token::kSlash) {
      bool mul = cur().kind == Token::kStar;
      advance();
      parse_unary();
      emit(Op{mul ? Op::kMul : Op::kDiv}, -1);
    }
  }

  void parse_unary() {
    if (cur().kind == Token::kMinus) {
      advance();
      parse_unary();
      emit(Op{Op::kNeg}, 0);
      return;
    }
    parse_power();
  }

  void parse_power() {
    parse_atom();
    if (cur().kind != Token::kCaret) return;
    advance();
    bool negate = false;
    if (cur().kind == Token::kMinus) {
      negate = true;
      advance();
    }
    if (cur().kind != Token::kNumber)
      throw ParseError("expected integer exponent after '^'", cur().pos);
    double e = cur().number;
    if (e != std::floor(e) || std::abs(e) > 64)
      throw ParseError("exponent must be an integer with magnitude <= 64",
                       cur().pos);
    advance();
    Op op{Op::kPow};
    op.exponent = static_cast<long long>(negate ? -e : e);
    emit(op, 0);
  }

  void parse_atom() {
    const Token& tk = cur();
    switch (tk.kind) {
      case Token::kNumber: {
        Op op{Op::kConst};
        op.cval = tk.number;
        advance();
        emit(op, +1);
        return;
      }
      case Token::kIdent: {
        if (tk.ident == "sin" || tk.ident == "cos" || tk.ident == "exp") {
          Op::Kind k = tk.ident == "sin"   ? Op::kSin
                       : tk.ident == "cos" ? Op::kCos
                                           : Op::kExp;
          advance();
          expect(Token::kLParen, "expected '(' after function name");
          parse_expr();
          expect(Token::kRParen, "expected ')'");
          emit(Op{k}, 0);
          return;
        }
        Var v;
        if (tk.ident == "x") v = Var::x;
        else if (tk.ident == "x2") v = Var::x2;
        else if (tk.ident == "t") v = Var::t;
        else if (tk.ident == "y") v = Var::y;
        else if (tk.ident == "u") v = Var::u;
        else if (tk.ident == "w") v = Var::w;
        else
          throw ParseError(
              "unknown identifier '" + std::string(tk.ident) + "'", tk.pos);
        if (!allowed_.contains(v))
          throw ParseError("variable '" + std::string(tk.ident) +
                               "' is not allowed in this context",
                           tk.pos);
        fn_.used_.add(v);
        Op op{Op::kVar};
        op.var = static_cast<int>(v);
        advance();
        emit(op, +1);
        return;
      }
      case Token::kLParen:
        advance();
        parse_expr();
        expect(Token::kRParen, "expected ')'");
        return;
      default:
        throw ParseError("expected a value", tk.pos);
    }
  }

  std::vector<Token> tokens_;
  std::size_t idx_ = 0;
  VarSet allowed_;
  ScalarFn2 fn_;
  int depth_ = 0;
  int max_depth_ = 0;
};

ScalarFn2 ScalarFn2::parse(std::string_view text, VarSet allowed) {
  ExprParser p(text, allowed);
  ScalarFn2 fn = p.run();
  if (fn.tape_.empty()) throw ParseError("empty expression", 0);
  return fn;
}

ScalarFn2 ScalarFn2::constant(double c) {
  ScalarFn2 fn;
  Op op{Op::kConst};
  op.cval = c;
  fn.tape_.push_back(op);
  fn.max_depth_ = 1;
  return fn;
}

namespace {

template <class T>
struct EvalTraits;

template <>
struct EvalTraits<double> {
  static double make_const(double c) { return c; }
  static double make_var(int var, const EvalPoint& p) {
    return p.get(static_cast<Var>(var));
  }
  static double pow(double a, long long k) { return ipow(a, k); }
  static double sin(double a) { return std::sin(a); }
  static double cos(double a) { return std::cos(a); }
  static double exp(double a) { return std::exp(a); }
};

template <>
struct EvalTraits<Dual2> {
  static Dual2 make_const(double c) { return dual_const(c); }
  static Dual2 make_var(int var, const EvalPoint& p) {
    Dual2 r = dual_const(p.get(static_cast<Var>(var)));
    switch (static_cast<Var>(var)) {
      case Var::y: r.g[0] = 1; break;
      case Var::u: r.g[1] = 1; break;
      case Var::w: r.g[2] = 1; break;
      default: break;
    }
    return r;
  }
  static Dual2 pow(const Dual2& a, long long k) { return dual_pow(a, k); }
  static Dual2 sin(const Dual2& a) {
    return chain(a, std::sin(a.v), std::cos(a.v), -std::sin(a.v));
  }
  static Dual2 cos(const Dual2& a) {
    return chain(a, std::cos(a.v), -std::sin(a.v), -std::cos(a.v));
  }
  static Dual2 exp(const Dual2& a) {
    double e = std::exp(a.v);
    return chain(a, e, e, e);
  }
};

}  // namespace

namespace {

template <class T, class OpVec>
T run_tape(const OpVec& tape, int max_depth, const EvalPoint& p) {
  using Tr = EvalTraits<T>;
  using Op = detail::ExprOp;
  std::vector<T> stack;
  stack.reserve(static_cast<std::size_t>(max_depth));
  for (const auto& op : tape) {
    switch (op.kind) {
      case Op::kConst: stack.push_back(Tr::make_const(op.cval)); break;
      case Op::kVar: stack.push_back(Tr::make_var(op.var, p)); break;
      case Op::kNeg: stack.back() = -stack.back(); break;
      case Op::kAdd: {
        T b = stack.back();
        stack.pop_back();
        stack.back() = stack.back() + b;
        break;
      }
      case Op::kSub: {
        T b = stack.back();
        stack.pop_back();
        stack.back() = stack.back() - b;
        break;
      }
      case Op::kMul: {
        T b = stack.back();
        stack.pop_back();
        stack.back() = stack.back() * b;
        break;
      }
      case Op::kDiv: {
        T b = stack.back();
        stack.pop_back();
        stack.back() = stack.back() / b;
        break;
      }
      case Op::kPow: stack.back() = Tr::pow(stack.back(), op.exponent); break;
      case Op::kSin: stack.back() = Tr::sin(stack.back()); break;
      case Op::kCos: stack.back() = Tr::cos(stack.back()); break;
      case Op::kExp: stack.back() = Tr::exp(stack.back()); break;
    }
  }
  assert(stack.size() == 1);
  return stack.back();
}

}  // namespace

double ScalarFn2::value(const EvalPoint& p) const {
  if (tape_.empty()) return 0;
  return run_tape<double>(tape_, max_depth_, p);
}

Value2 ScalarFn2::eval(const EvalPoint& p) const {
  Value2 out;
  if (tape_.empty()) return out;
  Dual2 d = run_tape<Dual2>(tape_, max_depth_, p);
  out.v = d.v;
  out.dy = d.g[0];
  out.du = d.g[1];
  out.dw = d.g[2];
  out.dyy = d.h[hidx(0, 0)];
  out.dyu = d.h[hidx(0, 1)];
  out.dyw = d.h[hidx(0, 2)];
  out.duu = d.h[hidx(1, 1)];
  out.duw = d.h[hidx(1, 2)];
  out.dww = d.h[hidx(2, 2)];
  return out;
}

// Precedence levels: atom/call 5, pow 4, neg 3, mul/div 2, add/sub 1.
std::string ScalarFn2::to_string() const {
  struct Frag {
    std::string text;
    int prec;
  };
  std::vector<Frag> stack;
  auto wrap = [](const Frag& f, int min_prec) {
    return f.prec < min_prec ? "(" + f.text + ")" : f.text;
  };
  auto binary = [&](const char* sym, int prec) {
    Frag b = stack.back();
    stack.pop_back();
    Frag a = stack.back();
    stack.pop_back();
    // Right operand needs parens at equal precedence: -, /, * are parsed
    // left-associatively, so "a/(b*c)" must keep its parentheses.
    stack.push_back(Frag{wrap(a, prec) + sym + wrap(b, prec + 1), prec});
  };
  for (const auto& op : tape_) {
    switch (op.kind) {
      case Op::kConst:
        stack.push_back(Frag{format_double(op.cval), 5});
        break;
      case Op::kVar:
        stack.push_back(Frag{var_name(static_cast<Var>(op.var)), 5});
        break;
      case Op::kNeg: {
        Frag a = stack.back();
        stack.pop_back();
        stack.push_back(Frag{"-" + wrap(a, 4), 3});
        break;
      }
      case Op::kAdd: binary(" + ", 1); break;
      case Op::kSub: binary(" - ", 1); break;
      case Op::kMul: binary("*", 2); break;
      case Op::kDiv: binary("/", 2); break;
      case Op::kPow: {
        Frag a = stack.back();
        stack.pop_back();
        stack.push_back(
            Frag{wrap(a, 5) + "^" + std::to_string(op.exponent), 4});
        break;
      }
      case Op::kSin:
      case Op::kCos:
      case Op::kExp: {
        const char* name = op.kind == Op::kSin   ? "sin"
                           : op.kind == Op::kCos ? "cos"
                                                 : "exp";
        Frag a = stack.back();
        stack.pop_back();
        stack.push_back(Frag{std::string(name) + "(" + a.text + ")", 5});
        break;
      }
    }
  }
  return stack.empty() ? std::string("0") : stack.back().text;
}

}  // namespace paroc
