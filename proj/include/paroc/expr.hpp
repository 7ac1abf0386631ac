#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "paroc/errors.hpp"

namespace paroc {

/// Variables an expression may reference. x2 is the second spatial coordinate
/// and is only admitted on rectangle domains.
enum class Var : int { x = 0, x2 = 1, t = 2, y = 3, u = 4, w = 5 };

const char* var_name(Var v);

struct VarSet {
  unsigned mask = 0;

  VarSet() = default;
  VarSet(std::initializer_list<Var> vs) {
    for (Var v : vs) add(v);
  }

  VarSet& add(Var v) {
    mask |= 1u << static_cast<int>(v);
    return *this;
  }
  bool contains(Var v) const { return (mask >> static_cast<int>(v)) & 1u; }
  bool subset_of(VarSet o) const { return (mask & ~o.mask) == 0; }
};

struct EvalPoint {
  double x = 0, x2 = 0, t = 0, y = 0, u = 0, w = 0;

  double get(Var v) const;
};

/// Value with first and second partials with respect to (y, u, w). Partials
/// with respect to x and t are never needed: coefficients and data functions
/// are only ever sampled pointwise in space-time.
struct Value2 {
  double v = 0;
  double dy = 0, du = 0, dw = 0;
  double dyy = 0, dyu = 0, dyw = 0;
  double duu = 0, duw = 0, dww = 0;
};

namespace detail {

struct ExprOp {
  enum Kind : std::uint8_t {
    kConst,
    kVar,
    kNeg,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kPow,
    kSin,
    kCos,
    kExp,
  };
  Kind kind;
  double cval = 0;         // kConst
  int var = 0;             // kVar
  long long exponent = 0;  // kPow
};

}  // namespace detail

/// A scalar function of (x[,x2],t,y,u,w) built from the expression grammar
/// (+, -, *, /, integer ^, sin, cos, exp) with exact forward-mode first and
/// second derivatives in (y,u,w). Immutable after parse; evaluation is const
/// and thread-safe.
class ScalarFn2 {
 public:
  ScalarFn2() = default;

  /// Parses `text`; any variable outside `allowed` is a ParseError carrying
  /// the byte offset of the offending token.
  static ScalarFn2 parse(std::string_view text, VarSet allowed);

  /// Convenience for a constant function.
  static ScalarFn2 constant(double c);

  double value(const EvalPoint& p) const;
  Value2 eval(const EvalPoint& p) const;

  bool depends_on(Var v) const { return used_.contains(v); }
  VarSet used_vars() const { return used_; }

  /// Canonical rendering; parse(to_string()) reproduces the same tree, so
  /// to_string . parse is idempotent on strings.
  std::string to_string() const;

  bool empty() const { return tape_.empty(); }

 private:
  friend class ExprParser;
  using Op = detail::ExprOp;

  std::vector<Op> tape_;  // postfix order
  int max_depth_ = 0;
  VarSet used_;
};

/// Shortest decimal rendering that round-trips to the same double.
std::string format_double(double v);

}  // namespace paroc
