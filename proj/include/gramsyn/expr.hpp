#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "gramsyn/linalg.hpp"

namespace gramsyn::expr {

// Order-2 jet along a single direction: value, first and second directional
// derivative. Arithmetic propagates the chain rule exactly (up to rounding),
// which is what the derivative-exactness guarantees below rely on.
struct DualValue {
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;
};

using ParamMap = std::map<std::string, double>;

enum class UnaryOp { Neg, Sin, Cos, Tanh, Exp, Log, Sqrt, Abs };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

// Immutable scalar expression in t, x1..xd and named parameters.
class Expr {
 public:
  Expr() = default;

  // Grammar: ^ binds tighter than unary minus, then * /, then + -; ^ is
  // right-associative. Variables are t and x1..x<dimension>; any other
  // identifier that is not a function name parses as a named parameter.
  static Expr parse(std::string_view text, int dimension);

  static Expr constant(double value);
  static Expr state_var(int index, int dimension);  // 1-based
  static Expr time_var();
  static Expr unary(UnaryOp op, Expr operand);
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs);

  bool valid() const { return node_ != nullptr; }
  int dimension() const { return dimension_; }

  double eval(double t, const Vec& x, const ParamMap* params = nullptr) const;

  // Jet evaluation along the state direction dx (t is carried as a constant;
  // only x-derivatives are produced).
  DualValue eval_dual(double t, const Vec& x, const Vec& dx,
                      const ParamMap* params = nullptr) const;

  // Substitutes parameters by constants; unknown names stay symbolic.
  Expr resolve(const ParamMap& params) const;

  std::vector<std::string> parameter_names() const;
  bool uses_state() const;

  std::string to_string() const;
  bool structurally_equal(const Expr& other) const;

  struct Node;
  using NodePtr = std::shared_ptr<const Node>;

 private:
  Expr(NodePtr node, int dimension) : node_(std::move(node)), dimension_(dimension) {}

  NodePtr node_;
  int dimension_ = 0;
};

// Componentwise evaluation of a vector (or flattened matrix) field; rejects
// non-finite results.
Vec eval_field(const std::vector<Expr>& field, double t, const Vec& x,
               const ParamMap* params = nullptr);

// Entry (i, j) = d field_i / d x_j via one forward pass per coordinate.
Mat jacobian(const std::vector<Expr>& field, double t, const Vec& x,
             const ParamMap* params = nullptr);

// Second derivative contraction D^2 field (x)[h, w]; bilinear and symmetric,
// computed by polarization of directional jets.
Vec second_directional(const std::vector<Expr>& field, double t, const Vec& x,
                       const Vec& h, const Vec& w, const ParamMap* params = nullptr);

}  // namespace gramsyn::expr
