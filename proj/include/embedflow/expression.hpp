#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "embedflow/geometry.hpp"

namespace embedflow::expr {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

enum class Kind { number, constant, variable, add, sub, mul, div, pow, neg, call };
enum class Func { sin, cos, tan, exp, log, sqrt };

struct Node;
using Ptr = std::shared_ptr<const Node>;

struct Node {
  Kind kind = Kind::number;
  double value = 0.0;  // number, and the value of a named constant
  std::string name;    // constant or variable name
  int var = -1;        // variable slot
  Func func = Func::sin;
  Ptr a, b;
};

bool equal(const Ptr& x, const Ptr& y);

/// Recursive-descent parse over the given variable names. ^ binds tighter
/// than unary minus and is right associative, so -x^2 = -(x^2).
Ptr parse(const std::string& text, const std::vector<std::string>& variables);

/// Fully parenthesized text that parses back to an equal tree.
std::string print(const Ptr& e);

/// Derivative with respect to variable slot i, lightly simplified.
Ptr derivative(const Ptr& e, int i);

/// Reference tree-walking evaluator.
double evaluate(const Ptr& e, const std::vector<double>& x);

/// Postfix program for fast repeated evaluation.
class Program {
 public:
  struct Op {
    Kind kind;
    double value;
    int var;
    Func func;
  };

  explicit Program(const Ptr& e);
  double operator()(const double* x) const;
  double operator()(const std::vector<double>& x) const { return (*this)(x.data()); }

 private:
  std::vector<Op> ops_;
  std::size_t depth_ = 0;
};

/// One expression per ambient coordinate plus symbolic first and second
/// derivatives.
struct ChartExpression {
  std::vector<std::string> variables;
  std::vector<Ptr> coords;
  std::vector<std::vector<Ptr>> first;                // [coord][i]
  std::vector<std::vector<std::vector<Ptr>>> second;  // [coord][i][j]
};

ChartExpression parse_chart(const std::vector<std::string>& coords, const std::vector<std::string>& variables);

/// Splits "(e1, e2, ...)" (outer parentheses optional) at top-level commas.
std::vector<std::string> split_tuple(const std::string& text);

/// A chart evaluating the expression and its symbolic derivatives.
std::shared_ptr<Chart> make_chart(const ChartExpression& ce, ChartDomain domain,
                                  DerivativeMode mode = DerivativeMode::analytic, double h = 1e-4);

}  // namespace embedflow::expr
