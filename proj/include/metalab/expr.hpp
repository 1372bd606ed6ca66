#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace metalab::expr {

// A scalar expression in variables x1..xd, compiled to a postfix program.
// Supported: + - * / ^, unary minus, parentheses, numeric literals, pi,
// and the functions sin cos tan exp log sqrt tanh abs atan.
class Expr {
 public:
  Expr() = default;

  // Throws SchemaError on malformed input or unknown identifiers.
  static Expr parse(const std::string& text, int n_vars);

  double eval(const double* x) const;
  const std::string& text() const { return text_; }
  bool empty() const { return prog_.empty(); }

 private:
  enum class Code : std::uint8_t {
    PushConst,
    PushVar,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Call,
  };
  struct Op {
    Code code;
    double value = 0.0;  // PushConst
    int index = 0;       // PushVar: variable slot; Call: function id
  };

  std::vector<Op> prog_;
  int max_depth_ = 0;
  std::string text_;

  friend class Parser;
};

}  // namespace metalab::expr
