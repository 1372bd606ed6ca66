#include "metalab/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include "metalab/errors.hpp"

namespace metalab::expr {

namespace {

using Fn = double (*)(double);

struct NamedFn {
  const char* name;
  Fn fn;
};

constexpr NamedFn kFunctions[] = {
    {"sin", std::sin},   {"cos", std::cos},   {"tan", std::tan},
    {"exp", std::exp},   {"log", std::log},   {"sqrt", std::sqrt},
    {"tanh", std::tanh}, {"abs", std::fabs},  {"atan", std::atan},
};

int function_id(const std::string& name) {
  for (int i = 0; i < static_cast<int>(std::size(kFunctions)); ++i) {
    if (name == kFunctions[i].name) return i;
  }
  return -1;
}

}  // namespace

class Parser {
 public:
  Parser(const std::string& text, int n_vars) : text_(text), n_vars_(n_vars) {}

  Expr run() {
    Expr e;
    e.text_ = text_;
    prog_ = &e.prog_;
    parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input");
    if (depth_now_ != 1) fail("internal stack imbalance");
    if (max_depth_ > 63) fail("expression too deep");
    e.max_depth_ = max_depth_;
    return e;
  }

 private:
  const std::string& text_;
  int n_vars_;
  std::size_t pos_ = 0;
  std::vector<Expr::Op>* prog_ = nullptr;
  int depth_now_ = 0;
  int max_depth_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw SchemaError("expression \"" + text_ + "\": " + what + " at offset " +
                      std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  void emit(Expr::Code code, double value = 0.0, int index = 0) {
    prog_->push_back({code, value, index});
    switch (code) {
      case Expr::Code::PushConst:
      case Expr::Code::PushVar:
        ++depth_now_;
        break;
      case Expr::Code::Neg:
      case Expr::Code::Call:
        break;
      default:
        --depth_now_;  // binary ops pop two, push one
    }
    if (depth_now_ > max_depth_) max_depth_ = depth_now_;
  }

  void parse_expr() {
    parse_term();
    while (true) {
      if (eat('+')) {
        parse_term();
        emit(Expr::Code::Add);
      } else if (eat('-')) {
        parse_term();
        emit(Expr::Code::Sub);
      } else {
        return;
      }
    }
  }

  void parse_term() {
    parse_factor();
    while (true) {
      if (eat('*')) {
        parse_factor();
        emit(Expr::Code::Mul);
      } else if (eat('/')) {
        parse_factor();
        emit(Expr::Code::Div);
      } else {
        return;
      }
    }
  }

  // '^' binds tighter than unary minus and is right associative:
  // -x^2 = -(x^2), x^2^3 = x^(2^3), x^-2 is allowed.
  void parse_factor() {
    if (eat('-')) {
      parse_factor();
      emit(Expr::Code::Neg);
      return;
    }
    parse_power();
  }

  void parse_power() {
    parse_primary();
    if (eat('^')) {
      parse_factor();
      emit(Expr::Code::Pow);
    }
  }

  void parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = text_.c_str() + pos_;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) fail("bad numeric literal");
      pos_ += static_cast<std::size_t>(end - begin);
      emit(Expr::Code::PushConst, v);
      return;
    }
    if (c == '(') {
      ++pos_;
      parse_expr();
      if (!eat(')')) fail("missing ')'");
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      std::string name = text_.substr(start, pos_ - start);
      if (name == "pi") {
        emit(Expr::Code::PushConst, M_PI);
        return;
      }
      if (name.size() >= 2 && name[0] == 'x') {
        char* end = nullptr;
        long idx = std::strtol(name.c_str() + 1, &end, 10);
        if (*end == '\0') {
          if (idx < 1 || idx > n_vars_) fail("variable " + name + " out of range");
          emit(Expr::Code::PushVar, 0.0, static_cast<int>(idx - 1));
          return;
        }
      }
      int fid = function_id(name);
      if (fid >= 0) {
        if (!eat('(')) fail("expected '(' after function " + name);
        parse_expr();
        if (!eat(')')) fail("missing ')'");
        emit(Expr::Code::Call, 0.0, fid);
        return;
      }
      fail("unknown identifier " + name);
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

Expr Expr::parse(const std::string& text, int n_vars) {
  return Parser(text, n_vars).run();
}

double Expr::eval(const double* x) const {
  double stack[64];
  double* sp = stack;
  for (const Op& op : prog_) {
    switch (op.code) {
      case Code::PushConst:
        *sp++ = op.value;
        break;
      case Code::PushVar:
        *sp++ = x[op.index];
        break;
      case Code::Add:
        sp[-2] += sp[-1];
        --sp;
        break;
      case Code::Sub:
        sp[-2] -= sp[-1];
        --sp;
        break;
      case Code::Mul:
        sp[-2] *= sp[-1];
        --sp;
        break;
      case Code::Div:
        sp[-2] /= sp[-1];
        --sp;
        break;
      case Code::Pow:
        sp[-2] = std::pow(sp[-2], sp[-1]);
        --sp;
        break;
      case Code::Neg:
        sp[-1] = -sp[-1];
        break;
      case Code::Call:
        sp[-1] = kFunctions[op.index].fn(sp[-1]);
        break;
    }
  }
  return sp[-1];
}

}  // namespace metalab::expr
