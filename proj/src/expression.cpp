#include "nlhom/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace nlhom {

class ExpressionParser {
 public:
  ExpressionParser(Expression& out, VariableMask allowed)
      : out_(out), text_(out.source_), allowed_(allowed) {}

  void run() {
    parse_expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'", pos_, 1);
    std::size_t depth = 0;
    for (const auto& ins : out_.program_) {
      switch (ins.op) {
        case Expression::Op::constant:
        case Expression::Op::variable:
          ++depth;
          break;
        case Expression::Op::add:
        case Expression::Op::sub:
        case Expression::Op::mul:
        case Expression::Op::div:
        case Expression::Op::pow:
          --depth;
          break;
        default:
          break;
      }
      out_.max_stack_ = std::max(out_.max_stack_, depth);
    }
  }

 private:
  using Op = Expression::Op;

  [[noreturn]] void fail(const std::string& what, std::size_t offset, std::size_t length) const {
    throw ExpressionError(out_.field_,
                          "expression error at offset " + std::to_string(offset) + ": " + what +
                              " in \"" + text_ + "\"",
                          offset, length);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void emit(Op op, std::size_t offset, std::size_t length, double value = 0.0,
            std::uint8_t var = 0) {
    out_.program_.push_back({op, var, value, static_cast<std::uint32_t>(offset),
                             static_cast<std::uint32_t>(length)});
  }

  void parse_expr() {
    parse_term();
    for (;;) {
      skip_space();
      const std::size_t at = pos_;
      if (accept('+')) {
        parse_term();
        emit(Op::add, at, 1);
      } else if (accept('-')) {
        parse_term();
        emit(Op::sub, at, 1);
      } else {
        return;
      }
    }
  }

  void parse_term() {
    parse_unary();
    for (;;) {
      skip_space();
      const std::size_t at = pos_;
      if (accept('*')) {
        parse_unary();
        emit(Op::mul, at, 1);
      } else if (accept('/')) {
        parse_unary();
        emit(Op::div, at, 1);
      } else {
        return;
      }
    }
  }

  void parse_unary() {
    skip_space();
    const std::size_t at = pos_;
    if (accept('-')) {
      parse_unary();
      emit(Op::neg, at, 1);
    } else if (accept('+')) {
      parse_unary();
    } else {
      parse_power();
    }
  }

  void parse_power() {
    parse_primary();
    skip_space();
    const std::size_t at = pos_;
    if (accept('^')) {
      parse_unary();
      emit(Op::pow, at, 1);
    }
  }

  void parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression", pos_, 0);
    const std::size_t start = pos_;
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      parse_expr();
      if (!accept(')')) fail("unclosed parenthesis", start, 1);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = text_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("malformed number", start, 1);
      pos_ += static_cast<std::size_t>(end - begin);
      emit(Op::constant, start, pos_ - start, v);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string name = text_.substr(start, pos_ - start);
      const std::size_t len = pos_ - start;
      if (name == "pi") {
        emit(Op::constant, start, len, std::numbers::pi);
        return;
      }
      static constexpr std::pair<const char*, Op> functions[] = {
          {"sin", Op::sin}, {"cos", Op::cos}, {"exp", Op::exp}, {"sqrt", Op::sqrt}, {"abs", Op::abs}};
      for (const auto& [fname, op] : functions) {
        if (name == fname) {
          const std::size_t open = pos_;
          if (!accept('(')) fail("expected '(' after " + name, open, 1);
          const std::size_t paren = pos_ - 1;
          parse_expr();
          if (!accept(')')) fail("unclosed parenthesis", paren, 1);
          emit(op, start, len);
          return;
        }
      }
      static constexpr const char* names[] = {"z1",  "z2",  "z3",  "zp1", "zp2", "zp3", "x1",
                                              "x2",  "x3",  "xi1", "xi2", "xi3", "r"};
      for (unsigned v = 0; v < static_cast<unsigned>(Variable::count); ++v) {
        if (name == names[v]) {
          if (!(allowed_ & (1u << v))) fail("variable '" + name + "' not allowed here", start, len);
          out_.used_ |= 1u << v;
          emit(Op::variable, start, len, 0.0, static_cast<std::uint8_t>(v));
          return;
        }
      }
      fail("unknown identifier '" + name + "'", start, len);
    }
    fail("unexpected '" + std::string(1, c) + "'", start, 1);
  }

  Expression& out_;
  const std::string& text_;
  VariableMask allowed_;
  std::size_t pos_ = 0;
};

Expression Expression::parse(std::string_view text, VariableMask allowed, std::string field) {
  Expression e;
  e.source_ = std::string(text);
  e.field_ = std::move(field);
  ExpressionParser(e, allowed).run();
  return e;
}

double Expression::evaluate(const Bindings& vars) const {
  constexpr std::size_t kInline = 32;
  double inline_stack[kInline] = {};
  std::vector<double> heap;
  double* stack = inline_stack;
  if (max_stack_ > kInline) {
    heap.resize(max_stack_);
    stack = heap.data();
  }
  std::size_t top = 0;
  auto raise = [&](const Instr& ins, const std::string& what) {
    throw ExpressionError(field_,
                          "expression error at offset " + std::to_string(ins.offset) + ": " +
                              what + " in \"" + source_ + "\"",
                          ins.offset, ins.length);
  };
  for (const Instr& ins : program_) {
    switch (ins.op) {
      case Op::constant:
        stack[top++] = ins.value;
        break;
      case Op::variable:
        stack[top++] = vars.values[ins.var];
        break;
      case Op::neg:
        stack[top - 1] = -stack[top - 1];
        break;
      case Op::add:
        --top;
        stack[top - 1] += stack[top];
        break;
      case Op::sub:
        --top;
        stack[top - 1] -= stack[top];
        break;
      case Op::mul:
        --top;
        stack[top - 1] *= stack[top];
        break;
      case Op::div:
        --top;
        if (stack[top] == 0.0) raise(ins, "division by zero");
        stack[top - 1] /= stack[top];
        break;
      case Op::pow:
        --top;
        stack[top - 1] = std::pow(stack[top - 1], stack[top]);
        break;
      case Op::sin:
        stack[top - 1] = std::sin(stack[top - 1]);
        break;
      case Op::cos:
        stack[top - 1] = std::cos(stack[top - 1]);
        break;
      case Op::exp:
        stack[top - 1] = std::exp(stack[top - 1]);
        break;
      case Op::sqrt:
        if (stack[top - 1] < 0.0) raise(ins, "sqrt of negative value");
        stack[top - 1] = std::sqrt(stack[top - 1]);
        break;
      case Op::abs:
        stack[top - 1] = std::abs(stack[top - 1]);
        break;
    }
  }
  return stack[0];
}

}  // namespace nlhom
