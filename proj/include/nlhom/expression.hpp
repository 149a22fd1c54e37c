#pragma once

// Small arithmetic expression language used by the configuration file.
//
// Grammar (usual precedence, ^ binds tighter than unary minus and is
// right-associative):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'pi' | variable | func '(' expr ')' | '(' expr ')'
// Variables: z1..z3, zp1..zp3, x1..x3, xi1..xi3, r.
// Functions: sin, cos, exp, sqrt, abs.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nlhom/errors.hpp"

namespace nlhom {

enum class Variable : std::uint8_t {
  z1, z2, z3, zp1, zp2, zp3, x1, x2, x3, xi1, xi2, xi3, r, count
};

using VariableMask = std::uint32_t;
inline constexpr VariableMask kAllVariables = (1u << static_cast<unsigned>(Variable::count)) - 1;
inline constexpr VariableMask kCoefficientVariables = 0x3F;           // z, zp
inline constexpr VariableMask kPositionVariables = 0x1C0;             // x
inline constexpr VariableMask kKernelVariables = 0x1E00;              // xi, r

/// Values bound to the variables during evaluation; unused slots are ignored.
struct Bindings {
  std::array<double, static_cast<std::size_t>(Variable::count)> values{};
  double& operator[](Variable v) { return values[static_cast<std::size_t>(v)]; }
  double operator[](Variable v) const { return values[static_cast<std::size_t>(v)]; }
};

/// Parse or evaluation failure. `offset`/`length` locate the problem in the source.
class ExpressionError : public ConfigError {
 public:
  ExpressionError(std::string field, const std::string& what, std::size_t offset,
                  std::size_t length)
      : ConfigError(std::move(field), what), offset_(offset), length_(length) {}
  std::size_t offset() const noexcept { return offset_; }
  std::size_t length() const noexcept { return length_; }

 private:
  std::size_t offset_;
  std::size_t length_;
};

class Expression {
 public:
  /// Throws ExpressionError on syntax errors and on identifiers not in `allowed`.
  static Expression parse(std::string_view text, VariableMask allowed = kAllVariables,
                          std::string field = {});

  /// Throws ExpressionError on division by zero or sqrt of a negative number.
  double evaluate(const Bindings& vars) const;

  const std::string& source() const noexcept { return source_; }
  VariableMask variables_used() const noexcept { return used_; }

 private:
  enum class Op : std::uint8_t {
    constant, variable, neg, add, sub, mul, div, pow, sin, cos, exp, sqrt, abs
  };
  struct Instr {
    Op op;
    std::uint8_t var = 0;
    double value = 0.0;
    std::uint32_t offset = 0;
    std::uint32_t length = 0;
  };
  friend class ExpressionParser;

  std::string source_;
  std::string field_;
  std::vector<Instr> program_;  // postfix
  std::size_t max_stack_ = 0;
  VariableMask used_ = 0;
};

}  // namespace nlhom
