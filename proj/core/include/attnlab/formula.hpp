#pragma once

#include <map>
#include <string>

#include "attnlab/numerics.hpp"

namespace attnlab {

// Small exact-arithmetic expression evaluator over rationals.
//
// Grammar: sums and products of numbers, identifiers ([A-Za-z_][A-Za-z0-9_]*),
// parentheses, right-associative '^' with an integer exponent (negative
// exponents give reciprocals) and the functions isqrt(x) and log2floor(x).
// Used as a second derivation path for the parameter calculus.
class FormulaEvaluator {
 public:
  void set(const std::string& name, const Rational& value) { env_[name] = value; }
  const Rational& get(const std::string& name) const;
  bool has(const std::string& name) const { return env_.count(name) != 0; }

  // Throws ValidationError on syntax errors or unknown identifiers and
  // ResourceError when an exponent is too large to evaluate exactly.
  Rational eval(const std::string& expression) const;

 private:
  std::map<std::string, Rational> env_;
};

}  // namespace attnlab
