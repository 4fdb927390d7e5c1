#include "attnlab/formula.hpp"

#include <cctype>

#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

class Parser {
 public:
  Parser(const std::string& text, const std::map<std::string, Rational>& env) : text_(text), env_(env) {}

  Rational parse() {
    Rational v = sum();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("formula '" + text_ + "': " + what + " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Rational sum() {
    Rational v = product();
    for (;;) {
      if (accept('+')) {
        v += product();
      } else if (accept('-')) {
        v -= product();
      } else {
        return v;
      }
    }
  }

  Rational product() {
    Rational v = unary();
    for (;;) {
      if (accept('*')) {
        v *= unary();
      } else if (accept('/')) {
        Rational d = unary();
        if (d == 0) fail("division by zero");
        v /= d;
      } else {
        return v;
      }
    }
  }

  Rational unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Rational power() {
    Rational base = atom();
    if (!accept('^')) return base;
    Rational exponent = unary();  // right associative, allows 8^-2
    if (exponent.get_den() != 1) fail("non-integer exponent");
    const BigInt e = exponent.get_num();
    const BigInt mag = abs(e);
    if (!mag.fits_ulong_p() || mag > BigInt(1) << 26) throw ResourceError("exponent too large in '" + text_ + "'");
    Rational out;
    mpz_pow_ui(out.get_num_mpz_t(), base.get_num_mpz_t(), mag.get_ui());
    mpz_pow_ui(out.get_den_mpz_t(), base.get_den_mpz_t(), mag.get_ui());
    out.canonicalize();
    if (e < 0) {
      if (out == 0) fail("zero to a negative power");
      out = 1 / out;
    }
    return out;
  }

  Rational atom() {
    skip_ws();
    if (accept('(')) {
      Rational v = sum();
      if (!accept(')')) fail("expected ')'");
      return v;
    }
    if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      return Rational(BigInt(text_.substr(start, pos_ - start), 10));
    }
    if (pos_ < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      const std::string name = text_.substr(start, pos_ - start);
      if (accept('(')) {
        Rational arg = sum();
        if (!accept(')')) fail("expected ')'");
        return call(name, arg);
      }
      const auto it = env_.find(name);
      if (it == env_.end()) fail("unknown identifier '" + name + "'");
      return it->second;
    }
    fail("expected a number, identifier or '('");
  }

  Rational call(const std::string& name, const Rational& arg) {
    if (arg.get_den() != 1 || arg < 0) fail(name + " needs a non-negative integer");
    if (name == "isqrt") return Rational(isqrt(arg.get_num()));
    if (name == "log2floor") return Rational(static_cast<unsigned long>(floor_log2(arg.get_num())));
    fail("unknown function '" + name + "'");
  }

  const std::string& text_;
  const std::map<std::string, Rational>& env_;
  std::size_t pos_ = 0;
};

}  // namespace

const Rational& FormulaEvaluator::get(const std::string& name) const {
  const auto it = env_.find(name);
  if (it == env_.end()) throw ValidationError("unknown identifier '" + name + "'");
  return it->second;
}

Rational FormulaEvaluator::eval(const std::string& expression) const {
  return Parser(expression, env_).parse();
}

}  // namespace attnlab
