#pragma once

// Fixed-precision numbers and the exact arithmetic that backs them.
//
// Every value stored in a token, a weight matrix or a protocol message is a
// PBitNumber: a signed fixed-point number k * 2^-s with |k| < 2^(p-1).
// Intermediate results (dot products, softmax sums, recurrent states) are kept
// as exact rationals and rounded once, with ties going to the even mantissa.

#include <gmpxx.h>

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace attnlab {

using BigNat = mpz_class;
using BigInt = mpz_class;
using Rational = mpq_class;
using Int128 = __int128;

enum class Rounding { kNearestTiesEven };

struct PrecisionConfig {
  int total_bits = 16;  // p
  int frac_bits = 8;    // s
  Rounding rounding = Rounding::kNearestTiesEven;

  static constexpr int kMaxTotalBits = 128;

  // Throws PrecisionError unless 2 <= p <= 128 and 0 <= s < p.
  void validate() const;
  bool valid() const noexcept;

  // Largest admissible mantissa, 2^(p-1) - 1.
  Int128 max_mantissa() const;
  Rational max_value() const;
  Rational resolution() const;
  int integer_bits() const { return total_bits - frac_bits; }

  friend bool operator==(const PrecisionConfig&, const PrecisionConfig&) = default;
};

std::string to_string(const PrecisionConfig& cfg);

class PBitNumber {
 public:
  PBitNumber() = default;
  // Throws PrecisionError if the mantissa is outside the representable range.
  PBitNumber(Int128 mantissa, const PrecisionConfig& cfg);

  static PBitNumber zero(const PrecisionConfig& cfg) { return PBitNumber(0, cfg); }
  static PBitNumber from_int(std::int64_t v, const PrecisionConfig& cfg);

  Int128 mantissa() const { return mantissa_; }
  const PrecisionConfig& config() const { return cfg_; }
  Rational value() const;
  BigInt mantissa_big() const;
  bool is_zero() const { return mantissa_ == 0; }
  bool saturated() const;

  std::string to_decimal() const;
  double to_double() const;

  friend bool operator==(const PBitNumber& a, const PBitNumber& b) {
    return a.mantissa_ == b.mantissa_ && a.cfg_ == b.cfg_;
  }
  // Orders by value; meaningful across configs as well.
  friend std::strong_ordering operator<=>(const PBitNumber& a, const PBitNumber& b);

 private:
  Int128 mantissa_ = 0;
  PrecisionConfig cfg_{};
};

using PVec = std::vector<PBitNumber>;
using RVec = std::vector<Rational>;

// Nearest grid point, ties to even mantissa, saturating at +-(2^(p-1)-1)*2^-s.
PBitNumber quantize(const Rational& x, const PrecisionConfig& cfg);
// Quantizes value * 2^-shift without building a rational.
PBitNumber quantize_scaled(const BigInt& value, int shift, const PrecisionConfig& cfg);
PVec quantize(std::span<const Rational> xs, const PrecisionConfig& cfg);
// Re-grids a number from another config (single rounding).
PBitNumber requantize(const PBitNumber& x, const PrecisionConfig& cfg);

// Exact inner product. Throws DimensionError on a length mismatch.
Rational exact_dot(std::span<const PBitNumber> a, std::span<const PBitNumber> b);
Rational exact_dot(std::span<const Rational> a, std::span<const Rational> b);
// Exact accumulation, one final rounding into cfg.
PBitNumber qdot(std::span<const PBitNumber> a, std::span<const PBitNumber> b,
                const PrecisionConfig& cfg);

RVec values(std::span<const PBitNumber> xs);

// exp(x) rounded to nearest with a significand of `significand_bits` bits.
// The result is an exact dyadic rational; deterministic across platforms.
Rational exp_rounded(const Rational& x, int significand_bits);
// Natural-log based helpers for the retrieval analysis.
Rational ln_squared_rounded_up(std::uint64_t n, const PrecisionConfig& cfg);

// Exact decimal rendering of a dyadic rational; other rationals are rendered
// as "num/den".
std::string to_decimal(const Rational& x);
// Parses "-12.375", "7", "3/8". Throws ValidationError on malformed input.
Rational parse_rational(const std::string& text);

BigInt to_big(Int128 v);
Int128 to_int128(const BigInt& v);  // throws PrecisionError if out of range

BigNat pow_big(const BigNat& base, unsigned long exponent);
BigNat pow_big(const BigNat& base, const BigNat& exponent);  // exponent must fit in ulong
BigNat isqrt(const BigNat& x);
// floor(log2 x) for x >= 1.
std::size_t floor_log2(const BigNat& x);
std::size_t ceil_log2(const BigNat& x);
int ceil_log2(std::uint64_t x);
BigNat binomial(unsigned long n, unsigned long k);

}  // namespace attnlab

namespace attnlab {

// A token is one position of the residual stream, width d*H.
using Token = PVec;
using Sequence = std::vector<Token>;

}  // namespace attnlab
