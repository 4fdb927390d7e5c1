#include "attnlab/numerics.hpp"

#include <mpfr.h>

#include <algorithm>
#include <cctype>
#include <sstream>

#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

// RAII wrapper over an mpfr_t.
class Mpfr {
 public:
  explicit Mpfr(mpfr_prec_t prec) { mpfr_init2(v_, prec); }
  ~Mpfr() { mpfr_clear(v_); }
  Mpfr(const Mpfr&) = delete;
  Mpfr& operator=(const Mpfr&) = delete;
  mpfr_ptr get() { return v_; }
  mpfr_srcptr get() const { return v_; }

 private:
  mpfr_t v_;
};

Rational mpfr_to_rational(mpfr_srcptr x) {
  if (mpfr_zero_p(x)) return Rational(0);
  BigInt mant;
  mpfr_exp_t exp = mpfr_get_z_2exp(mant.get_mpz_t(), x);
  Rational r(mant);
  if (exp >= 0) {
    mpz_mul_2exp(r.get_num_mpz_t(), r.get_num_mpz_t(), static_cast<mp_bitcnt_t>(exp));
  } else {
    mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), static_cast<mp_bitcnt_t>(-exp));
  }
  r.canonicalize();
  return r;
}

void set_mpfr(mpfr_ptr dst, const Rational& x) {
  mpfr_set_q(dst, x.get_mpq_t(), MPFR_RNDN);
}

// Divides value by 2^shift, rounding to nearest with ties to even.
BigInt shift_round_even(const BigInt& value, unsigned shift) {
  if (shift == 0) return value;
  BigInt q;
  BigInt r;
  mpz_fdiv_q_2exp(q.get_mpz_t(), value.get_mpz_t(), shift);
  mpz_fdiv_r_2exp(r.get_mpz_t(), value.get_mpz_t(), shift);
  // r in [0, 2^shift); compare against half.
  BigInt half;
  mpz_setbit(half.get_mpz_t(), shift - 1);
  int c = cmp(r, half);
  if (c > 0 || (c == 0 && mpz_odd_p(q.get_mpz_t()))) q += 1;
  return q;
}

PBitNumber saturate(const BigInt& k, const PrecisionConfig& cfg) {
  const BigInt max = to_big(cfg.max_mantissa());
  if (k > max) return PBitNumber(cfg.max_mantissa(), cfg);
  if (k < -max) return PBitNumber(-cfg.max_mantissa(), cfg);
  return PBitNumber(to_int128(k), cfg);
}

}  // namespace

void PrecisionConfig::validate() const {
  if (!valid()) {
    throw PrecisionError("invalid precision config " + to_string(*this) +
                         ": need 2 <= p <= 128 and 0 <= frac_bits < p");
  }
}

bool PrecisionConfig::valid() const noexcept {
  return total_bits >= 2 && total_bits <= kMaxTotalBits && frac_bits >= 0 &&
         frac_bits < total_bits;
}

Int128 PrecisionConfig::max_mantissa() const {
  return (Int128(1) << (total_bits - 1)) - 1;
}

Rational PrecisionConfig::max_value() const {
  Rational r(to_big(max_mantissa()));
  mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), frac_bits);
  r.canonicalize();
  return r;
}

Rational PrecisionConfig::resolution() const {
  Rational r(1);
  mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), frac_bits);
  return r;
}

std::string to_string(const PrecisionConfig& cfg) {
  return "{p=" + std::to_string(cfg.total_bits) + ", frac_bits=" + std::to_string(cfg.frac_bits) +
         "}";
}

PBitNumber::PBitNumber(Int128 mantissa, const PrecisionConfig& cfg) : mantissa_(mantissa), cfg_(cfg) {
  cfg.validate();
  const Int128 max = cfg.max_mantissa();
  if (mantissa > max || mantissa < -max) {
    throw PrecisionError("mantissa outside the " + std::to_string(cfg.total_bits) + "-bit grid");
  }
}

PBitNumber PBitNumber::from_int(std::int64_t v, const PrecisionConfig& cfg) {
  return quantize(Rational(static_cast<long>(v)), cfg);
}

BigInt PBitNumber::mantissa_big() const { return to_big(mantissa_); }

Rational PBitNumber::value() const {
  Rational r(to_big(mantissa_));
  mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), cfg_.frac_bits);
  r.canonicalize();
  return r;
}

bool PBitNumber::saturated() const {
  const Int128 max = cfg_.max_mantissa();
  return mantissa_ == max || mantissa_ == -max;
}

std::string PBitNumber::to_decimal() const { return attnlab::to_decimal(value()); }

double PBitNumber::to_double() const { return value().get_d(); }

std::strong_ordering operator<=>(const PBitNumber& a, const PBitNumber& b) {
  if (a.cfg_.frac_bits == b.cfg_.frac_bits) return a.mantissa_ <=> b.mantissa_;
  const int c = cmp(a.value(), b.value());
  if (c < 0) return std::strong_ordering::less;
  if (c > 0) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

PBitNumber quantize(const Rational& x, const PrecisionConfig& cfg) {
  cfg.validate();
  // t = x * 2^s = num * 2^s / den; round t to nearest, ties to even.
  BigInt scaled;
  mpz_mul_2exp(scaled.get_mpz_t(), x.get_num_mpz_t(), cfg.frac_bits);
  const BigInt& den = x.get_den();
  BigInt q;
  BigInt r;
  mpz_fdiv_qr(q.get_mpz_t(), r.get_mpz_t(), scaled.get_mpz_t(), den.get_mpz_t());
  const int c = cmp(BigInt(2 * r), den);
  if (c > 0 || (c == 0 && mpz_odd_p(q.get_mpz_t()))) q += 1;
  return saturate(q, cfg);
}

PBitNumber quantize_scaled(const BigInt& value, int shift, const PrecisionConfig& cfg) {
  cfg.validate();
  if (shift <= cfg.frac_bits) {
    BigInt k;
    mpz_mul_2exp(k.get_mpz_t(), value.get_mpz_t(), cfg.frac_bits - shift);
    return saturate(k, cfg);
  }
  return saturate(shift_round_even(value, static_cast<unsigned>(shift - cfg.frac_bits)), cfg);
}

PVec quantize(std::span<const Rational> xs, const PrecisionConfig& cfg) {
  PVec out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(quantize(x, cfg));
  return out;
}

PBitNumber requantize(const PBitNumber& x, const PrecisionConfig& cfg) {
  return quantize_scaled(x.mantissa_big(), x.config().frac_bits, cfg);
}

Rational exact_dot(std::span<const PBitNumber> a, std::span<const PBitNumber> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot product of vectors with lengths " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  }
  // Bring every product to the common scale 2^-(max frac_a + max frac_b).
  int sa = 0;
  int sb = 0;
  for (const auto& x : a) sa = std::max(sa, x.config().frac_bits);
  for (const auto& x : b) sb = std::max(sb, x.config().frac_bits);
  BigInt acc = 0;
  BigInt term;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].is_zero() || b[i].is_zero()) continue;
    term = a[i].mantissa_big() * b[i].mantissa_big();
    const int extra = (sa - a[i].config().frac_bits) + (sb - b[i].config().frac_bits);
    if (extra > 0) mpz_mul_2exp(term.get_mpz_t(), term.get_mpz_t(), extra);
    acc += term;
  }
  Rational r(acc);
  mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), sa + sb);
  r.canonicalize();
  return r;
}

Rational exact_dot(std::span<const Rational> a, std::span<const Rational> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot product of vectors with lengths " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  }
  Rational acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

PBitNumber qdot(std::span<const PBitNumber> a, std::span<const PBitNumber> b,
                const PrecisionConfig& cfg) {
  if (a.size() != b.size()) {
    throw DimensionError("qdot of vectors with lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  int sa = 0;
  int sb = 0;
  for (const auto& x : a) sa = std::max(sa, x.config().frac_bits);
  for (const auto& x : b) sb = std::max(sb, x.config().frac_bits);
  BigInt acc = 0;
  BigInt term;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].is_zero() || b[i].is_zero()) continue;
    term = a[i].mantissa_big() * b[i].mantissa_big();
    const int extra = (sa - a[i].config().frac_bits) + (sb - b[i].config().frac_bits);
    if (extra > 0) mpz_mul_2exp(term.get_mpz_t(), term.get_mpz_t(), extra);
    acc += term;
  }
  return quantize_scaled(acc, sa + sb, cfg);
}

RVec values(std::span<const PBitNumber> xs) {
  RVec out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(x.value());
  return out;
}

Rational exp_rounded(const Rational& x, int significand_bits) {
  if (significand_bits < 2) throw PrecisionError("exp needs at least 2 significand bits");
  // Enough input precision to hold any p-bit dyadic exactly.
  const auto in_bits = static_cast<mpfr_prec_t>(
      std::max<std::size_t>(mpz_sizeinbase(x.get_num_mpz_t(), 2) + 8, 64));
  Mpfr in(in_bits);
  set_mpfr(in.get(), x);
  Mpfr out(significand_bits);
  mpfr_exp(out.get(), in.get(), MPFR_RNDN);
  if (mpfr_inf_p(out.get())) throw PrecisionError("exp overflow");
  return mpfr_to_rational(out.get());
}

Rational ln_squared_rounded_up(std::uint64_t n, const PrecisionConfig& cfg) {
  Mpfr v(256);
  mpfr_set_ui(v.get(), static_cast<unsigned long>(n), MPFR_RNDN);
  mpfr_log(v.get(), v.get(), MPFR_RNDU);
  mpfr_sqr(v.get(), v.get(), MPFR_RNDU);
  // ceil(v * 2^s) / 2^s
  mpfr_mul_2si(v.get(), v.get(), cfg.frac_bits, MPFR_RNDU);
  mpfr_ceil(v.get(), v.get());
  BigInt k;
  mpfr_get_z(k.get_mpz_t(), v.get(), MPFR_RNDU);
  Rational r(k);
  mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), cfg.frac_bits);
  r.canonicalize();
  return r;
}

std::string to_decimal(const Rational& x) {
  const BigInt& den = x.get_den();
  // Dyadic: den is a power of two.
  if (mpz_popcount(den.get_mpz_t()) != 1) return x.get_str();
  const std::size_t shift = mpz_sizeinbase(den.get_mpz_t(), 2) - 1;
  if (shift == 0) return x.get_num().get_str();
  // x = num / 2^shift = num * 5^shift / 10^shift
  BigInt scaled = x.get_num();
  BigInt five;
  mpz_ui_pow_ui(five.get_mpz_t(), 5, shift);
  scaled *= five;
  const bool negative = scaled < 0;
  if (negative) scaled = -scaled;
  std::string digits = scaled.get_str();
  if (digits.size() <= shift) digits.insert(0, shift - digits.size() + 1, '0');
  std::string out = digits.substr(0, digits.size() - shift) + "." + digits.substr(digits.size() - shift);
  while (out.back() == '0') out.pop_back();
  if (out.back() == '.') out.pop_back();
  return negative ? "-" + out : out;
}

Rational parse_rational(const std::string& text) {
  if (text.empty()) throw ValidationError("empty number");
  if (text.find('/') != std::string::npos) {
    Rational r;
    if (r.set_str(text, 10) != 0 || r.get_den() == 0) {
      throw ValidationError("malformed rational '" + text + "'");
    }
    r.canonicalize();
    return r;
  }
  std::size_t pos = 0;
  bool negative = false;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    pos = 1;
  }
  std::string int_part;
  std::string frac_part;
  bool seen_point = false;
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c == '.' && !seen_point) {
      seen_point = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      (seen_point ? frac_part : int_part) += c;
    } else {
      throw ValidationError("malformed decimal '" + text + "'");
    }
  }
  if (int_part.empty() && frac_part.empty()) throw ValidationError("malformed decimal '" + text + "'");
  const BigInt num(int_part + frac_part, 10);
  BigInt den;
  mpz_ui_pow_ui(den.get_mpz_t(), 10, frac_part.size());
  Rational r(negative ? BigInt(-num) : num, den);
  r.canonicalize();
  return r;
}

BigInt to_big(Int128 v) {
  const bool negative = v < 0;
  unsigned __int128 u = negative ? static_cast<unsigned __int128>(-(v + 1)) + 1
                                 : static_cast<unsigned __int128>(v);
  const auto hi = static_cast<unsigned long>(u >> 64);
  const auto lo = static_cast<unsigned long>(u & 0xFFFFFFFFFFFFFFFFull);
  BigInt out = hi;
  mpz_mul_2exp(out.get_mpz_t(), out.get_mpz_t(), 64);
  out += lo;
  return negative ? BigInt(-out) : out;
}

Int128 to_int128(const BigInt& v) {
  if (mpz_sizeinbase(v.get_mpz_t(), 2) > 127) throw PrecisionError("value exceeds 127 bits");
  BigInt a = abs(v);
  BigInt hi;
  BigInt lo;
  mpz_fdiv_q_2exp(hi.get_mpz_t(), a.get_mpz_t(), 64);
  mpz_fdiv_r_2exp(lo.get_mpz_t(), a.get_mpz_t(), 64);
  unsigned __int128 u = (static_cast<unsigned __int128>(mpz_get_ui(hi.get_mpz_t())) << 64) |
                        mpz_get_ui(lo.get_mpz_t());
  const auto s = static_cast<Int128>(u);
  return v < 0 ? -s : s;
}

BigNat pow_big(const BigNat& base, unsigned long exponent) {
  BigNat out;
  mpz_pow_ui(out.get_mpz_t(), base.get_mpz_t(), exponent);
  return out;
}

BigNat pow_big(const BigNat& base, const BigNat& exponent) {
  if (!exponent.fits_ulong_p()) throw ResourceError("exponent too large for exact evaluation");
  return pow_big(base, exponent.get_ui());
}

BigNat isqrt(const BigNat& x) {
  BigNat out;
  mpz_sqrt(out.get_mpz_t(), x.get_mpz_t());
  return out;
}

std::size_t floor_log2(const BigNat& x) {
  if (x <= 0) throw ValidationError("log2 of non-positive value");
  return mpz_sizeinbase(x.get_mpz_t(), 2) - 1;
}

std::size_t ceil_log2(const BigNat& x) {
  const std::size_t f = floor_log2(x);
  return mpz_popcount(x.get_mpz_t()) == 1 ? f : f + 1;
}

int ceil_log2(std::uint64_t x) {
  if (x == 0) throw ValidationError("log2 of zero");
  int bits = 0;
  while ((std::uint64_t{1} << bits) < x) ++bits;
  return bits;
}

BigNat binomial(unsigned long n, unsigned long k) {
  BigNat out;
  mpz_bin_uiui(out.get_mpz_t(), n, k);
  return out;
}

}  // namespace attnlab
