#include "attnlab/bitstring.hpp"

#include "attnlab/errors.hpp"

namespace attnlab {

BitString BitString::from_string(const std::string& zeros_and_ones) {
  BitString out;
  for (char c : zeros_and_ones) {
    if (c != '0' && c != '1') throw ValidationError("bit string may contain only 0 and 1");
    out.push_back(c == '1');
  }
  return out;
}

BitString BitString::from_hex(const std::string& hex, std::size_t n_bits) {
  if (hex.size() * 4 < n_bits) throw ValidationError("hex payload shorter than bit length");
  BitString out;
  for (char c : hex) {
    int v = 0;
    if (c >= '0' && c <= '9') {
      v = c - '0';
    } else if (c >= 'a' && c <= 'f') {
      v = c - 'a' + 10;
    } else if (c >= 'A' && c <= 'F') {
      v = c - 'A' + 10;
    } else {
      throw ValidationError("bad hex digit");
    }
    out.append_uint(static_cast<std::uint64_t>(v), 4);
  }
  out.bits_.resize(n_bits);
  return out;
}

void BitString::append(const BitString& other) {
  bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
}

void BitString::append_uint(std::uint64_t v, int width) {
  for (int i = width - 1; i >= 0; --i) bits_.push_back(i < 64 && ((v >> i) & 1u));
}

void BitString::append_int(const BigInt& v, int width) {
  if (width <= 0) throw PrecisionError("field width must be positive");
  BigInt lim;
  mpz_setbit(lim.get_mpz_t(), static_cast<mp_bitcnt_t>(width - 1));
  if (v >= lim || v < -lim) throw PrecisionError("value does not fit in a " + std::to_string(width) + "-bit field");
  BigInt u = v;
  if (u < 0) {
    BigInt mod;
    mpz_setbit(mod.get_mpz_t(), static_cast<mp_bitcnt_t>(width));
    u += mod;
  }
  for (int i = width - 1; i >= 0; --i) bits_.push_back(mpz_tstbit(u.get_mpz_t(), i) != 0);
}

void BitString::pad_to(std::size_t n_bits) {
  if (bits_.size() > n_bits) throw ProtocolViolation("payload longer than its declared budget");
  bits_.resize(n_bits, false);
}

std::uint64_t BitString::read_uint(std::size_t offset, int width) const {
  if (offset + static_cast<std::size_t>(width) > bits_.size()) throw ValidationError("read past end of bit string");
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v = (v << 1) | (bits_[offset + i] ? 1u : 0u);
  return v;
}

BigInt BitString::read_int(std::size_t offset, int width) const {
  if (offset + static_cast<std::size_t>(width) > bits_.size()) throw ValidationError("read past end of bit string");
  BigInt u = 0;
  for (int i = 0; i < width; ++i) {
    u *= 2;
    if (bits_[offset + i]) u += 1;
  }
  if (bits_[offset]) {
    BigInt mod;
    mpz_setbit(mod.get_mpz_t(), static_cast<mp_bitcnt_t>(width));
    u -= mod;
  }
  return u;
}

std::string BitString::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (bool b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

std::string BitString::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < bits_.size(); i += 4) {
    int v = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      v <<= 1;
      if (i + j < bits_.size() && bits_[i + j]) v |= 1;
    }
    s.push_back(kDigits[v]);
  }
  return s;
}

void append_pbit(BitString& out, const PBitNumber& x) {
  out.append_int(x.mantissa_big(), x.config().total_bits);
}

PBitNumber read_pbit(const BitString& in, std::size_t offset, const PrecisionConfig& cfg) {
  return PBitNumber(to_int128(in.read_int(offset, cfg.total_bits)), cfg);
}

void DyadicFloatCodec::append(BitString& out, const Rational& x) const {
  const int mant_bits = width - 1 - kExpBits;
  if (mant_bits < 1) throw PrecisionError("dyadic float field too narrow");
  const BigInt& den = x.get_den();
  if (mpz_popcount(den.get_mpz_t()) != 1) throw PrecisionError("value is not dyadic");
  BigInt mag = abs(x.get_num());
  long exponent = -static_cast<long>(mpz_sizeinbase(den.get_mpz_t(), 2) - 1);
  if (mag != 0) {
    // Strip trailing zeros so the magnitude is odd (canonical form).
    const auto tz = static_cast<long>(mpz_scan1(mag.get_mpz_t(), 0));
    mpz_fdiv_q_2exp(mag.get_mpz_t(), mag.get_mpz_t(), static_cast<mp_bitcnt_t>(tz));
    exponent += tz;
  } else {
    exponent = 0;
  }
  if (mpz_sizeinbase(mag.get_mpz_t(), 2) > static_cast<std::size_t>(mant_bits) && mag != 0) {
    throw PrecisionError("value needs more than " + std::to_string(mant_bits) + " magnitude bits");
  }
  const long exp_lim = 1L << (kExpBits - 1);
  if (exponent >= exp_lim || exponent < -exp_lim) throw PrecisionError("exponent out of range");
  out.push_back(x < 0);
  out.append_int(BigInt(exponent), kExpBits);
  BitString m;
  for (int i = mant_bits - 1; i >= 0; --i) m.push_back(mpz_tstbit(mag.get_mpz_t(), i) != 0);
  out.append(m);
}

Rational DyadicFloatCodec::read(const BitString& in, std::size_t offset) const {
  const int mant_bits = width - 1 - kExpBits;
  const bool negative = in[offset];
  const long exponent = in.read_int(offset + 1, kExpBits).get_si();
  BigInt mag = 0;
  for (int i = 0; i < mant_bits; ++i) {
    mag *= 2;
    if (in[offset + 1 + kExpBits + i]) mag += 1;
  }
  Rational r(negative ? BigInt(-mag) : mag);
  if (exponent >= 0) {
    mpz_mul_2exp(r.get_num_mpz_t(), r.get_num_mpz_t(), static_cast<mp_bitcnt_t>(exponent));
  } else {
    mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), static_cast<mp_bitcnt_t>(-exponent));
  }
  r.canonicalize();
  return r;
}

}  // namespace attnlab
