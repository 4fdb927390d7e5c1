#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnlab/numerics.hpp"

namespace attnlab {

// Append-only bit string used for protocol payloads and fingerprints.
// Comparison is exact (length and every bit).
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t n_zero_bits) : bits_(n_zero_bits, false) {}

  static BitString from_string(const std::string& zeros_and_ones);
  static BitString from_hex(const std::string& hex, std::size_t n_bits);

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  bool operator[](std::size_t i) const { return bits_[i]; }

  void push_back(bool b) { bits_.push_back(b); }
  void append(const BitString& other);
  // Low `width` bits of v, most significant first.
  void append_uint(std::uint64_t v, int width);
  // Two's complement of v in `width` bits; throws PrecisionError if v does not fit.
  void append_int(const BigInt& v, int width);
  void pad_to(std::size_t n_bits);

  std::uint64_t read_uint(std::size_t offset, int width) const;
  BigInt read_int(std::size_t offset, int width) const;

  std::string to_string() const;
  // Hex of the bits left-aligned into nibbles (zero padded at the end).
  std::string to_hex() const;

  friend bool operator==(const BitString&, const BitString&) = default;
  friend auto operator<=>(const BitString& a, const BitString& b) { return a.bits_ <=> b.bits_; }

 private:
  std::vector<bool> bits_;
};

// Fixed-point field codec: each number is its mantissa in p-bit two's complement.
void append_pbit(BitString& out, const PBitNumber& x);
PBitNumber read_pbit(const BitString& in, std::size_t offset, const PrecisionConfig& cfg);

// Dyadic floating field codec for exact protocol payloads:
// [sign 1][exponent kExpBits, two's complement][magnitude width-1-kExpBits].
// Encodes x = +-magnitude * 2^exponent exactly or throws PrecisionError.
struct DyadicFloatCodec {
  static constexpr int kExpBits = 16;
  int width = 64;

  void append(BitString& out, const Rational& x) const;
  Rational read(const BitString& in, std::size_t offset) const;
};

}  // namespace attnlab
