#pragma once

// Hand-built single-head retrieval attention and the Eva / PerCom solvers on
// top of it.
//
// Token layout for key width D (token width 5D, H = 1, d = 5D):
//   [0, D)    key a_i          [D, 2D)   key 1 - a_i
//   [2D, 3D)  value b_i        [3D, 4D)  query a
//   [4D, 5D)  query 1 - a
// Key tokens leave the query slots at zero and vice versa. K scales the key
// slots by c ~ log^2 n, Q copies the query slots, V copies the value slots,
// so the score is c times the number of agreeing key bits: c*D at the match,
// at most c*(D-1) elsewhere. Query tokens have a zero key, scoring 0.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "attnlab/attention.hpp"
#include "attnlab/tasks.hpp"

namespace attnlab {

enum class LogBase { kNatural, kBinary };

std::string to_string(LogBase base);
LogBase parse_log_base(const std::string& name);

// Smallest c for which p = c * ceil(log2 n) passes the n = 8..256 sweep; see
// tools/derive_precision.
inline constexpr int kRetrievalPrecisionConstant = 3;
// The solvers use the scale and precision of max(n, 8).
inline constexpr std::uint64_t kMinRetrievalSize = 8;

// D = ceil(log2 n), at least 1.
int retrieval_key_width(std::uint64_t n);
// p = c * D, frac_bits = D.
PrecisionConfig retrieval_precision(std::uint64_t n, int c = kRetrievalPrecisionConstant);

struct RetrievalOptions {
  LogBase base = LogBase::kNatural;
  std::optional<Rational> scale;  // overrides log^2 n
};

struct RetrievalEncoding {
  int D = 1;

  int width() const { return 5 * D; }
  std::size_t key_slot(int t) const { return static_cast<std::size_t>(t); }
  std::size_t key_neg_slot(int t) const { return static_cast<std::size_t>(D + t); }
  std::size_t value_slot(int t) const { return static_cast<std::size_t>(2 * D + t); }
  std::size_t query_slot(int t) const { return static_cast<std::size_t>(3 * D + t); }
  std::size_t query_neg_slot(int t) const { return static_cast<std::size_t>(4 * D + t); }

  // Binary digits of value, least significant first; throws ValidationError
  // if value does not fit in D bits.
  std::vector<int> bits(std::uint64_t value) const;
  std::uint64_t from_bits(const std::vector<int>& bits) const;

  Token key_token(const std::vector<int>& a, const std::vector<int>& b, const PrecisionConfig& cfg) const;
  Token query_token(const std::vector<int>& a, const PrecisionConfig& cfg) const;
};

// log^2 n rounded up onto the grid of cfg. Throws PrecisionError if the
// result, or scale * D, is not representable.
Rational retrieval_scale(std::uint64_t n, int D, const PrecisionConfig& cfg, LogBase base = LogBase::kNatural);

HeadParams build_retrieval_head(std::uint64_t n, int D, const PrecisionConfig& cfg,
                                const RetrievalOptions& opts = {});
LayerConfig retrieval_layer(std::uint64_t n, int D, const PrecisionConfig& cfg, const RetrievalOptions& opts = {});

// Reads b from the value slots of a layer output: bit t is 1 if y > 1/2.
// Throws DecodeError when some |y - 1/2| < 1/4.
std::uint64_t decode_retrieval(const RetrievalEncoding& enc, const Token& y);

struct ConcentrationReport {
  std::uint64_t n = 0;
  int D = 0;
  PrecisionConfig precision;
  LogBase base = LogBase::kNatural;
  Rational scale;
  std::size_t matches = 0;
  bool defined = false;  // exactly one matching key
  std::size_t match_position = 0;
  Rational match_weight;         // exact, 0 when undefined
  Rational max_mismatch_weight;  // exact
  Rational bound;                // 1 - n / n^(log n), rounded down
  Rational mismatch_bound;       // 1 / n^(log n), rounded up
  bool meets_bound = false;
  bool mismatches_within_bound = false;
  bool quantizes_to_one = false;
  bool mismatches_quantize_to_zero = false;
  int H = 1;
  int d = 0;
  std::int64_t hdp = 0;
  std::int64_t hdp_polylog_cap = 0;  // 15 * ceil(log2 n)^2 with the default constant
  bool hdp_polylog = false;
};

// Keys a_i = binary(i - 1) for i = 1..n and query a = binary(query - 1).
ConcentrationReport retrieval_concentration(std::uint64_t n, int D, const PrecisionConfig& cfg,
                                            std::uint64_t query = 1, const RetrievalOptions& opts = {});
// Arbitrary key list (values in [0, 2^D)); duplicate or absent matches give an
// undefined report.
ConcentrationReport retrieval_concentration(std::uint64_t n, int D, const PrecisionConfig& cfg,
                                            const std::vector<std::uint64_t>& keys, std::uint64_t query,
                                            const RetrievalOptions& opts = {});

struct SolverConfig {
  std::optional<PrecisionConfig> precision;  // defaults to retrieval_precision(max(n, 8))
  std::optional<int> D;                      // defaults to retrieval_key_width(n)
  RetrievalOptions retrieval;
};

Sequence encode_eva_retrieval(const EvaInstance& inst, const RetrievalEncoding& enc, const PrecisionConfig& cfg);
Sequence encode_percom_retrieval(const PerComInstance& inst, const RetrievalEncoding& enc,
                                 const PrecisionConfig& cfg);

std::int64_t solve_eva(const EvaInstance& inst, const SolverConfig& cfg = {});
std::vector<std::int64_t> solve_percom(const PerComInstance& inst, const SolverConfig& cfg = {});

}  // namespace attnlab
