#include "attnlab/constructions.hpp"

#include <mpfr.h>

#include <algorithm>
#include <memory>

#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

struct MpfrVar {
  mpfr_t v;
  explicit MpfrVar(mpfr_prec_t prec) { mpfr_init2(v, prec); }
  ~MpfrVar() { mpfr_clear(v); }
  MpfrVar(const MpfrVar&) = delete;
  MpfrVar& operator=(const MpfrVar&) = delete;
};

Rational to_rational(const mpfr_t x) {
  BigInt z;
  const mpfr_exp_t e = mpfr_get_z_2exp(z.get_mpz_t(), x);
  Rational r(z);
  if (e >= 0) {
    mpz_mul_2exp(r.get_num_mpz_t(), r.get_num_mpz_t(), static_cast<mp_bitcnt_t>(e));
  } else {
    mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), static_cast<mp_bitcnt_t>(-e));
  }
  r.canonicalize();
  return r;
}

// exp(-log(n) * ln(n)) = 1 / n^(log n), rounded in direction rnd.
void inverse_power(mpfr_t out, std::uint64_t n, LogBase base, mpfr_rnd_t rnd) {
  const mpfr_rnd_t opposite = rnd == MPFR_RNDU ? MPFR_RNDD : MPFR_RNDU;
  MpfrVar ln(256);
  MpfrVar lg(256);
  mpfr_set_ui(ln.v, static_cast<unsigned long>(n), MPFR_RNDN);
  mpfr_set_ui(lg.v, static_cast<unsigned long>(n), MPFR_RNDN);
  // The exponent is negated below, so round it the opposite way.
  mpfr_log(ln.v, ln.v, opposite);
  if (base == LogBase::kBinary) mpfr_log2(lg.v, lg.v, opposite);
  else mpfr_log(lg.v, lg.v, opposite);
  mpfr_mul(out, ln.v, lg.v, opposite);
  mpfr_neg(out, out, MPFR_RNDN);
  mpfr_exp(out, out, rnd);
}

Rational log_squared_rounded_up(std::uint64_t n, LogBase base, const PrecisionConfig& cfg) {
  if (base == LogBase::kNatural) return ln_squared_rounded_up(n, cfg);
  MpfrVar v(256);
  mpfr_set_ui(v.v, static_cast<unsigned long>(n), MPFR_RNDN);
  mpfr_log2(v.v, v.v, MPFR_RNDU);
  mpfr_sqr(v.v, v.v, MPFR_RNDU);
  mpfr_mul_2si(v.v, v.v, cfg.frac_bits, MPFR_RNDU);
  mpfr_ceil(v.v, v.v);
  Rational r = to_rational(v.v);
  mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), static_cast<mp_bitcnt_t>(cfg.frac_bits));
  r.canonicalize();
  return r;
}

bool on_grid(const Rational& x, const PrecisionConfig& cfg) {
  return abs(x) <= cfg.max_value() && quantize(x, cfg).value() == x;
}

int resolved_D(std::uint64_t n, const SolverConfig& cfg) { return cfg.D.value_or(retrieval_key_width(n)); }

// Below n = 8 the log^2 n margin is under 5 and the decode gets ambiguous, so
// small instances borrow the scale and precision of n = 8.
std::uint64_t effective_size(std::uint64_t n) { return std::max<std::uint64_t>(n, kMinRetrievalSize); }

PrecisionConfig resolved_precision(std::uint64_t n, const SolverConfig& cfg) {
  return cfg.precision.value_or(retrieval_precision(effective_size(n)));
}

LayerConfig solver_layer(std::uint64_t n, int D, const PrecisionConfig& pc, const SolverConfig& cfg) {
  RetrievalOptions opts = cfg.retrieval;
  if (!opts.scale) opts.scale = retrieval_scale(effective_size(n), D, pc, opts.base);
  return retrieval_layer(n, D, pc, opts);
}

}  // namespace

std::string to_string(LogBase base) { return base == LogBase::kNatural ? "natural" : "binary"; }

LogBase parse_log_base(const std::string& name) {
  if (name == "natural" || name == "e") return LogBase::kNatural;
  if (name == "binary" || name == "2") return LogBase::kBinary;
  throw ValidationError("unknown log base: " + name);
}

int retrieval_key_width(std::uint64_t n) {
  if (n < 1) throw ValidationError("retrieval needs n >= 1");
  return std::max(1, ceil_log2(n));
}

PrecisionConfig retrieval_precision(std::uint64_t n, int c) {
  if (c < 1) throw ValidationError("precision constant must be positive");
  const int D = retrieval_key_width(n);
  PrecisionConfig cfg{c * D, D};
  cfg.validate();
  return cfg;
}

std::vector<int> RetrievalEncoding::bits(std::uint64_t value) const {
  if (D < 64 && (value >> D) != 0) {
    throw ValidationError("value " + std::to_string(value) + " does not fit in " + std::to_string(D) + " bits");
  }
  std::vector<int> out(static_cast<std::size_t>(D));
  for (int t = 0; t < D; ++t) out[static_cast<std::size_t>(t)] = t < 64 ? static_cast<int>((value >> t) & 1u) : 0;
  return out;
}

std::uint64_t RetrievalEncoding::from_bits(const std::vector<int>& b) const {
  std::uint64_t v = 0;
  for (std::size_t t = b.size(); t-- > 0;) v = (v << 1) | static_cast<std::uint64_t>(b[t] != 0);
  return v;
}

Token RetrievalEncoding::key_token(const std::vector<int>& a, const std::vector<int>& b,
                                   const PrecisionConfig& cfg) const {
  if (a.size() != static_cast<std::size_t>(D) || b.size() != static_cast<std::size_t>(D)) {
    throw DimensionError("key token needs D bits for a and b");
  }
  Token x(static_cast<std::size_t>(width()), PBitNumber::zero(cfg));
  for (int t = 0; t < D; ++t) {
    const auto at = static_cast<std::size_t>(t);
    x[key_slot(t)] = PBitNumber::from_int(a[at], cfg);
    x[key_neg_slot(t)] = PBitNumber::from_int(1 - a[at], cfg);
    x[value_slot(t)] = PBitNumber::from_int(b[at], cfg);
  }
  return x;
}

Token RetrievalEncoding::query_token(const std::vector<int>& a, const PrecisionConfig& cfg) const {
  if (a.size() != static_cast<std::size_t>(D)) throw DimensionError("query token needs D bits");
  Token x(static_cast<std::size_t>(width()), PBitNumber::zero(cfg));
  for (int t = 0; t < D; ++t) {
    const auto at = static_cast<std::size_t>(t);
    x[query_slot(t)] = PBitNumber::from_int(a[at], cfg);
    x[query_neg_slot(t)] = PBitNumber::from_int(1 - a[at], cfg);
  }
  return x;
}

Rational retrieval_scale(std::uint64_t n, int D, const PrecisionConfig& cfg, LogBase base) {
  cfg.validate();
  if (n < 2) throw ValidationError("retrieval scale needs n >= 2");
  const Rational c = log_squared_rounded_up(n, base, cfg);
  if (!on_grid(c, cfg) || abs(Rational(c * D)) > cfg.max_value()) {
    throw PrecisionError("log^2(" + std::to_string(n) + ") * D not representable at " + to_string(cfg));
  }
  return c;
}

HeadParams build_retrieval_head(std::uint64_t n, int D, const PrecisionConfig& cfg, const RetrievalOptions& opts) {
  if (D < retrieval_key_width(n)) throw ValidationError("D must be at least ceil(log2 n)");
  Rational c = opts.scale ? *opts.scale : retrieval_scale(n, D, cfg, opts.base);
  c.canonicalize();
  if (!on_grid(c, cfg)) throw PrecisionError("retrieval scale not representable at " + to_string(cfg));
  const RetrievalEncoding enc{D};
  const auto w = static_cast<std::size_t>(enc.width());
  HeadParams h{PMatrix(w, w, cfg), PMatrix(w, w, cfg), PMatrix(w, w, cfg)};
  const PBitNumber scale = quantize(c, cfg);
  const PBitNumber one = PBitNumber::from_int(1, cfg);
  for (int t = 0; t < D; ++t) {
    // Row r of K pairs with row r of Q in the score.
    h.K.at(enc.key_slot(t), enc.key_slot(t)) = scale;
    h.K.at(enc.key_neg_slot(t), enc.key_neg_slot(t)) = scale;
    h.Q.at(enc.key_slot(t), enc.query_slot(t)) = one;
    h.Q.at(enc.key_neg_slot(t), enc.query_neg_slot(t)) = one;
    h.V.at(enc.value_slot(t), enc.value_slot(t)) = one;
  }
  return h;
}

LayerConfig retrieval_layer(std::uint64_t n, int D, const PrecisionConfig& cfg, const RetrievalOptions& opts) {
  LayerConfig layer;
  layer.kind = LayerKind::kFull;
  layer.H = 1;
  layer.d = RetrievalEncoding{D}.width();
  layer.precision = cfg;
  layer.heads.push_back(build_retrieval_head(n, D, cfg, opts));
  layer.mlp = "project_second";
  layer.validate();
  return layer;
}

std::uint64_t decode_retrieval(const RetrievalEncoding& enc, const Token& y) {
  if (y.size() != static_cast<std::size_t>(enc.width())) throw DimensionError("decode: token width mismatch");
  std::vector<int> bits(static_cast<std::size_t>(enc.D));
  const Rational half(1, 2);
  for (int t = 0; t < enc.D; ++t) {
    const Rational v = y[enc.value_slot(t)].value();
    if (abs(Rational(v - half)) < Rational(1, 4)) {
      throw DecodeError("ambiguous retrieval output " + to_decimal(v) + " in value bit " + std::to_string(t));
    }
    bits[static_cast<std::size_t>(t)] = v > half ? 1 : 0;
  }
  return enc.from_bits(bits);
}

ConcentrationReport retrieval_concentration(std::uint64_t n, int D, const PrecisionConfig& cfg,
                                            std::uint64_t query, const RetrievalOptions& opts) {
  if (query < 1 || query > n) throw ValidationError("query must lie in [1, n]");
  std::vector<std::uint64_t> keys(n);
  for (std::uint64_t i = 0; i < n; ++i) keys[i] = i;
  return retrieval_concentration(n, D, cfg, keys, query - 1, opts);
}

ConcentrationReport retrieval_concentration(std::uint64_t n, int D, const PrecisionConfig& cfg,
                                            const std::vector<std::uint64_t>& keys, std::uint64_t query,
                                            const RetrievalOptions& opts) {
  const LayerConfig layer = retrieval_layer(n, D, cfg, opts);
  const RetrievalEncoding enc{D};
  ConcentrationReport r;
  r.n = n;
  r.D = D;
  r.precision = cfg;
  r.base = opts.base;
  r.scale = layer.heads[0].K.at(0, 0).value();
  r.d = layer.d;
  r.hdp = static_cast<std::int64_t>(r.H) * r.d * cfg.total_bits;
  const std::int64_t lg = retrieval_key_width(n);
  r.hdp_polylog_cap = 5 * kRetrievalPrecisionConstant * lg * lg;
  r.hdp_polylog = r.hdp <= r.hdp_polylog_cap;

  Sequence seq;
  const std::vector<int> zero(static_cast<std::size_t>(D), 0);
  for (auto k : keys) seq.push_back(enc.key_token(enc.bits(k), zero, cfg));
  seq.push_back(enc.query_token(enc.bits(query), cfg));
  r.matches = static_cast<std::size_t>(std::count(keys.begin(), keys.end(), query));
  r.defined = r.matches == 1;

  const RVec w = softmax_weights(seq, layer, 0, seq.size() - 1);
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (j < keys.size() && keys[j] == query) {
      if (r.defined) {
        r.match_position = j + 1;
        r.match_weight = w[j];
      }
    } else {
      r.max_mismatch_weight = std::max(r.max_mismatch_weight, w[j]);
    }
  }

  MpfrVar up(256);
  MpfrVar down(256);
  inverse_power(up.v, n, opts.base, MPFR_RNDU);
  r.mismatch_bound = to_rational(up.v);
  mpfr_mul_ui(up.v, up.v, static_cast<unsigned long>(n), MPFR_RNDU);
  mpfr_ui_sub(down.v, 1, up.v, MPFR_RNDD);
  r.bound = to_rational(down.v);

  const PrecisionConfig& pc = cfg;
  r.mismatches_within_bound = r.max_mismatch_weight <= r.mismatch_bound;
  r.mismatches_quantize_to_zero = quantize(r.max_mismatch_weight, pc).is_zero();
  if (r.defined) {
    r.meets_bound = r.match_weight >= r.bound;
    r.quantizes_to_one = quantize(r.match_weight, pc).value() == 1;
  }
  return r;
}

Sequence encode_eva_retrieval(const EvaInstance& inst, const RetrievalEncoding& enc, const PrecisionConfig& cfg) {
  inst.validate();
  Sequence seq;
  seq.reserve(static_cast<std::size_t>(inst.n) + 1);
  for (int i = 1; i <= inst.n; ++i) {
    const auto fi = inst.f[static_cast<std::size_t>(i - 1)];
    seq.push_back(enc.key_token(enc.bits(static_cast<std::uint64_t>(i - 1)),
                                enc.bits(static_cast<std::uint64_t>(fi - 1)), cfg));
  }
  seq.push_back(enc.query_token(enc.bits(static_cast<std::uint64_t>(inst.x - 1)), cfg));
  return seq;
}

Sequence encode_percom_retrieval(const PerComInstance& inst, const RetrievalEncoding& enc,
                                 const PrecisionConfig& cfg) {
  inst.validate();
  Sequence seq;
  seq.reserve(2 * static_cast<std::size_t>(inst.n));
  for (int j = 1; j <= inst.n; ++j) {
    const auto sj = inst.sigma[static_cast<std::size_t>(j - 1)];
    seq.push_back(enc.key_token(enc.bits(static_cast<std::uint64_t>(j - 1)),
                                enc.bits(static_cast<std::uint64_t>(sj - 1)), cfg));
  }
  for (auto t : inst.tau) seq.push_back(enc.query_token(enc.bits(static_cast<std::uint64_t>(t - 1)), cfg));
  return seq;
}

std::int64_t solve_eva(const EvaInstance& inst, const SolverConfig& scfg) {
  const auto n = static_cast<std::uint64_t>(inst.n);
  const int D = resolved_D(n, scfg);
  const PrecisionConfig cfg = resolved_precision(n, scfg);
  const RetrievalEncoding enc{D};
  const LayerConfig layer = solver_layer(n, D, cfg, scfg);
  const Sequence seq = encode_eva_retrieval(inst, enc, cfg);
  const std::size_t pos[] = {seq.size() - 1};
  const Sequence out = full_layer_at(seq, layer, pos);
  return static_cast<std::int64_t>(decode_retrieval(enc, out[0])) + 1;
}

std::vector<std::int64_t> solve_percom(const PerComInstance& inst, const SolverConfig& scfg) {
  const auto n = static_cast<std::uint64_t>(inst.n);
  const int D = resolved_D(n, scfg);
  const PrecisionConfig cfg = resolved_precision(n, scfg);
  const RetrievalEncoding enc{D};
  const LayerConfig layer = solver_layer(n, D, cfg, scfg);
  const Sequence seq = encode_percom_retrieval(inst, enc, cfg);
  std::vector<std::size_t> positions;
  for (std::size_t i = n; i < 2 * n; ++i) positions.push_back(i);
  const Sequence out = full_layer_at(seq, layer, positions);
  std::vector<std::int64_t> answer;
  answer.reserve(out.size());
  for (const auto& y : out) answer.push_back(static_cast<std::int64_t>(decode_retrieval(enc, y)) + 1);
  return answer;
}

}  // namespace attnlab
