#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <attnlab/constructions.hpp>
#include <attnlab/errors.hpp>
#include <attnlab/random.hpp>

using namespace attnlab;

namespace {

EvaInstance random_eva(Rng& rng, int n) {
  EvaInstance inst;
  inst.n = n;
  for (int i = 0; i < n; ++i) inst.f.push_back(uniform_int(rng, 1, n));
  inst.x = uniform_int(rng, 1, n);
  return inst;
}

std::vector<std::int64_t> random_perm(Rng& rng, int n) {
  std::vector<std::int64_t> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 1);
  for (std::size_t i = p.size(); i > 1; --i) std::swap(p[i - 1], p[uniform_below(rng, i)]);
  return p;
}

// Score of the retrieval head between a key token and a query token, from
// the matrices directly.
Rational score(const HeadParams& h, const Token& query, const Token& key) {
  const RVec q = h.Q.apply(query);
  const RVec k = h.K.apply(key);
  Rational s = 0;
  for (std::size_t a = 0; a < q.size(); ++a) s += q[a] * k[a];
  return s;
}

}  // namespace

TEST(RetrievalPrecision, DerivedConstant) {
  EXPECT_EQ(retrieval_key_width(1), 1);
  EXPECT_EQ(retrieval_key_width(8), 3);
  EXPECT_EQ(retrieval_key_width(9), 4);
  const auto cfg = retrieval_precision(256);
  EXPECT_EQ(cfg.total_bits, 24);
  EXPECT_EQ(cfg.frac_bits, 8);
}

TEST(RetrievalScale, NaturalLogRoundedUp) {
  for (std::uint64_t n : {8u, 16u, 100u, 256u}) {
    const int D = retrieval_key_width(n);
    const auto cfg = retrieval_precision(n);
    const Rational c = retrieval_scale(n, D, cfg);
    const double ln2 = std::log(static_cast<double>(n)) * std::log(static_cast<double>(n));
    EXPECT_GE(c.get_d(), ln2);
    EXPECT_LE(c.get_d() - ln2, std::ldexp(1.0, -cfg.frac_bits));
  }
  EXPECT_EQ(retrieval_scale(16, 4, retrieval_precision(16), LogBase::kBinary), 16);
}

TEST(RetrievalScale, TooFewBitsThrows) {
  // c = 2 at n = 8: p = 6, s = 3 cannot hold ln^2 8 ~ 4.32.
  EXPECT_THROW(retrieval_scale(8, 3, retrieval_precision(8, 2)), PrecisionError);
  EXPECT_THROW(build_retrieval_head(8, 3, retrieval_precision(8, 2)), PrecisionError);
  EXPECT_THROW(build_retrieval_head(16, 3, retrieval_precision(16)), ValidationError);
}

TEST(RetrievalHead, MatchAndMismatchScores) {
  const std::uint64_t n = 16;
  const int D = 4;
  const auto cfg = retrieval_precision(n);
  const auto head = build_retrieval_head(n, D, cfg);
  const Rational c = retrieval_scale(n, D, cfg);
  const RetrievalEncoding enc{D};
  const std::vector<int> zero(D, 0);
  const Token q = enc.query_token(enc.bits(5), cfg);
  EXPECT_EQ(score(head, q, enc.key_token(enc.bits(5), zero, cfg)), c * D);
  EXPECT_LE(score(head, q, enc.key_token(enc.bits(4), zero, cfg)), c * D - c);
  EXPECT_EQ(score(head, q, q), 0);
}

TEST(RetrievalHead, ScoreGapByEnumeration) {
  for (std::uint64_t n : {2u, 5u, 8u, 13u, 32u, 64u}) {
    const int D = retrieval_key_width(n);
    const auto cfg = retrieval_precision(n);
    const auto head = build_retrieval_head(n, D, cfg);
    const Rational c = retrieval_scale(n, D, cfg);
    const RetrievalEncoding enc{D};
    const std::vector<int> zero(static_cast<std::size_t>(D), 0);
    for (std::uint64_t a = 0; a < n; ++a) {
      const Token q = enc.query_token(enc.bits(a), cfg);
      const Rational match = score(head, q, enc.key_token(enc.bits(a), zero, cfg));
      for (std::uint64_t b = 0; b < n; ++b) {
        if (b == a) continue;
        const Rational s = score(head, q, enc.key_token(enc.bits(b), zero, cfg));
        EXPECT_GE(match - s, c) << n << " " << a << " " << b;
      }
    }
  }
}

TEST(Concentration, SixteenQuantizesToOne) {
  const auto r = retrieval_concentration(16, 4, retrieval_precision(16), 7);
  EXPECT_TRUE(r.defined);
  EXPECT_EQ(r.match_position, 7u);
  EXPECT_TRUE(r.quantizes_to_one);
  EXPECT_TRUE(r.mismatches_quantize_to_zero);
  EXPECT_EQ(r.hdp, 1 * 20 * 12);
  EXPECT_TRUE(r.hdp_polylog);
}

TEST(Concentration, BoundsAcrossSizes) {
  for (std::uint64_t n = 8; n <= 256; n *= 2) {
    const int D = retrieval_key_width(n);
    const auto r = retrieval_concentration(n, D, retrieval_precision(n), n / 2 + 1);
    EXPECT_TRUE(r.meets_bound) << n;
    EXPECT_TRUE(r.mismatches_within_bound) << n;
    EXPECT_TRUE(r.quantizes_to_one) << n;
    EXPECT_LT(r.bound, 1);
    // Independent check of the bound in floating point.
    const double lnn = std::log(static_cast<double>(n));
    EXPECT_NEAR(r.bound.get_d(), 1.0 - static_cast<double>(n) * std::exp(-lnn * lnn), 1e-12);
  }
}

TEST(Concentration, WeightsFromLayerSumToOne) {
  const auto r = retrieval_concentration(8, 3, retrieval_precision(8), 3);
  EXPECT_GT(r.match_weight, 0);
  EXPECT_LE(r.match_weight + r.max_mismatch_weight, 1);
}

TEST(Concentration, UndefinedRetrieval) {
  const auto cfg = retrieval_precision(8);
  const auto none = retrieval_concentration(8, 3, cfg, std::vector<std::uint64_t>{0, 1, 2, 3}, 6);
  EXPECT_FALSE(none.defined);
  EXPECT_EQ(none.matches, 0u);
  EXPECT_FALSE(none.quantizes_to_one);
  const auto twice = retrieval_concentration(8, 3, cfg, std::vector<std::uint64_t>{2, 1, 2, 3}, 2);
  EXPECT_FALSE(twice.defined);
  EXPECT_EQ(twice.matches, 2u);
}

TEST(Concentration, MonotoneInScoreGap) {
  for (std::uint64_t n : {8u, 16u}) {
    const int lg = retrieval_key_width(n);
    for (int D : {lg, 2 * lg}) {
      PrecisionConfig cfg{3 * D, D};
      Rational prev = -1;
      for (int num = 1; num <= 48; num += 3) {
        RetrievalOptions opts;
        opts.scale = Rational(num, 4);
        opts.scale->canonicalize();
        const auto r = retrieval_concentration(n, D, cfg, 2, opts);
        EXPECT_GE(r.match_weight, prev) << n << " " << D << " " << num;
        prev = r.match_weight;
      }
    }
  }
}

TEST(Concentration, BinaryBaseVariant) {
  RetrievalOptions opts;
  opts.base = LogBase::kBinary;
  const auto r = retrieval_concentration(32, 5, retrieval_precision(32), 9, opts);
  EXPECT_EQ(r.scale, 25);
  EXPECT_TRUE(r.meets_bound);
  EXPECT_TRUE(r.quantizes_to_one);
}

TEST(Decode, ThresholdAndAmbiguity) {
  const RetrievalEncoding enc{2};
  const PrecisionConfig cfg{8, 3};
  Token y(10, PBitNumber::zero(cfg));
  y[enc.value_slot(0)] = quantize(Rational(7, 8), cfg);
  y[enc.value_slot(1)] = quantize(Rational(1, 8), cfg);
  EXPECT_EQ(decode_retrieval(enc, y), 1u);
  y[enc.value_slot(1)] = quantize(Rational(1, 2), cfg);
  EXPECT_THROW(decode_retrieval(enc, y), DecodeError);
}

TEST(Encoding, BitsRoundTrip) {
  const RetrievalEncoding enc{5};
  for (std::uint64_t v = 0; v < 32; ++v) EXPECT_EQ(enc.from_bits(enc.bits(v)), v);
  EXPECT_THROW(enc.bits(32), ValidationError);
}

TEST(SolveEva, IdentityFunction) {
  for (int n : {1, 2, 7, 16}) {
    EvaInstance inst;
    inst.n = n;
    for (int i = 1; i <= n; ++i) inst.f.push_back(i);
    for (int x = 1; x <= n; ++x) {
      inst.x = x;
      EXPECT_EQ(solve_eva(inst), x);
    }
  }
}

TEST(SolveEva, AllQueriesAtThirtyTwo) {
  Rng rng(31);
  EvaInstance inst = random_eva(rng, 32);
  for (int x = 1; x <= 32; ++x) {
    inst.x = x;
    EXPECT_EQ(solve_eva(inst), oracle_eva(inst));
  }
}

TEST(SolveEva, SweepAgreesWithOracle) {
  Rng rng(32);
  for (int n : {8, 16, 32, 64, 128, 256}) {
    const int trials = n == 256 ? 100 : 20;
    for (int t = 0; t < trials; ++t) {
      const auto inst = random_eva(rng, n);
      ASSERT_EQ(solve_eva(inst), oracle_eva(inst)) << "n=" << n;
    }
  }
}

TEST(SolveEva, StarvedPrecisionFails) {
  Rng rng(33);
  const auto inst = random_eva(rng, 16);
  SolverConfig cfg;
  cfg.precision = PrecisionConfig{2, 1};
  EXPECT_THROW(solve_eva(inst, cfg), PrecisionError);
  // A representable but tiny scale spreads the attention and the decode fails.
  cfg.precision = retrieval_precision(16);
  cfg.retrieval.scale = Rational(1, 16);
  bool wrong_or_ambiguous = false;
  for (int x = 1; x <= 16 && !wrong_or_ambiguous; ++x) {
    EvaInstance q = inst;
    q.x = x;
    try {
      wrong_or_ambiguous = solve_eva(q, cfg) != oracle_eva(q);
    } catch (const DecodeError&) {
      wrong_or_ambiguous = true;
    }
  }
  EXPECT_TRUE(wrong_or_ambiguous);
}

TEST(SolvePerCom, IdentityAndReversal) {
  PerComInstance inst;
  inst.n = 8;
  for (int i = 1; i <= 8; ++i) {
    inst.sigma.push_back(i);
    inst.tau.push_back(i);
  }
  EXPECT_EQ(solve_percom(inst), inst.sigma);
  for (int i = 1; i <= 8; ++i) inst.sigma[static_cast<std::size_t>(i - 1)] = 9 - i;
  EXPECT_EQ(solve_percom(inst), (std::vector<std::int64_t>{8, 7, 6, 5, 4, 3, 2, 1}));
}

TEST(SolvePerCom, RandomAgreesWithOracle) {
  Rng rng(34);
  for (int n : {8, 16, 32, 64}) {
    for (int t = 0; t < 5; ++t) {
      PerComInstance inst{n, random_perm(rng, n), random_perm(rng, n)};
      EXPECT_EQ(solve_percom(inst), oracle_percom(inst)) << "n=" << n;
    }
  }
}
