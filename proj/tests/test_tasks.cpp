#include <gtest/gtest.h>

#include <algorithm>
#include <attnlab/errors.hpp>
#include <attnlab/random.hpp>
#include <attnlab/tasks.hpp>

using namespace attnlab;

namespace {

// Recursive evaluator written directly from the composition definition:
// i_0 = z_0, i_1 = z_1(i_0), i_{l+1} = z_{l+1}(w_l, i_l) with the row-major pairing.
std::int64_t compose_reference(const FuncCompInstance& inst, int l) {
  if (l == 0) return inst.z0;
  const std::int64_t prev = compose_reference(inst, l - 1);
  const auto& table = inst.z[static_cast<std::size_t>(l - 1)];
  if (l == 1) return table[static_cast<std::size_t>(prev - 1)];
  std::int64_t N_prev = inst.spec.m;
  for (int t = 0; t < l - 2; ++t) N_prev *= inst.spec.n[static_cast<std::size_t>(t)];
  const std::int64_t w = inst.w[static_cast<std::size_t>(l - 2)];
  return table[static_cast<std::size_t>((w - 1) * N_prev + prev - 1)];
}

std::vector<std::int64_t> two_sum_double_loop(const TwoSumInstance& inst) {
  std::vector<std::int64_t> y(inst.x.size(), 0);
  for (std::size_t i = 0; i < inst.x.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if ((inst.x[i] + inst.x[j]) % inst.modulus == 0) y[i] = 1;
    }
  }
  return y;
}

FuncCompSpec toy_spec() { return FuncCompSpec{2, 2, {2}}; }

}  // namespace

TEST(Eva, IdentityAndConstant) {
  EXPECT_EQ(oracle_eva(EvaInstance{5, {1, 2, 3, 4, 5}, 3}), 3);
  EXPECT_EQ(oracle_eva(EvaInstance{4, {2, 2, 2, 2}, 4}), 2);
}

TEST(Eva, MatchesTableLookup) {
  Rng rng(1);
  EvaInstance inst{6, {}, 1};
  for (int i = 0; i < 6; ++i) inst.f.push_back(uniform_int(rng, 1, 6));
  for (std::int64_t x = 1; x <= 6; ++x) {
    inst.x = x;
    EXPECT_EQ(oracle_eva(inst), inst.f[static_cast<std::size_t>(x - 1)]);
  }
}

TEST(Eva, RejectsOutOfRange) {
  EXPECT_THROW(oracle_eva(EvaInstance{3, {1, 2, 4}, 1}), ValidationError);
  EXPECT_THROW(oracle_eva(EvaInstance{3, {1, 2, 3}, 0}), ValidationError);
}

TEST(PerCom, IdentityAndInverse) {
  const std::vector<std::int64_t> id{1, 2, 3, 4, 5};
  EXPECT_EQ(oracle_percom(PerComInstance{5, id, id}), id);
  const std::vector<std::int64_t> sigma{3, 1, 5, 2, 4};
  std::vector<std::int64_t> inv(5);
  for (std::size_t i = 0; i < 5; ++i) inv[static_cast<std::size_t>(sigma[i] - 1)] = static_cast<std::int64_t>(i) + 1;
  EXPECT_EQ(oracle_percom(PerComInstance{5, sigma, inv}), id);
}

TEST(PerCom, MatchesBruteForceComposition) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto inst = std::get<PerComInstance>(gen_instance(TaskKind::kPerCom, {6}, rng()));
    std::vector<std::int64_t> expect;
    for (std::int64_t i = 1; i <= 6; ++i) {
      // Search for sigma's entry at position tau(i) by scanning.
      std::int64_t ti = 0;
      for (std::size_t k = 0; k < 6; ++k) {
        if (static_cast<std::int64_t>(k) + 1 == inst.tau[static_cast<std::size_t>(i - 1)]) ti = inst.sigma[k];
      }
      expect.push_back(ti);
    }
    EXPECT_EQ(oracle_percom(inst), expect);
  }
}

TEST(PerCom, RejectsNonBijection) {
  EXPECT_THROW(oracle_percom(PerComInstance{3, {1, 1, 2}, {1, 2, 3}}), ValidationError);
}

TEST(TwoSum, FirstOutputIsZero) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto inst = std::get<TwoSumInstance>(gen_instance(TaskKind::kTwoSum, {8}, rng()));
    EXPECT_EQ(oracle_two_sum(inst).front(), 0);
  }
}

TEST(TwoSum, ComplementPair) {
  const TwoSumInstance inst{2, 10, {3, 7, 1}};
  const auto y = oracle_two_sum(inst);
  ASSERT_EQ(y.size(), 3u);
  EXPECT_EQ(y[1], 1);
  EXPECT_EQ(y[2], 0);
}

TEST(TwoSum, MatchesDoubleLoop) {
  Rng rng(4);
  for (int n = 1; n <= 20; ++n) {
    for (auto preset : {ModulusPreset::kLinear, ModulusPreset::kSquare}) {
      GenParams gp;
      gp.n = n;
      gp.modulus_preset = preset;
      const auto inst = std::get<TwoSumInstance>(gen_instance(TaskKind::kTwoSum, gp, rng()));
      EXPECT_EQ(oracle_two_sum(inst), two_sum_double_loop(inst));
    }
  }
}

TEST(TwoSum, PrefixPermutationCovariance) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    auto inst = std::get<TwoSumInstance>(gen_instance(TaskKind::kTwoSum, {9}, rng()));
    const auto y = oracle_two_sum(inst);
    const std::size_t i = 1 + uniform_below(rng, inst.x.size() - 1);
    std::vector<std::int64_t> prefix(inst.x.begin(), inst.x.begin() + static_cast<std::ptrdiff_t>(i));
    shuffle(prefix, rng);
    std::copy(prefix.begin(), prefix.end(), inst.x.begin());
    EXPECT_EQ(oracle_two_sum(inst)[i], y[i]);
  }
}

TEST(TwoSum, ModulusPresets) {
  EXPECT_EQ(two_sum_modulus(8, ModulusPreset::kLinear), 8);
  EXPECT_EQ(two_sum_modulus(8, ModulusPreset::kSquare), 64);
}

TEST(FuncComp, SpecArithmetic) {
  const FuncCompSpec spec{3, 2, {3, 2}};
  EXPECT_EQ(spec.N(0), 2);
  EXPECT_EQ(spec.N(1), 6);
  EXPECT_EQ(spec.N(2), 12);
  EXPECT_EQ(spec.prompt_length(), 2 + 2 + 6 + 12);
  EXPECT_EQ(spec.pair_index(1, 3, 2), 2 * 2 + 2);
  for (int l = 1; l <= 2; ++l) EXPECT_EQ(spec.N(l) / spec.N(l - 1), spec.n[static_cast<std::size_t>(l - 1)]);
}

TEST(FuncComp, IdentityChainEmbedsStart) {
  const FuncCompSpec spec{3, 2, {2, 3}};
  FuncCompInstance inst{spec, 2, {}, {2, 3}};
  for (int l = 1; l <= 3; ++l) {
    std::vector<std::int64_t> table(static_cast<std::size_t>(spec.N(l - 1)));
    for (std::size_t k = 0; k < table.size(); ++k) table[k] = static_cast<std::int64_t>(k) + 1;
    inst.z.push_back(table);
  }
  // Identity tables compose the pairings: i_1 = 2, i_2 = (2-1)*2 + 2 = 4, i_3 = (3-1)*4 + 4 = 12.
  EXPECT_EQ(oracle_funccomp(inst), 12);
}

TEST(FuncComp, HandTrace) {
  // i_0 = 2; i_1 = z_1(2) = 1; i_2 = z_2((2-1)*2 + 1 = 3) = 4.
  const FuncCompInstance inst{toy_spec(), 2, {{2, 1}, {3, 1, 4, 2}}, {2}};
  EXPECT_EQ(funccomp_trace(inst), (std::vector<std::int64_t>{2, 1, 4}));
  EXPECT_EQ(oracle_funccomp(inst), 4);
}

TEST(FuncComp, ExhaustiveAgainstReferenceSmall) {
  // m = 2, n_1 = 1: every instance.
  const FuncCompSpec spec{2, 2, {1}};
  int count = 0;
  for (std::int64_t z0 = 1; z0 <= 2; ++z0) {
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        const FuncCompInstance inst{spec, z0, {{a % 2 + 1, a / 2 + 1}, {b % 2 + 1, b / 2 + 1}}, {1}};
        EXPECT_EQ(oracle_funccomp(inst), compose_reference(inst, 2));
        ++count;
      }
    }
  }
  EXPECT_EQ(count, 32);
}

TEST(FuncComp, SampledAgainstReference) {
  Rng rng(6);
  GenParams gp;
  gp.funccomp = toy_spec();
  for (int t = 0; t < 300; ++t) {
    const auto inst = std::get<FuncCompInstance>(gen_instance(TaskKind::kFuncComp, gp, rng()));
    EXPECT_EQ(oracle_funccomp(inst), compose_reference(inst, 2));
  }
  gp.funccomp = FuncCompSpec{3, 2, {2, 2}};
  for (int t = 0; t < 100; ++t) {
    const auto inst = std::get<FuncCompInstance>(gen_instance(TaskKind::kFuncComp, gp, rng()));
    EXPECT_EQ(oracle_funccomp(inst), compose_reference(inst, 3));
  }
}

TEST(FuncComp, QueryIndexRoundTrip) {
  const FuncCompSpec spec{3, 2, {3, 4}};
  for (std::int64_t k = 1; k <= spec.query_count(); ++k) {
    EXPECT_EQ(funccomp_query_index(spec, funccomp_query_from_index(spec, k)), k);
  }
}

TEST(Generation, Deterministic) {
  EXPECT_EQ(gen_instance(TaskKind::kEva, {5}, 7), gen_instance(TaskKind::kEva, {5}, 7));
  EXPECT_NE(gen_instance(TaskKind::kEva, {16}, 7), gen_instance(TaskKind::kEva, {16}, 8));
  GenParams gp;
  gp.funccomp = toy_spec();
  EXPECT_EQ(gen_instance(TaskKind::kFuncComp, gp, 3), gen_instance(TaskKind::kFuncComp, gp, 3));
}

TEST(Generation, PerComIsBijective) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = std::get<PerComInstance>(gen_instance(TaskKind::kPerCom, {6}, seed));
    EXPECT_NO_THROW(inst.validate());
    auto s = inst.sigma;
    std::sort(s.begin(), s.end());
    EXPECT_EQ(s, (std::vector<std::int64_t>{1, 2, 3, 4, 5, 6}));
  }
}

TEST(Generation, FuncCompOracleRuns) {
  GenParams gp;
  gp.funccomp = toy_spec();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = gen_instance(TaskKind::kFuncComp, gp, seed);
    const auto out = oracle(inst);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_GE(out[0], 1);
    EXPECT_LE(out[0], 4);
  }
}

TEST(Generation, RejectsBadSizes) {
  EXPECT_THROW(gen_instance(TaskKind::kEva, {0}, 1), ValidationError);
  GenParams gp;
  gp.funccomp = FuncCompSpec{1, 2, {}};
  EXPECT_THROW(gen_instance(TaskKind::kFuncComp, gp, 1), ValidationError);
}

TEST(Prompt, Lengths) {
  const PromptLayout layout;
  GenParams gp;
  gp.funccomp = toy_spec();
  EXPECT_EQ(encode_prompt(gen_instance(TaskKind::kFuncComp, gp, 1), layout).size(), 8u);
  EXPECT_EQ(encode_prompt(gen_instance(TaskKind::kEva, {5}, 1), layout).size(), 6u);
  EXPECT_EQ(encode_prompt(gen_instance(TaskKind::kPerCom, {5}, 1), layout).size(), 10u);
  EXPECT_EQ(encode_prompt(gen_instance(TaskKind::kTwoSum, {5}, 1), layout).size(), 6u);
}

TEST(Prompt, FuncCompOrder) {
  const FuncCompInstance inst{toy_spec(), 2, {{2, 1}, {3, 1, 4, 2}}, {2}};
  const auto seq = encode_prompt(inst, PromptLayout{});
  // z_2 (4 tokens), z_1 (2 tokens), z_0, w.
  const std::vector<std::int64_t> owners{2, 2, 2, 2, 1, 1, 0, -1};
  for (std::size_t i = 0; i < seq.size(); ++i) {
    EXPECT_EQ(seq[i][kSlotOwner].value(), owners[i]) << i;
    EXPECT_EQ(seq[i][kSlotBias].value(), 1);
  }
  EXPECT_EQ(seq[6][kSlotValue].value(), 2);
}

TEST(Prompt, RoundTrip) {
  Rng rng(7);
  const PromptLayout layout;
  GenParams gp;
  gp.funccomp = FuncCompSpec{3, 2, {2, 3}};
  for (auto task : {TaskKind::kEva, TaskKind::kPerCom, TaskKind::kTwoSum, TaskKind::kFuncComp}) {
    for (int t = 0; t < 20; ++t) {
      gp.n = static_cast<int>(uniform_int(rng, 1, 12));
      const auto inst = gen_instance(task, gp, rng());
      EXPECT_EQ(decode_prompt(shape_of(inst), encode_prompt(inst, layout)), inst);
    }
  }
}

TEST(Prompt, UnrepresentableThrows) {
  PromptLayout layout;
  layout.precision = PrecisionConfig{4, 0};  // values up to 7
  EXPECT_THROW(encode_prompt(gen_instance(TaskKind::kEva, {9}, 1), layout), PrecisionError);
}

TEST(Prompt, PlayerPiecesConcatenate) {
  Rng rng(8);
  GenParams gp;
  gp.funccomp = FuncCompSpec{3, 2, {2, 2}};
  const PromptLayout layout;
  for (int t = 0; t < 10; ++t) {
    const auto inst = std::get<FuncCompInstance>(gen_instance(TaskKind::kFuncComp, gp, rng()));
    Sequence joined;
    for (int player = 3; player >= -1; --player) {
      const auto piece = encode_funccomp_player(inst.spec, player, funccomp_player_input(inst, player), layout);
      joined.insert(joined.end(), piece.begin(), piece.end());
    }
    EXPECT_EQ(joined, encode_prompt(inst, layout));
    for (int player = -1; player <= 3; ++player) {
      EXPECT_EQ(funccomp_with_player_input(inst, player, funccomp_player_input(inst, player)), inst);
    }
  }
}
