#include <gtest/gtest.h>

#include <set>

#include <attnlab/comm.hpp>
#include <attnlab/errors.hpp>

#include "support.hpp"

using namespace attnlab;
using namespace testing_support;

namespace {

ProtocolSpec rnn_eva(int n, std::size_t bits, int m = 1, int p = 4) {
  ProtocolSpec s;
  s.kind = ProtocolKind::kRnnEva;
  s.n = n;
  s.m = m;
  s.p = p;
  s.message_bits = bits;
  return s;
}

ProtocolSpec sparse_spec(std::size_t bits) {
  ProtocolSpec s;
  s.kind = ProtocolKind::kSparseTwoSum;
  s.n = 8;
  s.B = 4;
  s.k = 1;
  s.message_bits = bits;
  return s;
}

ProtocolSpec toy_hybrid(int H, int d, int p, std::vector<int> a) {
  ProtocolSpec s;
  s.kind = ProtocolKind::kHybridFuncComp;
  s.L = 2;
  s.H = H;
  s.d = d;
  s.p = p;
  s.funccomp = FuncCompSpec{2, 2, {2}};
  s.a = std::move(a);
  return s;
}

std::set<std::int64_t> as_set(const std::vector<std::int64_t>& v) { return {v.begin(), v.end()}; }

// Every message is `bits` zero bits; the answer is always 1.
StrategyBundle constant_bundle(std::size_t bits) {
  StrategyBundle b;
  b.name = "constant";
  b.message = [bits](const InfoSet&, const ChannelSlot&) { return BitString(bits); };
  b.select = [](const InfoSet&) { return std::vector<int>{}; };
  b.output = [](const InfoSet&) { return Output{1}; };
  return b;
}

const PrecisionConfig kLayer{10, 3};
const PromptLayout kLayout{4, kLayer};

std::size_t bob_tokens(const Instance& inst) {
  if (const auto* p = std::get_if<PerComInstance>(&inst)) return static_cast<std::size_t>(p->n);
  return 1;
}

Sequence tail(const Sequence& s, std::size_t n) { return Sequence(s.end() - static_cast<std::ptrdiff_t>(n), s.end()); }

// Reference answers straight from the attention module.
using StackFn = std::function<Sequence(const Sequence&)>;

Output reference(const Instance& inst, const StackFn& stack, const TokenDecoder& dec, bool cot) {
  Sequence seq = stack(encode_prompt(inst, kLayout));
  if (!cot) return dec(tail(seq, bob_tokens(inst)));
  Sequence ext = encode_prompt(inst, kLayout);
  ext.push_back(seq.back());
  return dec(tail(stack(ext), 1));
}

std::vector<Instance> two_party_instances(ProtocolKind kind, int n, std::int64_t M, int count, std::uint64_t seed) {
  std::vector<Instance> out;
  GenParams gp;
  gp.n = n;
  gp.modulus = M;
  for (int i = 0; i < count; ++i) out.push_back(gen_instance(task_of(kind), gp, seed + static_cast<std::uint64_t>(i)));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Specs and budgets

TEST(ProtocolKind, NamesRoundTrip) {
  for (auto k : {ProtocolKind::kRnnEva, ProtocolKind::kLogLinearEva, ProtocolKind::kRnnPerCom,
                 ProtocolKind::kLogLinearPerCom, ProtocolKind::kLinearTwoSum, ProtocolKind::kLogLinearTwoSum,
                 ProtocolKind::kSparseTwoSum, ProtocolKind::kHybridFuncComp}) {
    EXPECT_EQ(parse_protocol_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_protocol_kind("rnn"), ValidationError);
}

TEST(Budget, RnnRoundsAndCot) {
  ProtocolSpec s;
  s.kind = ProtocolKind::kRnnEva;
  s.L = 3;
  s.H = 2;
  s.m = 3;
  s.d = 5;
  s.p = 8;
  s.n = 4;
  auto r = budget(s);
  EXPECT_EQ(r.primary_message_bits, 2u * 3 * 8);
  EXPECT_EQ(r.total_bits, 3u * 2 * 3 * 8);
  EXPECT_EQ(r.alice_bits, r.total_bits);
  EXPECT_EQ(*r.distinguishable, 256);
  EXPECT_FALSE(r.pigeonhole_forced);
  s.cot = true;
  r = budget(s);
  EXPECT_EQ(r.cot_message_bits, 2u * (3 + 5) * 8);
  EXPECT_EQ(r.total_bits, 3u * (48 + 128));
  EXPECT_EQ(r.output_view_bits, 3u * 128);
  EXPECT_EQ(r.channels.size(), 6u);
}

TEST(Budget, LinearLogLinearAndSparse) {
  ProtocolSpec s;
  s.kind = ProtocolKind::kLinearTwoSum;
  s.H = 2;
  s.d = 3;
  s.p = 7;
  s.n = 5;
  s.modulus = 25;
  EXPECT_EQ(budget(s).primary_message_bits, 2u * 3 * 4 * 7);
  s.cot = true;
  EXPECT_EQ(budget(s).cot_message_bits, 2u * 3 * 4 * 7 + 2 * 3 * 7);
  EXPECT_EQ(budget(s).distinguishable_formula, "C(M, n)");
  EXPECT_EQ(*budget(s).distinguishable, 53130);

  s.cot = false;
  s.kind = ProtocolKind::kLogLinearTwoSum;
  // R(5) = ceil(log2 5) + 2 = 5 live states.
  EXPECT_EQ(budget(s).primary_message_bits, 5u * 2 * 9 * 7);
  s.cot = true;
  // CoT leg: states after position n + 1 = 6, plus the read-out vector.
  EXPECT_EQ(budget(s).cot_message_bits, 5u * 2 * 9 * 7 + 2 * 3 * 7);

  s.kind = ProtocolKind::kLogLinearPerCom;
  s.n = 4;
  // Bob's stream ends at 2n = 8: R(8) = 5.
  EXPECT_EQ(budget(s).cot_message_bits, 5u * 2 * 9 * 7 + 2 * 3 * 7);

  const auto sp = budget(sparse_spec(7));
  EXPECT_EQ(sp.channels.size(), 2u);
  EXPECT_EQ(sp.primary_message_bits, 7u);
  EXPECT_EQ(*sp.distinguishable, 163);
  EXPECT_TRUE(sp.pigeonhole_forced);
  EXPECT_FALSE(budget(sparse_spec(8)).pigeonhole_forced);
  ProtocolSpec dflt = sparse_spec(0);
  dflt.message_bits.reset();
  dflt.H = 2;
  dflt.d = 3;
  dflt.p = 5;
  EXPECT_EQ(budget(dflt).primary_message_bits, 30u);
}

TEST(Budget, PigeonholeThresholds) {
  EXPECT_TRUE(budget(rnn_eva(3, 4)).pigeonhole_forced);   // 16 < 27
  EXPECT_FALSE(budget(rnn_eva(2, 8)).pigeonhole_forced);  // 256 >= 4
  EXPECT_FALSE(budget(rnn_eva(3, 5)).pigeonhole_forced);  // 32 >= 27
}

TEST(Budget, HybridClosedForm) {
  const auto s = toy_hybrid(2, 3, 5, {1, 2});
  const auto r = budget(s);
  const std::size_t soft = 2 * 2 * 3 * 5, lin = 2 * 3 * 4 * 5;
  // m_(i): 1 for players -1 and 0, N_0 = 2 for player 1.
  std::size_t per_epoch_soft = 0;
  for (int i = -1; i < s.L; ++i) per_epoch_soft += static_cast<std::size_t>(s.L - i) * soft * s.input_share(i);
  EXPECT_EQ(r.total_bits, 2 * per_epoch_soft + (1 + 2) * 3 * lin);
  for (const auto& c : r.channels) {
    if (c.kind == kMsgSoft) EXPECT_EQ(c.budget, soft * s.input_share(c.to));
    if (c.kind == kMsgLinear) {
      EXPECT_EQ(c.budget, lin);
      EXPECT_EQ(c.to, c.from - 1);
    }
    if (c.kind == kMsgForward) EXPECT_FALSE(c.budgeted);
  }
  EXPECT_EQ(r.primary_message_bits, soft);
  EXPECT_FALSE(r.distinguishable.has_value());
}

TEST(Spec, Validation) {
  ProtocolSpec s = sparse_spec(4);
  s.B = 3;
  EXPECT_THROW(s.validate(), ValidationError);
  s = sparse_spec(4);
  s.k = 3;
  EXPECT_THROW(s.validate(), ValidationError);
  s = toy_hybrid(1, 1, 8, {1});
  EXPECT_THROW(s.validate(), ValidationError);
  s = sparse_spec(4);
  s.cot = true;
  EXPECT_THROW(s.validate(), ValidationError);
  EXPECT_EQ(toy_hybrid(1, 1, 8, {0, 0}).players().size(), 4u);
}

// ---------------------------------------------------------------------------
// Engine

TEST(Engine, PadsShortPayloadsAndRejectsLongOnes) {
  const auto spec = rnn_eva(3, 4);
  const Instance inst = EvaInstance{3, {1, 2, 3}, 2};
  auto rr = run_protocol(spec, constant_bundle(1), inst);
  ASSERT_EQ(rr.transcript.size(), schedule(spec).size());
  EXPECT_EQ(rr.transcript[0].payload.size(), 4u);
  EXPECT_THROW(run_protocol(spec, constant_bundle(5), inst), ProtocolViolation);
  EXPECT_THROW(run_protocol(spec, constant_bundle(1), Instance{EvaInstance{2, {1, 2}, 1}}), ValidationError);
}

TEST(Engine, PlayersOnlySeeTheirInformationSet) {
  const auto spec = [] {
    auto s = rnn_eva(3, 4);
    s.L = 2;
    s.cot = true;
    return s;
  }();
  const Instance inst = EvaInstance{3, {3, 1, 2}, 2};
  std::vector<std::pair<int, std::size_t>> seen;
  StrategyBundle b = constant_bundle(0);
  b.message = [&](const InfoSet& info, const ChannelSlot& slot) {
    seen.emplace_back(info.player(), info.received().size());
    if (slot.from == kAlice) {
      EXPECT_EQ(info.input(), (std::vector<std::int64_t>{3, 1, 2}));
      EXPECT_TRUE(info.received().empty());
    } else {
      EXPECT_EQ(info.input(), (std::vector<std::int64_t>{2}));
      for (const auto& m : info.received()) EXPECT_EQ(m.from, kAlice);
    }
    EXPECT_FALSE(info.has_forwarded());
    return BitString(1);
  };
  b.output = [](const InfoSet& info) {
    EXPECT_EQ(info.player(), kCharles);
    EXPECT_TRUE(info.input().empty());
    for (const auto& m : info.received()) EXPECT_EQ(m.from, kBob);
    return Output{1};
  };
  run_protocol(spec, b, inst);
  const std::vector<std::pair<int, std::size_t>> want{{kAlice, 0}, {kBob, 1}, {kAlice, 0}, {kBob, 2}};
  EXPECT_EQ(seen, want);
}

TEST(Engine, ForwardedSetOutOfScopeIsAViolation) {
  const auto spec = rnn_eva(3, 4);
  StrategyBundle b = constant_bundle(0);
  b.message = [](const InfoSet& info, const ChannelSlot&) {
    (void)info.forwarded();
    return BitString();
  };
  EXPECT_THROW(run_protocol(spec, b, Instance{EvaInstance{3, {1, 1, 1}, 1}}), ForgetfulnessViolation);
}

TEST(Engine, HybridForwardLegsAreLoggedNotDelivered) {
  const auto spec = toy_hybrid(1, 1, 8, {1, 0});
  const auto inst = gen_instance(TaskKind::kFuncComp, GenParams{4, {}, ModulusPreset::kLinear, spec.funccomp}, 3);
  std::size_t soft_calls = 0;
  StrategyBundle b = constant_bundle(0);
  b.message = [&](const InfoSet& info, const ChannelSlot& slot) {
    if (slot.kind == kMsgSoft) {
      ++soft_calls;
      EXPECT_EQ(info.forwarded().player(), slot.to);
      for (const auto& m : info.received()) EXPECT_NE(m.kind, kMsgForward);
    } else {
      EXPECT_FALSE(info.has_forwarded());
    }
    return BitString();
  };
  b.output = [](const InfoSet& info) {
    for (const auto& m : info.received()) EXPECT_NE(m.kind, kMsgForward);
    return Output{1};
  };
  const auto rr = run_protocol(spec, b, inst);
  EXPECT_EQ(rr.transcript.size(), schedule(spec).size());
  EXPECT_EQ(soft_calls, 2u * 6);  // two epochs, 3 + 2 + 1 pairs
  for (const auto& m : rr.transcript) {
    if (m.kind == kMsgForward) EXPECT_FALSE(m.payload.empty());
  }
}

TEST(Fingerprint, EmptyDeterministicAndSensitive) {
  EXPECT_TRUE(transcript_fingerprint({}, kBob).empty());
  const auto spec = rnn_eva(3, 4);
  const auto bundle = random_hash_strategy(spec, 7);
  const Instance inst = EvaInstance{3, {2, 3, 1}, 1};
  const auto a = run_protocol(spec, bundle, inst).transcript;
  const auto b = run_protocol(spec, bundle, inst).transcript;
  EXPECT_EQ(transcript_fingerprint(a, kBob), transcript_fingerprint(b, kBob));
  EXPECT_TRUE(transcript_fingerprint(a, kAlice).empty());
  for (std::size_t bit = 0; bit < a[0].payload.size(); ++bit) {
    Transcript mutated = a;
    BitString p;
    for (std::size_t t = 0; t < a[0].payload.size(); ++t) p.push_back(t == bit ? !a[0].payload[t] : a[0].payload[t]);
    mutated[0].payload = p;
    EXPECT_NE(transcript_fingerprint(mutated, kBob), transcript_fingerprint(a, kBob));
  }
}

// ---------------------------------------------------------------------------
// Collision search

TEST(Collision, EvaThreeWithFourBitsAlwaysCollides) {
  for (auto [m, p] : {std::pair{1, 4}, std::pair{2, 2}}) {
    const auto spec = rnn_eva(3, 4, m, p);
    const auto bundles = shipped_strategies(spec);
    ASSERT_EQ(bundles.size(), 3u);
    for (const auto& b : bundles) {
      const auto cs = find_collision(spec, b);
      EXPECT_EQ(cs.runs, 27u * 3);
      EXPECT_LE(cs.max_classes, 16u) << b.name;
      ASSERT_TRUE(cs.witness.has_value()) << b.name;
      EXPECT_TRUE(verify_witness(*cs.witness, spec, b)) << b.name;
      const auto chk = check_witness(*cs.witness, spec, b);
      EXPECT_TRUE(chk.fingerprints_equal && chk.oracles_differ && chk.protocol_errs);
    }
  }
}

TEST(Collision, TamperedQueryFailsVerification) {
  const auto spec = rnn_eva(3, 4);
  const auto b = truncation_strategy(spec);
  auto w = *find_collision(spec, b).witness;
  const auto& fa = std::get<EvaInstance>(w.a).f;
  const auto& fb = std::get<EvaInstance>(w.b).f;
  for (std::int64_t x = 1; x <= 3; ++x) {
    if (fa[static_cast<std::size_t>(x - 1)] == fb[static_cast<std::size_t>(x - 1)]) {
      auto t = w;
      t.query = {x};
      EXPECT_FALSE(verify_witness(t, spec, b));
    }
  }
}

TEST(Collision, InjectiveBudgetGivesNone) {
  const auto spec = rnn_eva(2, 8);
  const auto b = strategy_by_name(spec, "injective");
  const auto cs = find_collision(spec, b);
  EXPECT_FALSE(cs.witness.has_value());
  EXPECT_EQ(cs.max_class_size, 1u);
  EXPECT_THROW(strategy_by_name(rnn_eva(3, 4), "injective"), ValidationError);
}

TEST(Collision, PigeonholeSoundness) {
  // Whenever the sender space outgrows 2^(fingerprint bits), some class has two members.
  for (std::size_t bits : {1u, 2u, 3u, 4u}) {
    for (int n : {2, 3}) {
      const auto spec = rnn_eva(n, bits);
      for (const auto& b : {random_hash_strategy(spec, bits), truncation_strategy(spec)}) {
        const auto cs = find_collision(spec, b);
        EXPECT_LE(cs.max_classes, std::size_t{1} << cs.fingerprint_bits);
        if (cs.sender_inputs > (std::size_t{1} << cs.fingerprint_bits)) {
          EXPECT_GE(cs.max_class_size, 2u);
        }
      }
    }
  }
}

TEST(Collision, PerComAndTwoSumSpaces) {
  ProtocolSpec s;
  s.kind = ProtocolKind::kRnnPerCom;
  s.n = 3;
  s.message_bits = 2;
  const auto cs = find_collision(s, truncation_strategy(s));
  EXPECT_EQ(cs.sender_inputs, 6u);
  ASSERT_TRUE(cs.witness.has_value());
  EXPECT_TRUE(verify_witness(*cs.witness, s, truncation_strategy(s)));

  s.kind = ProtocolKind::kLinearTwoSum;
  s.n = 3;
  s.modulus = 4;
  s.message_bits = 3;
  const auto space = enumerate_inputs(s);
  EXPECT_EQ(space.sender.size(), 20u);  // C(4 + 3 - 1, 3)
  const auto ts = find_collision(s, random_hash_strategy(s, 1), space);
  ASSERT_TRUE(ts.witness.has_value());
  EXPECT_TRUE(verify_witness(*ts.witness, s, random_hash_strategy(s, 1)));
}

TEST(Collision, ResourceCaps) {
  EXPECT_THROW(enumerate_inputs(rnn_eva(5, 4)), ResourceError);
  const auto spec = rnn_eva(3, 4);
  EXPECT_THROW(find_collision(spec, truncation_strategy(spec), enumerate_inputs(spec), 10), ResourceError);
  EXPECT_THROW(enumerate_inputs(toy_hybrid(1, 1, 8, {0, 0})), ValidationError);
}

// ---------------------------------------------------------------------------
// Sparse

TEST(Sparse, BlockCollisionsBelowEightBits) {
  for (std::size_t c = 1; c <= 7; ++c) {
    const auto spec = sparse_spec(c);
    for (const auto& b : shipped_strategies(spec)) {
      const auto bc = find_block_collision(spec, b);
      ASSERT_TRUE(bc.has_value()) << b.name << " c=" << c;
      EXPECT_NE(as_set(bc->a), as_set(bc->b));
      EXPECT_EQ(bc->distinct_sets, 162u);
      EXPECT_LE(bc->classes, std::size_t{1} << c);

      const auto attack = find_sparse_attack(spec, b);
      ASSERT_TRUE(attack.has_value()) << b.name << " c=" << c;
      const auto& adv = attack->adversary;
      EXPECT_NE(oracle_two_sum(adv.with_a).back(), oracle_two_sum(adv.with_b).back());
      // The last player cannot tell the fillings apart.
      const auto ra = run_protocol(spec, b, adv.with_a);
      const auto rb = run_protocol(spec, b, adv.with_b);
      EXPECT_EQ(transcript_fingerprint(ra.transcript, spec.block_players()),
                transcript_fingerprint(rb.transcript, spec.block_players()));
      EXPECT_EQ(ra.output, rb.output);
    }
  }
}

TEST(Sparse, InjectiveMaskAtEightBits) {
  const auto spec = sparse_spec(8);
  EXPECT_FALSE(find_block_collision(spec, bitmask_strategy(spec)).has_value());
}

TEST(Sparse, AdversaryRecipe) {
  const auto adv = sparse_adversary({1, 2, 3, 4}, {1, 2, 3, 5}, 8, 8, 4, {0});
  EXPECT_EQ(adv.v, 4);
  EXPECT_EQ(adv.last_token, 4);
  EXPECT_EQ(adv.with_a.x, (std::vector<std::int64_t>{1, 2, 3, 5, 1, 2, 3, 4, 4}));
  EXPECT_EQ(adv.with_b.x, (std::vector<std::int64_t>{1, 2, 3, 5, 1, 2, 3, 5, 4}));
  EXPECT_EQ(oracle_two_sum(adv.with_a).back(), 1);
  EXPECT_EQ(oracle_two_sum(adv.with_b).back(), 0);
  EXPECT_THROW(sparse_adversary({1, 2, 3, 4}, {1, 2, 3, 4}, 8, 8, 4, {}), ValidationError);
  EXPECT_THROW(sparse_adversary({1, 2, 2, 2}, {1, 2, 3, 4}, 8, 8, 4, {}), ValidationError);
  EXPECT_THROW(sparse_adversary({1, 2, 3, 4}, {1, 2, 3, 5}, 8, 8, 4, {0, 1}), ValidationError);
  // v = M maps to a last token of M.
  EXPECT_EQ(sparse_adversary({8, 8, 8, 8}, {1, 1, 1, 1}, 8, 8, 4, {}).last_token, 8);
}

TEST(Sparse, SelectionIsValidated) {
  const auto spec = sparse_spec(4);
  auto b = bitmask_strategy(spec);
  b.select = [](const InfoSet&) { return std::vector<int>{2}; };
  const Instance inst = TwoSumInstance{8, 8, {1, 2, 3, 4, 5, 6, 7, 8, 1}};
  EXPECT_THROW(run_protocol(spec, b, inst), ProtocolViolation);
  b.select = [](const InfoSet&) { return std::vector<int>{0, 1}; };
  EXPECT_THROW(run_protocol(spec, b, inst), ProtocolViolation);
  b.select = [](const InfoSet&) { return std::vector<int>{1}; };
  const auto rr = run_protocol(spec, b, inst);
  ASSERT_EQ(rr.transcript.size(), 3u);
  EXPECT_EQ(rr.transcript.back().kind, kMsgSelect);
  EXPECT_EQ(rr.transcript.back().from, 1);
}

// ---------------------------------------------------------------------------
// CoT

TEST(Cot, CharlesIsAFunctionOfBob) {
  auto spec = rnn_eva(3, 4);
  spec.cot = true;
  spec.d = 4;
  spec.L = 2;
  for (const auto& b : shipped_strategies(spec)) {
    for (std::int64_t x = 1; x <= 3; ++x) {
      EXPECT_TRUE(cot_replay_check(spec, b, EvaInstance{3, {2, 3, 1}, x})) << b.name;
    }
  }
  // Bob's messages depend on a counter outside his information set, so the
  // replay disagrees with the recorded run.
  auto counter = std::make_shared<int>(0);
  StrategyBundle leaky = constant_bundle(0);
  leaky.message = [counter](const InfoSet&, const ChannelSlot& slot) {
    BitString b;
    b.push_back(slot.from == kBob && ++*counter > 2);
    return b;
  };
  EXPECT_FALSE(cot_replay_check(spec, leaky, EvaInstance{3, {1, 2, 3}, 1}));
}

TEST(Cot, CollisionStillForcedWithCharles) {
  auto spec = rnn_eva(3, 4);
  spec.cot = true;
  spec.d = 4;
  ASSERT_EQ(shipped_strategies(spec).size(), 3u);
  for (const auto& b : shipped_strategies(spec)) {
    const auto cs = find_collision(spec, b);
    ASSERT_TRUE(cs.witness.has_value()) << b.name;
    EXPECT_TRUE(verify_witness(*cs.witness, spec, b)) << b.name;
  }
}

// ---------------------------------------------------------------------------
// Honest strategies against the attention module

TEST(Honest, RnnMatchesStack) {
  const PrecisionConfig state{24, 3};
  std::vector<RnnLayerSpec> layers{rnn_running_sum(4, 3, state, kLayer), rnn_running_sum(4, 3, state, kLayer)};
  const StackFn stack = [&](const Sequence& s) {
    Sequence out = s;
    for (const auto& l : layers) out = rnn_run(l, out);
    return out;
  };
  for (auto kind : {ProtocolKind::kRnnEva, ProtocolKind::kRnnPerCom}) {
    for (bool cot : {false, true}) {
      ProtocolSpec spec;
      spec.kind = kind;
      spec.L = 2;
      spec.n = 4;
      spec.m = 3;
      spec.d = 4;
      spec.p = 24;
      spec.cot = cot;
      const auto b = honest_rnn(spec, layers, kLayout, mantissa_decoder());
      for (const auto& inst : two_party_instances(kind, 4, 4, 10, 100)) {
        EXPECT_EQ(run_protocol(spec, b, inst).output, reference(inst, stack, mantissa_decoder(), cot))
            << to_string(kind) << " cot=" << cot;
      }
      if (cot) EXPECT_TRUE(cot_replay_check(spec, b, two_party_instances(kind, 4, 4, 1, 7)[0]));
    }
  }
}

TEST(Honest, LinearMatchesStack) {
  Rng rng(71);
  std::vector<LayerConfig> layers;
  for (int l = 0; l < 2; ++l) {
    auto c = random_layer(rng, LayerKind::kLinear, 2, 2, kLayer, 6);
    c.feature_map = "relu_plus_one";
    c.mlp = "residual_add";
    layers.push_back(c);
  }
  const StackFn stack = [&](const Sequence& s) {
    Sequence out = s;
    for (const auto& l : layers) out = linear_layer(out, l);
    return out;
  };
  for (bool cot : {false, true}) {
    ProtocolSpec spec;
    spec.kind = ProtocolKind::kLinearTwoSum;
    spec.L = 2;
    spec.H = 2;
    spec.d = 2;
    spec.p = 48;
    spec.n = 4;
    spec.modulus = 5;
    spec.cot = cot;
    const auto b = honest_linear(spec, layers, kLayout, mantissa_decoder());
    for (const auto& inst : two_party_instances(spec.kind, 4, 5, 10, 200)) {
      EXPECT_EQ(run_protocol(spec, b, inst).output, reference(inst, stack, mantissa_decoder(), cot)) << cot;
    }
  }
}

TEST(Honest, LogLinearMatchesStack) {
  Rng rng(72);
  std::vector<LayerConfig> layers;
  for (int l = 0; l < 2; ++l) {
    auto c = random_layer(rng, LayerKind::kLogLinear, 1, 4, kLayer, 6);
    c.mlp = "residual_add";
    layers.push_back(c);
  }
  const StackFn stack = [&](const Sequence& s) {
    Sequence out = s;
    for (const auto& l : layers) out = loglinear_layer(out, l);
    return out;
  };
  for (auto kind : {ProtocolKind::kLogLinearEva, ProtocolKind::kLogLinearPerCom, ProtocolKind::kLogLinearTwoSum}) {
    for (bool cot : {false, true}) {
      ProtocolSpec spec;
      spec.kind = kind;
      spec.L = 2;
      spec.H = 1;
      spec.d = 4;
      spec.p = 48;
      spec.n = 4;
      spec.modulus = 5;
      spec.cot = cot;
      const auto b = honest_loglinear(spec, layers, kLayout, mantissa_decoder());
      for (const auto& inst : two_party_instances(kind, 4, 5, 6, 300)) {
        const auto rr = run_protocol(spec, b, inst);
        EXPECT_EQ(rr.output, reference(inst, stack, mantissa_decoder(), cot)) << to_string(kind) << " " << cot;
      }
    }
  }
}

TEST(Honest, SparseMatchesLayer) {
  Rng rng(73);
  for (auto [B, k] : {std::pair{2, 1}, std::pair{1, 2}, std::pair{4, 1}}) {
    auto layer = random_layer(rng, LayerKind::kSparse, 1, 4, kLayer, 8);
    layer.sparse.B = B;
    layer.sparse.k = k;
    layer.sparse.lambda = Rational(1, 2);
    ProtocolSpec spec;
    spec.kind = ProtocolKind::kSparseTwoSum;
    spec.n = 4;
    spec.modulus = 5;
    spec.B = B;
    spec.k = k;
    spec.d = 4;
    spec.p = 10;
    const auto b = honest_sparse(spec, layer, kLayout, mantissa_decoder());
    for (const auto& inst : two_party_instances(spec.kind, 4, 5, 12, 400)) {
      const Sequence out = sparse_layer(encode_prompt(inst, kLayout), layer);
      EXPECT_EQ(run_protocol(spec, b, inst).output, mantissa_decoder()(tail(out, 1))) << "B=" << B;
    }
  }
}

namespace {

std::vector<LayerConfig> hybrid_layers(Rng& rng, const ProtocolSpec& spec) {
  std::vector<LayerConfig> layers;
  for (int a : spec.a) {
    auto f = random_layer(rng, LayerKind::kFull, spec.H, spec.d, kLayer, 4);
    f.mlp = "residual_add";
    layers.push_back(f);
    for (int r = 0; r < a; ++r) {
      auto l = random_layer(rng, LayerKind::kLinear, spec.H, spec.d, kLayer, 4);
      l.feature_map = "relu_plus_one";
      l.mlp = "residual_add";
      layers.push_back(l);
    }
  }
  return layers;
}

FuncCompInstance toy_instance(const ProtocolSpec& spec, std::uint64_t seed) {
  GenParams gp;
  gp.funccomp = spec.funccomp;
  return std::get<FuncCompInstance>(gen_instance(TaskKind::kFuncComp, gp, seed));
}

}  // namespace

TEST(Honest, HybridMatchesStackWithExactBudgets) {
  Rng rng(74);
  const auto spec = toy_hybrid(1, 4, 128, {1, 1});
  const auto layers = hybrid_layers(rng, spec);
  auto b = honest_hybrid(spec, layers, kLayout, mantissa_decoder());
  // Record raw payload sizes before the engine pads them.
  auto raw = std::make_shared<std::vector<std::pair<std::size_t, std::size_t>>>();
  auto inner = b.message;
  b.message = [inner, raw](const InfoSet& info, const ChannelSlot& slot) {
    BitString p = inner(info, slot);
    raw->emplace_back(p.size(), slot.budget);
    return p;
  };
  const HybridSchedule sched{spec.L, spec.a};
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto inst = toy_instance(spec, seed);
    raw->clear();
    const auto rr = run_protocol(spec, b, inst);
    const Sequence out = hybrid_forward(encode_prompt(inst, kLayout), sched, layers);
    EXPECT_EQ(rr.output, mantissa_decoder()(tail(out, 1)));
    ASSERT_FALSE(raw->empty());
    for (const auto& [got, want] : *raw) EXPECT_EQ(got, want);
  }
}

TEST(Honest, HybridSoftTranscriptsIgnoreEarlierPlayers) {
  Rng rng(75);
  const auto spec = toy_hybrid(1, 4, 128, {1, 1});
  const auto layers = hybrid_layers(rng, spec);
  const auto b = honest_hybrid(spec, layers, kLayout, mantissa_decoder());
  const auto base = toy_instance(spec, 11);
  const auto other = toy_instance(spec, 12);
  std::map<int, std::vector<std::vector<std::int64_t>>> alt;
  for (int p = -1; p <= spec.L; ++p) {
    auto v = funccomp_player_input(other, p);
    if (v == funccomp_player_input(base, p)) v[0] = v[0] % 2 + 1;
    alt[p] = {v};
  }
  const auto rep = soft_transcript_independence_check(spec, b, base, alt);
  EXPECT_EQ(rep.runs, 16u);
  EXPECT_GT(rep.records_checked, 0u);
  EXPECT_EQ(rep.violations, 0u) << (rep.details.empty() ? "" : rep.details[0]);

  // Negative control: stash a bit of X_{-1} from the replies to player -1 and
  // smuggle it into the replies to player 0.
  auto stash = std::make_shared<std::map<int, bool>>();
  StrategyBundle cheat = b;
  cheat.message = [inner = b.message, stash](const InfoSet& info, const ChannelSlot& slot) {
    BitString p = inner(info, slot);
    if (slot.kind == kMsgSoft && slot.to == -1) (*stash)[slot.from] = info.forwarded().input()[0] % 2 == 1;
    if (slot.kind == kMsgSoft && slot.to == 0 && stash->count(slot.from)) {
      BitString q;
      for (std::size_t t = 0; t < p.size(); ++t) q.push_back(t == 0 ? (p[t] != (*stash)[slot.from]) : p[t]);
      return q;
    }
    return p;
  };
  const auto bad = soft_transcript_independence_check(spec, cheat, base, alt);
  EXPECT_GT(bad.violations, 0u);
  EXPECT_FALSE(bad.details.empty());
}

TEST(Honest, ValueSumRnnIsShippedAndHonest) {
  const auto spec = rnn_eva(3, 4, 2, 2);
  const auto b = honest_value_sum_rnn(spec);
  EXPECT_EQ(b.name, "honest-rnn");
  const auto rr = run_protocol(spec, b, EvaInstance{3, {1, 1, 1}, 1});
  // h = (3, 6) saturates to (1, 1) in 2-bit integers, read out as f(x) = 1.
  EXPECT_EQ(rr.output, (Output{1}));
  EXPECT_THROW(honest_value_sum_rnn(rnn_eva(3, 4, 4, 1)), ValidationError);
}
