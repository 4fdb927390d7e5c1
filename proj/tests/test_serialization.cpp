#include <gtest/gtest.h>

#include <json.hpp>

#include <attnlab/errors.hpp>
#include <attnlab/serialization.hpp>

#include "support.hpp"

using namespace attnlab;
using namespace testing_support;
using json = nlohmann::ordered_json;

namespace {

std::vector<Instance> sample_instances() {
  std::vector<Instance> out;
  GenParams gp;
  gp.n = 6;
  gp.funccomp = FuncCompSpec{2, 2, {3}};
  for (auto task : {TaskKind::kEva, TaskKind::kPerCom, TaskKind::kTwoSum, TaskKind::kFuncComp}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) out.push_back(gen_instance(task, gp, seed));
  }
  return out;
}

// Every leaf of a (nested) array must be a string.
void expect_strings(const json& arr) {
  ASSERT_TRUE(arr.is_array());
  for (const auto& v : arr) {
    if (v.is_array()) {
      expect_strings(v);
    } else {
      EXPECT_TRUE(v.is_string());
    }
  }
}

}  // namespace

TEST(InstanceJson, RoundTripsEveryTask) {
  for (const auto& inst : sample_instances()) {
    const auto text = instance_to_json(inst);
    EXPECT_EQ(instance_from_json(text), inst);
    EXPECT_EQ(instance_to_json(instance_from_json(text)), text);
  }
}

TEST(InstanceJson, CanonicalOrderAndDecimalStrings) {
  for (const auto& inst : sample_instances()) {
    const auto j = json::parse(instance_to_json(inst));
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    EXPECT_EQ(keys, (std::vector<std::string>{"task", "params", "payload"}));
    for (const auto& [k, v] : j.at("payload").items()) expect_strings(v);
    for (const auto& [k, v] : j.at("params").items()) {
      if (v.is_array()) {
        expect_strings(v);
      } else {
        EXPECT_TRUE(v.is_string()) << k;
      }
    }
  }
}

TEST(InstanceJson, RejectsMalformedInput) {
  EXPECT_THROW(instance_from_json("{"), ValidationError);
  EXPECT_THROW(instance_from_json(R"({"task":"eva","params":{"n":"3"}})"), ValidationError);
  EXPECT_THROW(instance_from_json(R"({"task":"eva","params":{"n":"3"},"payload":{"f":["1","2","9"],"x":["1"]}})"),
               ValidationError);
  EXPECT_THROW(instance_from_json(R"({"task":"eva","params":{"n":"3x"},"payload":{"f":["1","2","3"],"x":["1"]}})"),
               ValidationError);
  EXPECT_NO_THROW(
      instance_from_json(R"({"task":"eva","params":{"n":"3"},"payload":{"f":["1","2","3"],"x":["1"]}})"));
}

TEST(InstanceJson, OracleCsvMatchesOracle) {
  PerComInstance p{3, {2, 3, 1}, {3, 1, 2}};
  const auto csv = oracle_csv(p);
  const auto want = oracle(p);
  std::string expect = "task,index,output\n";
  for (std::size_t i = 0; i < want.size(); ++i) expect += "percom," + std::to_string(i + 1) + "," + std::to_string(want[i]) + "\n";
  EXPECT_EQ(csv, expect);
}

TEST(LayerJson, RoundTripsRandomLayers) {
  Rng rng(7);
  const PrecisionConfig cfg{12, 4};
  for (auto kind : {LayerKind::kFull, LayerKind::kLinear, LayerKind::kLogLinear, LayerKind::kSparse}) {
    auto layer = random_layer(rng, kind, 2, 3, cfg, 200);
    layer.feature_map = "relu_plus_one";
    layer.sparse.lambda = Rational(3, 8);
    const auto text = layer_to_json(layer);
    EXPECT_EQ(layer_from_json(text), layer);
    const auto j = json::parse(text);
    for (const auto& h : j.at("heads")) expect_strings(h.at("Q").at("data"));
  }
}

TEST(LayerJson, OffGridEntriesAndUnknownMapsAreRejected) {
  Rng rng(3);
  const PrecisionConfig cfg{8, 2};
  auto j = json::parse(layer_to_json(random_layer(rng, LayerKind::kLinear, 1, 2, cfg, 20)));
  auto bad = j;
  bad["heads"][0]["Q"]["data"][0] = "0.125";
  EXPECT_THROW(layer_from_json(bad.dump()), ValidationError);
  bad = j;
  bad["feature_map"] = "no_such_map";
  EXPECT_THROW(layer_from_json(bad.dump()), UnknownMapError);
  EXPECT_THROW(precision_from_json(R"({"total_bits":1,"frac_bits":0})"), ValidationError);
  EXPECT_EQ(precision_from_json(precision_to_json(cfg)), cfg);
}

TEST(ProtocolJson, SpecRoundTrip) {
  ProtocolSpec s;
  s.kind = ProtocolKind::kHybridFuncComp;
  s.L = 2;
  s.H = 1;
  s.d = 2;
  s.p = 24;
  s.funccomp = FuncCompSpec{2, 2, {2}};
  s.a = {1, 2};
  EXPECT_EQ(protocol_spec_to_json(protocol_spec_from_json(protocol_spec_to_json(s))), protocol_spec_to_json(s));
  ProtocolSpec e;
  e.kind = ProtocolKind::kRnnEva;
  e.n = 3;
  e.message_bits = 4;
  const auto back = protocol_spec_from_json(protocol_spec_to_json(e));
  EXPECT_EQ(back.message_bits, std::optional<std::size_t>(4));
  EXPECT_EQ(back.n, 3);
  EXPECT_THROW(protocol_spec_from_json(R"({"kind":"rnn_eva","n":0})"), ValidationError);
}

TEST(TranscriptJsonl, RoundTripsRealRuns) {
  ProtocolSpec s;
  s.kind = ProtocolKind::kRnnPerCom;
  s.n = 4;
  s.L = 2;
  s.message_bits = 11;
  const auto bundle = random_hash_strategy(s, 9);
  GenParams gp;
  gp.n = 4;
  const auto run = run_protocol(s, bundle, gen_instance(TaskKind::kPerCom, gp, 1));
  ASSERT_FALSE(run.transcript.empty());
  const auto text = transcript_to_jsonl(run.transcript);
  EXPECT_EQ(transcript_from_jsonl(text), run.transcript);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  EXPECT_EQ(lines, run.transcript.size());
  const auto first = json::parse(text.substr(0, text.find('\n')));
  EXPECT_EQ(first.at("nbits"), 11);
  EXPECT_EQ(first.at("bits_hex").get<std::string>().size(), 3u);
}

TEST(WitnessJson, RoundTripStillVerifies) {
  ProtocolSpec s;
  s.kind = ProtocolKind::kRnnEva;
  s.n = 3;
  s.m = 1;
  s.p = 4;
  s.message_bits = 4;
  const auto bundle = strategy_by_name(s, "truncation");
  const auto cs = find_collision(s, bundle);
  ASSERT_TRUE(cs.witness);
  const auto text = witness_to_json({s, bundle.name, *cs.witness});
  const auto back = witness_from_json(text);
  EXPECT_EQ(back.strategy, bundle.name);
  EXPECT_EQ(back.witness.a, cs.witness->a);
  EXPECT_EQ(back.witness.b, cs.witness->b);
  EXPECT_EQ(back.witness.fingerprint, cs.witness->fingerprint);
  EXPECT_TRUE(verify_witness(back.witness, back.spec, strategy_by_name(back.spec, back.strategy)));
  auto j = json::parse(text);
  j["a"]["payload"]["x"][0] = "9";
  EXPECT_THROW(witness_from_json(j.dump()), ValidationError);
}

TEST(ConcentrationJson, CarriesTheExactWeight) {
  const auto r = retrieval_concentration(16, 4, retrieval_precision(16), 5);
  const auto j = json::parse(concentration_to_json(r));
  for (const char* k : {"n", "D", "p", "match_weight_num", "match_weight_den", "bound", "quantizes_to_one"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  Rational w(mpz_class(j.at("match_weight_num").get<std::string>()), mpz_class(j.at("match_weight_den").get<std::string>()));
  w.canonicalize();
  EXPECT_EQ(w, r.match_weight);
  EXPECT_EQ(j.at("quantizes_to_one"), r.quantizes_to_one);
}

TEST(ParamsJson, EchoesParametersAsStrings) {
  const auto ps = derive_params(1, 2, 1, 2);
  const auto sched = default_hybrid_schedule(2);
  const auto j = json::parse(params_report_to_json(ps, verify_param_equalities(ps), check_size_bound(ps),
                                                   check_hybrid_budget(ps, sched), sched));
  EXPECT_EQ(j.at("log2_K"), "40");
  EXPECT_EQ(j.at("K"), "1099511627776");
  EXPECT_TRUE(j.at("all_checks_pass").get<bool>());
  for (const char* k : {"x", "n", "N"}) {
    for (const auto& e : j.at(k)) EXPECT_TRUE(e.at("value").is_string());
  }
  EXPECT_EQ(j.at("Delta").size(), 1u);
  EXPECT_EQ(j.at("Theta").size(), 1u);
}
