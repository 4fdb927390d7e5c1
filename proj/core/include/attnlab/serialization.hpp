#pragma once

// JSON and JSON-lines I/O. Task integers are decimal strings so big values
// survive any JSON reader; layer matrices are row-major decimal strings.
// Every reader throws ValidationError on malformed input.

#include <string>

#include "attnlab/attention.hpp"
#include "attnlab/comm.hpp"
#include "attnlab/constructions.hpp"
#include "attnlab/params.hpp"
#include "attnlab/tasks.hpp"

namespace attnlab {

// {"task", "params", "payload"} in that order.
std::string instance_to_json(const Instance& inst);
Instance instance_from_json(const std::string& text);

// One "task,output" header then one row per output value.
std::string oracle_csv(const Instance& inst);

std::string precision_to_json(const PrecisionConfig& cfg);
PrecisionConfig precision_from_json(const std::string& text);

std::string layer_to_json(const LayerConfig& cfg);
LayerConfig layer_from_json(const std::string& text);

std::string protocol_spec_to_json(const ProtocolSpec& spec);
ProtocolSpec protocol_spec_from_json(const std::string& text);

// One {epoch, round, from, to, kind, bits_hex, nbits} object per line.
std::string transcript_to_jsonl(const Transcript& t);
Transcript transcript_from_jsonl(const std::string& text);

struct WitnessFile {
  ProtocolSpec spec;
  std::string strategy;
  CollisionWitness witness;
};
std::string witness_to_json(const WitnessFile& w);
WitnessFile witness_from_json(const std::string& text);

std::string concentration_to_json(const ConcentrationReport& r);

// derive_params plus the equality, size-bound and hybrid-budget checks. Big
// values are decimal strings; Delta is reported through its log2.
std::string params_report_to_json(const ParamSet& ps, const std::vector<EqualityCheck>& eqs,
                                  const SizeBoundReport& size, const HybridBudgetReport& hybrid,
                                  const std::vector<BigNat>& schedule);

std::string budget_to_json(const ProtocolSpec& spec, const BudgetReport& r);

}  // namespace attnlab
