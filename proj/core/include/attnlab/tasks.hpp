#pragma once

// Task instances, exact oracles, generators and prompt encodings for function
// evaluation (Eva), permutation composition (PerCom), 2-Sum and L-step
// sequential function composition (FuncComp).
//
// All task values are 1-based, matching [n] = {1, ..., n}.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "attnlab/numerics.hpp"

namespace attnlab {

enum class TaskKind { kEva, kPerCom, kTwoSum, kFuncComp };

std::string to_string(TaskKind task);
TaskKind parse_task(const std::string& name);

struct EvaInstance {
  int n = 0;
  std::vector<std::int64_t> f;  // f[i-1] = f(i)
  std::int64_t x = 1;

  void validate() const;
  friend bool operator==(const EvaInstance&, const EvaInstance&) = default;
};

struct PerComInstance {
  int n = 0;
  std::vector<std::int64_t> sigma;
  std::vector<std::int64_t> tau;

  void validate() const;
  friend bool operator==(const PerComInstance&, const PerComInstance&) = default;
};

struct TwoSumInstance {
  int n = 0;                    // the sequence has n + 1 entries
  std::int64_t modulus = 1;     // M
  std::vector<std::int64_t> x;  // entries in [M]

  void validate() const;
  friend bool operator==(const TwoSumInstance&, const TwoSumInstance&) = default;
};

enum class ModulusPreset { kLinear, kSquare };
// kLinear: M = n; kSquare: M = n^2.
std::int64_t two_sum_modulus(int n, ModulusPreset preset);

struct FuncCompSpec {
  int L = 2;
  std::int64_t m = 1;
  std::vector<std::int64_t> n;  // n_1 .. n_{L-1}

  void validate() const;
  // N_l = m * prod_{l' <= l} n_l', for l in [0, L-1]. Throws ResourceError on overflow.
  std::int64_t N(int l) const;
  std::int64_t prompt_length() const;  // 2 + N_0 + ... + N_{L-1}
  // Row-major pairing (w_l, i_l) -> (w_l - 1) * N_{l-1} + i_l in [N_l].
  std::int64_t pair_index(int l, std::int64_t w_l, std::int64_t i_l) const;
  std::int64_t query_count() const;  // n_1 * ... * n_{L-1}

  friend bool operator==(const FuncCompSpec&, const FuncCompSpec&) = default;
};

struct FuncCompInstance {
  FuncCompSpec spec;
  std::int64_t z0 = 1;                        // in [m]
  std::vector<std::vector<std::int64_t>> z;   // z[l-1] is the table of z_l, size N_{l-1}
  std::vector<std::int64_t> w;                // w_1 .. w_{L-1}

  void validate() const;
  const std::vector<std::int64_t>& table(int l) const { return z.at(static_cast<std::size_t>(l - 1)); }
  friend bool operator==(const FuncCompInstance&, const FuncCompInstance&) = default;
};

using Instance = std::variant<EvaInstance, PerComInstance, TwoSumInstance, FuncCompInstance>;
using Output = std::vector<std::int64_t>;

TaskKind task_of(const Instance& inst);
void validate(const Instance& inst);

std::int64_t oracle_eva(const EvaInstance& inst);
std::vector<std::int64_t> oracle_percom(const PerComInstance& inst);
// y_1 .. y_{n+1}; y_i = 1 iff some j < i has x_i + x_j = 0 mod M.
std::vector<std::int64_t> oracle_two_sum(const TwoSumInstance& inst);
std::int64_t oracle_funccomp(const FuncCompInstance& inst);
// Partial composition values i_0 .. i_L.
std::vector<std::int64_t> funccomp_trace(const FuncCompInstance& inst);
Output oracle(const Instance& inst);

// ---------------------------------------------------------------------------
// Generation

struct GenParams {
  int n = 4;                                  // eva / percom / two-sum size
  std::optional<std::int64_t> modulus;        // two-sum; defaults to the preset
  ModulusPreset modulus_preset = ModulusPreset::kLinear;
  FuncCompSpec funccomp;                      // funccomp shape
};

// Deterministic in (task, params, seed) on every platform.
Instance gen_instance(TaskKind task, const GenParams& params, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Prompt encoding
//
// Every token carries (owner, position, value, 1) in slots 0..3; remaining
// slots are zero. Owners: Eva f-entries 1, query -1; PerCom sigma 2, tau 1;
// 2-Sum entries 1; FuncComp z_l entries l, z_0 0, query -1. The FuncComp
// query token stores w as a mixed-radix index in [n_1 * ... * n_{L-1}].

struct PromptLayout {
  int width = 4;
  PrecisionConfig precision{16, 0};
  void validate() const;
};

inline constexpr int kSlotOwner = 0;
inline constexpr int kSlotPosition = 1;
inline constexpr int kSlotValue = 2;
inline constexpr int kSlotBias = 3;

// One prompt token; throws PrecisionError when a slot is not representable.
Token prompt_token(std::int64_t owner, std::int64_t position, std::int64_t value, const PromptLayout& layout);

// Throws PrecisionError when a value is not representable in the layout.
Sequence encode_prompt(const Instance& inst, const PromptLayout& layout);

// Shape information that is not recoverable from the tokens alone.
struct PromptShape {
  TaskKind task = TaskKind::kEva;
  std::int64_t modulus = 0;  // two-sum
  FuncCompSpec funccomp;     // funccomp
};
PromptShape shape_of(const Instance& inst);
Instance decode_prompt(const PromptShape& shape, const Sequence& tokens);

// Player-local pieces of the FuncComp prompt (players -1..L).
Sequence encode_funccomp_player(const FuncCompSpec& spec, int player,
                                const std::vector<std::int64_t>& input, const PromptLayout& layout);
std::vector<std::int64_t> funccomp_player_input(const FuncCompInstance& inst, int player);
FuncCompInstance funccomp_with_player_input(const FuncCompInstance& inst, int player,
                                            const std::vector<std::int64_t>& input);
std::int64_t funccomp_query_index(const FuncCompSpec& spec, const std::vector<std::int64_t>& w);
std::vector<std::int64_t> funccomp_query_from_index(const FuncCompSpec& spec, std::int64_t index);

}  // namespace attnlab
