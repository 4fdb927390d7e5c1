#pragma once

// Multi-player communication protocols behind the lower bounds: two-party
// streaming models (Alice -> Bob, optionally Bob -> Charles for CoT), the
// sparse block model and the hybrid epoch model for FuncComp.
//
// Strategies never see the instance. The engine hands each one an InfoSet
// holding the player's own input and the messages delivered to it so far,
// which is all a forgetful player may use.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "attnlab/attention.hpp"
#include "attnlab/bitstring.hpp"
#include "attnlab/tasks.hpp"

namespace attnlab {

enum class ProtocolKind {
  kRnnEva,
  kLogLinearEva,
  kRnnPerCom,
  kLogLinearPerCom,
  kLinearTwoSum,
  kLogLinearTwoSum,
  kSparseTwoSum,
  kHybridFuncComp,
};

std::string to_string(ProtocolKind kind);
ProtocolKind parse_protocol_kind(const std::string& name);
TaskKind task_of(ProtocolKind kind);
bool is_two_party(ProtocolKind kind);

inline constexpr int kAlice = 0;
inline constexpr int kBob = 1;
inline constexpr int kCharles = 2;

// Payload kinds.
inline constexpr const char* kMsgState = "state";          // Alice -> Bob, one per round
inline constexpr const char* kMsgCot = "cot";              // Bob -> Charles
inline constexpr const char* kMsgCompressed = "compressed";  // sparse block -> last player
inline constexpr const char* kMsgSelect = "select";        // raw block after selection
inline constexpr const char* kMsgSoft = "soft";            // hybrid Pi_{j,i}
inline constexpr const char* kMsgLinear = "linear";        // hybrid Sigma_{i+1}
inline constexpr const char* kMsgForward = "forward";      // hybrid X_i -> later players

struct ProtocolSpec {
  ProtocolKind kind = ProtocolKind::kRnnEva;
  int L = 1;   // rounds (layers) or epochs
  int H = 1;
  int d = 1;
  int m = 1;   // RNN hidden dimension
  int p = 8;   // message field width in bits
  int n = 2;   // Eva / PerCom / 2-Sum size; 2-Sum has n + 1 entries
  std::int64_t modulus = 0;  // 2-Sum M; 0 means M = n
  bool cot = false;
  int B = 1;   // sparse block size
  int k = 1;   // sparse selected blocks
  FuncCompSpec funccomp;  // hybrid
  std::vector<int> a;     // hybrid: linear rounds per epoch
  // Overrides the closed-form size of the Alice (or block player) messages.
  std::optional<std::size_t> message_bits;

  void validate() const;
  std::int64_t two_sum_modulus() const { return modulus > 0 ? modulus : n; }
  std::vector<int> players() const;
  int output_player() const;
  int block_players() const { return n / B; }  // sparse
  // m_(i) for the hybrid model: N_{i-1} tokens for i >= 1, one token otherwise.
  std::size_t input_share(int player) const;
  // Tokens at which the output player's (CoT: Bob's) stream ends.
  std::size_t prompt_length() const;
};

struct ChannelSlot {
  int epoch = 1;
  int round = 1;
  int from = 0;
  int to = 0;
  std::string kind;
  std::size_t budget = 0;
  bool budgeted = true;
};

// Communication order. Sparse "select" slots depend on the run and are not
// listed; hybrid "forward" legs are listed with budget 0, unbudgeted.
std::vector<ChannelSlot> schedule(const ProtocolSpec& spec);

struct BudgetReport {
  std::vector<ChannelSlot> channels;
  std::size_t primary_message_bits = 0;  // Alice / block / soft-to-player-0 message
  std::size_t cot_message_bits = 0;
  std::size_t total_bits = 0;            // budgeted channels
  std::size_t output_view_bits = 0;      // budgeted bits the output player receives
  std::size_t alice_bits = 0;            // budgeted bits leaving Alice (or one block player)
  // Size of the space the sending side must distinguish: n^n, n!, C(M, n) or
  // sum_{j <= B} C(n, j); empty for the hybrid model.
  std::optional<BigNat> distinguishable;
  std::string distinguishable_formula;
  // 2^alice_bits < distinguishable.
  bool pigeonhole_forced = false;
};

BudgetReport budget(const ProtocolSpec& spec);

// R(i) = ceil(log2 i) + 2 live log-linear states after position i.
std::size_t loglinear_live_states(std::uint64_t i);

// ---------------------------------------------------------------------------
// Engine

struct Message {
  int epoch = 1;
  int round = 1;
  int from = 0;
  int to = 0;
  std::string kind;
  BitString payload;
  friend bool operator==(const Message&, const Message&) = default;
};

using Transcript = std::vector<Message>;

// What one player knows. forwarded is only set while a hybrid player answers
// a soft-transcript request.
class InfoSet {
 public:
  InfoSet(int player, std::vector<std::int64_t> input) : player_(player), input_(std::move(input)) {}

  int player() const { return player_; }
  const std::vector<std::int64_t>& input() const { return input_; }
  const std::vector<Message>& received() const { return received_; }
  // Messages received with the given kind and sender, in delivery order.
  std::vector<const Message*> received_from(int from, const std::string& kind) const;
  // Throws ForgetfulnessViolation when no forwarded set is in scope.
  const InfoSet& forwarded() const;
  bool has_forwarded() const { return forwarded_ != nullptr; }

  void deliver(const Message& msg) { received_.push_back(msg); }
  void set_forwarded(std::shared_ptr<const InfoSet> other) { forwarded_ = std::move(other); }
  // Own input (64-bit fields) followed by every received payload.
  BitString serialize() const;

 private:
  int player_;
  std::vector<std::int64_t> input_;
  std::vector<Message> received_;
  std::shared_ptr<const InfoSet> forwarded_;
};

struct StrategyBundle {
  std::string name;
  // Payload for one slot, at most slot.budget bits; shorter payloads are
  // zero padded.
  std::function<BitString(const InfoSet&, const ChannelSlot&)> message;
  // Sparse: block players whose raw block the last player requests (at most k
  // per head).
  std::function<std::vector<int>(const InfoSet&)> select;
  std::function<Output(const InfoSet&)> output;
};

// Task input held by one player.
std::vector<std::int64_t> player_input(const ProtocolSpec& spec, const Instance& inst, int player);
// The answer the output player is asked for: {f(x)}, sigma o tau, {y_{n+1}} or {i_L}.
Output protocol_oracle(const ProtocolSpec& spec, const Instance& inst);

struct RunResult {
  Transcript transcript;
  Output output;
};

// Throws ProtocolViolation on an over-budget payload or an invalid selection.
RunResult run_protocol(const ProtocolSpec& spec, const StrategyBundle& bundle, const Instance& inst);

// Concatenation of every non-forward payload delivered to viewpoint, in order.
BitString transcript_fingerprint(const Transcript& t, int viewpoint);

// ---------------------------------------------------------------------------
// Collision search

struct InputSpace {
  std::vector<std::vector<std::int64_t>> sender;  // Alice's (or all block players') inputs
  std::vector<std::vector<std::int64_t>> query;   // Bob's (or the last player's) inputs
};

// Default caps: Eva n <= 4, PerCom n <= 4, 2-Sum n <= 10. Throws ResourceError.
InputSpace enumerate_inputs(const ProtocolSpec& spec);
Instance assemble_instance(const ProtocolSpec& spec, const std::vector<std::int64_t>& sender,
                           const std::vector<std::int64_t>& query);

struct CollisionWitness {
  Instance a;
  Instance b;
  std::vector<std::int64_t> query;
  Output oracle_a;
  Output oracle_b;
  BitString fingerprint;
};

struct CollisionSearch {
  std::optional<CollisionWitness> witness;
  std::size_t runs = 0;
  std::size_t sender_inputs = 0;
  std::size_t max_classes = 0;      // largest class count over queries
  std::size_t max_class_size = 0;
  std::size_t fingerprint_bits = 0;
  std::map<std::size_t, std::size_t> class_size_histogram;  // first query searched
};

inline constexpr std::size_t kDefaultRunCap = 2'000'000;

CollisionSearch find_collision(const ProtocolSpec& spec, const StrategyBundle& bundle, const InputSpace& space,
                               std::size_t run_cap = kDefaultRunCap);
CollisionSearch find_collision(const ProtocolSpec& spec, const StrategyBundle& bundle);

struct WitnessCheck {
  bool fingerprints_equal = false;
  bool oracles_differ = false;
  bool protocol_errs = false;
  bool ok() const { return fingerprints_equal && oracles_differ && protocol_errs; }
};

WitnessCheck check_witness(const CollisionWitness& w, const ProtocolSpec& spec, const StrategyBundle& bundle);
bool verify_witness(const CollisionWitness& w, const ProtocolSpec& spec, const StrategyBundle& bundle);

// Charles's view must be reproducible from Bob's: rebuild Bob's InfoSet from
// the transcript, re-ask Bob's strategy for every CoT message and compare.
bool cot_replay_check(const ProtocolSpec& spec, const StrategyBundle& bundle, const Instance& inst);

// ---------------------------------------------------------------------------
// Sparse block collisions and the adversarial instance

struct BlockCollision {
  int player = 0;
  std::vector<std::int64_t> a;  // set(a) \ set(b) is nonempty
  std::vector<std::int64_t> b;
  BitString message;
  std::size_t classes = 0;
  std::size_t distinct_sets = 0;
};

// Enumerates every block content in [M]^B through one block player's
// strategy and looks for two contents with equal messages but different
// value sets.
std::optional<BlockCollision> find_block_collision(const ProtocolSpec& spec, const StrategyBundle& bundle,
                                                   std::size_t run_cap = kDefaultRunCap, int player = 0);

struct SparseAdversary {
  std::int64_t v = 0;           // in set(a) \ set(b)
  std::int64_t last_token = 0;  // -v mod M, with 0 written as M
  std::vector<int> b_blocks;    // blocks carrying b in both fillings (at least the selected ones)
  TwoSumInstance with_a;        // the other blocks carry a
  TwoSumInstance with_b;        // every block carries b
};

// Throws ValidationError when set(a) is contained in set(b) (no distinguishing
// value) or when every block carries b.
SparseAdversary sparse_adversary(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b, int n,
                                 std::int64_t modulus, int block_size, const std::vector<int>& b_blocks);
// Blocks the strategy selects on the all-b filling keep b, and so does every
// block whose message tells a from b.
SparseAdversary sparse_adversary(const ProtocolSpec& spec, const StrategyBundle& bundle,
                                 const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b);

struct SparseAttack {
  BlockCollision collision;
  SparseAdversary adversary;
};

// Tries each block player in turn: a block collision through that player, then
// the adversarial filling, kept if the player is not selected.
std::optional<SparseAttack> find_sparse_attack(const ProtocolSpec& spec, const StrategyBundle& bundle,
                                               std::size_t run_cap = kDefaultRunCap);

// ---------------------------------------------------------------------------
// Hybrid soft / linear transcript independence

struct IndependenceReport {
  std::size_t runs = 0;
  std::size_t records_checked = 0;
  std::size_t violations = 0;
  std::vector<std::string> details;  // first few violations
};

// alternatives[t] lists replacement inputs for player t (players -1..L);
// every combination is run. Pi_{j,i} must not depend on players t < i and
// Sigma_{i+1} not on players t <= i.
IndependenceReport soft_transcript_independence_check(
    const ProtocolSpec& spec, const StrategyBundle& bundle, const FuncCompInstance& base,
    const std::map<int, std::vector<std::vector<std::int64_t>>>& alternatives);

// ---------------------------------------------------------------------------
// Strategies

using TokenDecoder = std::function<Output(const Sequence&)>;

// Rounds the value slot of every token to the nearest integer.
TokenDecoder value_slot_decoder();
// Mantissas of every coordinate of the last token.
TokenDecoder mantissa_decoder();

// Strategies know the public protocol spec but not the instance.

// Alice streams h_n^(l) of each layer as m fixed-point fields of the state
// precision; Bob continues the recurrence. One RnnLayerSpec per layer (H = 1).
StrategyBundle honest_rnn(const ProtocolSpec& spec, std::vector<RnnLayerSpec> layers, PromptLayout layout,
                          TokenDecoder decoder);
// Linear attention layers; (S, Z) per head in linear_state_precision fields.
StrategyBundle honest_linear(const ProtocolSpec& spec, std::vector<LayerConfig> layers, PromptLayout layout,
                             TokenDecoder decoder);
// Log-linear layers; the live states go as fixed-point fields of spec.p bits
// with 2s fractional bits.
StrategyBundle honest_loglinear(const ProtocolSpec& spec, std::vector<LayerConfig> layers, PromptLayout layout,
                                TokenDecoder decoder);
// One sparse layer; block players send their compressed token.
StrategyBundle honest_sparse(const ProtocolSpec& spec, LayerConfig layer, PromptLayout layout, TokenDecoder decoder);
// Hybrid stack (full, a_1 linear, full, ...); soft and linear payloads use
// DyadicFloatCodec fields of spec.p bits.
StrategyBundle honest_hybrid(const ProtocolSpec& spec, std::vector<LayerConfig> layers, PromptLayout layout,
                             TokenDecoder decoder);

// Small honest RNN for desk-scale attacks: h <- h + value * (1, 2, ..., m)
// saturated into spec.p-bit integers, read out into the value slot.
StrategyBundle honest_value_sum_rnn(const ProtocolSpec& spec);

// First `budget` bits of a seeded hash of the sender's information set; the
// output player hashes its view into an answer.
StrategyBundle random_hash_strategy(const ProtocolSpec& spec, std::uint64_t seed);
// Senders write their input values in ceil(log2 range) bits each and cut the
// stream into per-round chunks; what does not fit is dropped. The output
// player answers from whatever arrived. Injective once the budget covers the
// whole code.
StrategyBundle truncation_strategy(const ProtocolSpec& spec);
// Sparse: block players send the membership bitmask of their values over
// [M], cut to the budget; with hash_bits > 0 the mask is hashed to that many
// bits instead.
StrategyBundle bitmask_strategy(const ProtocolSpec& spec, int hash_bits = 0);

// Desk-scale bundles for a protocol kind (CLI and acceptance suite).
std::vector<StrategyBundle> shipped_strategies(const ProtocolSpec& spec);
// random-hash, truncation, injective, honest-rnn, bitmask, hash-bitmask.
StrategyBundle strategy_by_name(const ProtocolSpec& spec, const std::string& name);

}  // namespace attnlab
