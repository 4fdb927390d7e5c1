#pragma once

// Fixed-precision attention layers: full softmax, linear (direct and
// recurrent), generic RNN layers and the linear->RNN adapter, log-linear,
// (B,k)-sparse, MLP maps and hybrid stacks.
//
// Tokens have width d*H. Every layer computes its attention output y_i exactly
// from grid inputs, quantizes it once into the layer precision, then applies
// the position-wise map g(x_i, y_i).
//
// Softmax exponentials are exp(score) rounded to a (2p + 16)-bit significand.
// No max-shift is applied, so partial sums over disjoint key sets combine
// exactly; the hybrid protocol relies on this.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attnlab/numerics.hpp"

namespace attnlab {

// Row-major matrix of grid values.
struct PMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  PVec data;

  PMatrix() = default;
  PMatrix(std::size_t r, std::size_t c, const PrecisionConfig& cfg);

  const PBitNumber& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  PBitNumber& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  // Exact product; throws DimensionError if x.size() != cols.
  RVec apply(std::span<const PBitNumber> x) const;

  friend bool operator==(const PMatrix&, const PMatrix&) = default;
};

using RMatrix = std::vector<RVec>;  // rows

RMatrix zero_matrix(std::size_t rows, std::size_t cols);

struct HeadParams {
  PMatrix Q;
  PMatrix K;
  PMatrix V;
  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

enum class LayerKind { kFull, kLinear, kLogLinear, kSparse };

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& name);

struct SparseConfig {
  int B = 1;
  int k = 1;
  Rational lambda = 0;
  std::string compression = "mean";
  std::string selection = "dot";

  void validate() const;
  friend bool operator==(const SparseConfig&, const SparseConfig&) = default;
};

struct LayerConfig {
  LayerKind kind = LayerKind::kFull;
  int H = 1;
  int d = 1;
  PrecisionConfig precision{};
  std::vector<HeadParams> heads;
  std::string feature_map = "identity";  // linear
  std::string weight_rule = "uniform";   // loglinear
  std::string update_rule = "lssb";      // loglinear
  SparseConfig sparse;                   // sparse
  std::string mlp = "project_second";

  int width() const { return H * d; }
  // Dimension and registry checks. Throws DimensionError / UnknownMapError.
  void validate() const;
  friend bool operator==(const LayerConfig&, const LayerConfig&) = default;
};

// Internal significand width of the softmax exponentials.
int softmax_working_bits(const PrecisionConfig& cfg);

// ---------------------------------------------------------------------------
// Map registries. Built-in names are always present; callers may add more.

// phi(u), exact; cfg is the layer precision (e.g. for the exp working width).
using FeatureMap = std::function<RVec(const RVec&, const PrecisionConfig&)>;
// g(x_prev, y) -> token of the same width.
using MlpMap = std::function<RVec(std::span<const PBitNumber>, std::span<const PBitNumber>)>;
// f(block tokens) -> compressed token of the same width.
using CompressionMap = std::function<RVec(std::span<const Token>)>;
// g(Q x_i, K x~_j) -> block score.
using SelectionScore = std::function<Rational(const RVec&, const RVec&)>;
// lambda^(r) for r in [0, R), from the current token.
using WeightRule = std::function<RVec(std::span<const PBitNumber>, std::size_t)>;
// S_i^(r) from the previous states, the fresh outer product V x_i (K x_i)^T and i.
using LogLinearUpdate = std::function<RMatrix(std::size_t r, std::uint64_t i, const std::vector<RMatrix>& prev,
                                              const RMatrix& fresh)>;

void register_feature_map(const std::string& name, FeatureMap fn);
void register_mlp(const std::string& name, MlpMap fn);
void register_compression(const std::string& name, CompressionMap fn);
void register_selection(const std::string& name, SelectionScore fn);
void register_weight_rule(const std::string& name, WeightRule fn);
void register_loglinear_update(const std::string& name, LogLinearUpdate fn);

// Throw UnknownMapError for unregistered names.
FeatureMap feature_map(const std::string& name);
MlpMap mlp_map(const std::string& name);
CompressionMap compression_map(const std::string& name);
SelectionScore selection_score(const std::string& name);
WeightRule weight_rule(const std::string& name);
LogLinearUpdate loglinear_update(const std::string& name);

bool has_feature_map(const std::string& name);
bool has_mlp(const std::string& name);

// x_i^(l) = g(x_i^(l-1), y_i^(l)), quantized into cfg.
Token mlp_apply(const std::string& g, std::span<const PBitNumber> x_prev, std::span<const PBitNumber> y,
                const PrecisionConfig& cfg);

// ---------------------------------------------------------------------------
// Full attention

Sequence full_layer(const Sequence& seq, const LayerConfig& cfg);
// Outputs only at the listed 0-based positions (attention is still causal over
// the whole prefix).
Sequence full_layer_at(const Sequence& seq, const LayerConfig& cfg, std::span<const std::size_t> positions);

// Exact pre-quantization attention weights of one head at position i.
RVec softmax_weights(const Sequence& seq, const LayerConfig& cfg, int head, std::size_t i);

// Per-head partial softmax sums of query token q against a key set; the
// building block shared with the hybrid protocol. numerator has d entries.
struct SoftmaxPartial {
  RVec numerator;
  Rational denominator = 0;
};
SoftmaxPartial softmax_partial(const LayerConfig& cfg, int head, std::span<const PBitNumber> query_token,
                               std::span<const Token> keys);
void accumulate(SoftmaxPartial& into, const SoftmaxPartial& part);
// Quantized head outputs from combined partials, then the MLP.
Token finish_full(const LayerConfig& cfg, std::span<const PBitNumber> x_prev, const std::vector<SoftmaxPartial>& heads);

// ---------------------------------------------------------------------------
// Linear attention

enum class LinearMode { kDirect, kRecurrent };

// phi applied to an exact projection, quantized onto the layer grid.
PVec apply_feature_map(const LayerConfig& cfg, const RVec& u);

struct LinearHeadState {
  RMatrix S;  // d x d, S[a][b] accumulates v_a * phi(k)_b
  RVec Z;     // d

  static LinearHeadState zero(int d);
  friend bool operator==(const LinearHeadState&, const LinearHeadState&) = default;
};

// Per-token projections used by linear and log-linear layers, all on the grid.
struct LinearProjections {
  PVec v;        // V x
  PVec phi_k;    // phi(K x)
  PVec phi_q;    // phi(Q x)
};
LinearProjections linear_projections(const LayerConfig& cfg, int head, std::span<const PBitNumber> x);

void linear_update(LinearHeadState& st, const LinearProjections& pr);
// phi(q)^T S / phi(q)^T Z, exact. Throws DegenerateInputError on a zero denominator.
RVec linear_readout(const LinearHeadState& st, std::span<const PBitNumber> phi_q);

Sequence linear_layer(const Sequence& seq, const LayerConfig& cfg, LinearMode mode = LinearMode::kRecurrent);
// Recurrent mode from given starting states (one per head); advances them.
Sequence linear_layer_from(const Sequence& seq, const LayerConfig& cfg, std::vector<LinearHeadState>& states);

// ---------------------------------------------------------------------------
// RNN layers

struct RnnLayerSpec {
  int m = 0;                       // hidden dimension
  PrecisionConfig state_precision{};
  PrecisionConfig output_precision{};
  PVec h0;
  std::string transition_id;
  std::string readout_id;
  // h_i = g(x_i, h_{i-1}) and y_i = f(x_i, h_i), both exact before quantization.
  std::function<RVec(std::span<const PBitNumber>, std::span<const PBitNumber>)> transition;
  std::function<RVec(std::span<const PBitNumber>, std::span<const PBitNumber>)> readout;

  void validate() const;
};

// Runs the recurrence from spec.h0, quantizing every state into
// state_precision and every output into output_precision.
Sequence rnn_run(const RnnLayerSpec& spec, const Sequence& seq);
// Same, from an explicit state; h is advanced in place.
Sequence rnn_run_from(const RnnLayerSpec& spec, const Sequence& seq, PVec& h);

// g = (x, h) -> h, f = (x, h) -> x.
RnnLayerSpec rnn_identity(int width, int m, const PrecisionConfig& state, const PrecisionConfig& out);
// g = (x, h) -> h + x[0..m), f = (x, h) -> h padded to the token width.
RnnLayerSpec rnn_running_sum(int width, int m, const PrecisionConfig& state, const PrecisionConfig& out);

// Precision that holds linear states without rounding for typical p:
// total min(128, 2p + 24), fraction 2s.
PrecisionConfig linear_state_precision(const PrecisionConfig& layer);

// h = (S^(1), Z^(1), ..., S^(H), Z^(H)) flattened, hidden dim H(d^2 + d).
RnnLayerSpec linear_as_rnn(const LayerConfig& cfg);

// ---------------------------------------------------------------------------
// Log-linear attention

// Largest l with 2^l | t. Throws ValidationError for t = 0.
int lssb(std::uint64_t t);
// ceil(log2 i + 1) + 1 = ceil(log2 i) + 2 for i >= 1.
std::size_t loglinear_state_count(std::uint64_t i);

struct LogLinearState {
  std::uint64_t i = 0;               // last processed position
  std::vector<RMatrix> S;            // S^(0) .. S^(R-1); empty before position 1

  std::size_t live() const { return S.size(); }
  friend bool operator==(const LogLinearState&, const LogLinearState&) = default;
};

// Advances one position with the layer's update rule.
void loglinear_step(LogLinearState& st, const LayerConfig& cfg, const LinearProjections& pr);
// sum_r lambda^(r) S^(r) q, exact.
RVec loglinear_readout(const LogLinearState& st, const RVec& lambda, std::span<const PBitNumber> q);

Sequence loglinear_layer(const Sequence& seq, const LayerConfig& cfg);
// From explicit per-head states; advances them. trace (optional) receives the
// per-head states after every position of head 0.
Sequence loglinear_layer_from(const Sequence& seq, const LayerConfig& cfg, std::vector<LogLinearState>& states,
                              std::vector<LogLinearState>* trace = nullptr);

// ---------------------------------------------------------------------------
// Sparse attention (single head uses heads[0]; multiple heads run independently)

// Block j covers 0-based positions [jB, (j+1)B). Only completed blocks feed
// the compress branch; the trailing partial block is compressed from its
// available tokens for scoring only, and may be selected.

// f(block), quantized onto the layer grid.
Token compress_block(const LayerConfig& cfg, std::span<const Token> block);
// Indices of the k highest scores, ties to the lower index, returned ascending.
std::vector<std::size_t> top_k_blocks(const std::vector<Rational>& scores, int k);
// Scores g(Q x_i, K x~_j) of one head against candidate compressed tokens, then top-k.
std::vector<std::size_t> select_blocks(const LayerConfig& cfg, int head, std::span<const PBitNumber> x_i,
                                       const std::vector<Token>& candidates);

Sequence sparse_layer(const Sequence& seq, const LayerConfig& cfg);
// Output at one position from the completed-block compressed tokens and, per
// head, the raw tokens of its selected blocks (already clipped to the causal
// prefix). y = lambda * y_compress + (1 - lambda) * y_select, each branch
// normalized on its own; y_compress = 0 without completed blocks.
Token sparse_output(const LayerConfig& cfg, std::span<const PBitNumber> x_i, const std::vector<Token>& compressed,
                    const std::vector<Sequence>& selected_per_head);

// ---------------------------------------------------------------------------
// Hybrid stacks

struct HybridSchedule {
  int L = 1;
  std::vector<int> a;  // a_1 .. a_L

  void validate() const;
  std::size_t layer_count() const;
  friend bool operator==(const HybridSchedule&, const HybridSchedule&) = default;
};

Sequence apply_layer(const Sequence& seq, const LayerConfig& cfg);
// layers: full, a_1 linear, full, a_2 linear, ... Throws ValidationError on a
// mismatch. trace (optional) receives the kind of each executed layer.
Sequence hybrid_forward(const Sequence& seq, const HybridSchedule& schedule, const std::vector<LayerConfig>& layers,
                        std::vector<LayerKind>* trace = nullptr);

}  // namespace attnlab
