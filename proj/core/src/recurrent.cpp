// Linear attention, generic RNN layers, the linear->RNN adapter and
// log-linear attention.

#include <algorithm>
#include <bit>

#include "attnlab/attention.hpp"
#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

void check_width(const Sequence& seq, const LayerConfig& cfg) {
  for (const auto& t : seq) {
    if (t.size() != static_cast<std::size_t>(cfg.width())) throw DimensionError("token width != dH");
  }
}

Token finish_heads(const LayerConfig& cfg, std::span<const PBitNumber> x, const std::vector<RVec>& heads) {
  Token y;
  y.reserve(static_cast<std::size_t>(cfg.width()));
  for (const auto& h : heads) {
    for (const auto& v : h) y.push_back(quantize(v, cfg.precision));
  }
  return mlp_apply(cfg.mlp, x, y, cfg.precision);
}

// Flattened (S, Z) layout of one head inside an RNN hidden vector.
std::size_t head_stride(int d) { return static_cast<std::size_t>(d) * static_cast<std::size_t>(d + 1); }

LinearHeadState unpack_head(std::span<const PBitNumber> h, std::size_t head, int d) {
  const auto du = static_cast<std::size_t>(d);
  const std::size_t base = head * head_stride(d);
  LinearHeadState st = LinearHeadState::zero(d);
  for (std::size_t a = 0; a < du; ++a) {
    for (std::size_t b = 0; b < du; ++b) st.S[a][b] = h[base + a * du + b].value();
  }
  for (std::size_t b = 0; b < du; ++b) st.Z[b] = h[base + du * du + b].value();
  return st;
}

void pack_head(RVec& out, const LinearHeadState& st) {
  for (const auto& row : st.S) out.insert(out.end(), row.begin(), row.end());
  out.insert(out.end(), st.Z.begin(), st.Z.end());
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear attention

PVec apply_feature_map(const LayerConfig& cfg, const RVec& u) {
  const std::string& name = cfg.kind == LayerKind::kLinear ? cfg.feature_map : std::string("identity");
  const RVec out = feature_map(name)(u, cfg.precision);
  if (out.size() != u.size()) throw DimensionError("feature map '" + name + "' changed the dimension");
  return quantize(out, cfg.precision);
}

LinearHeadState LinearHeadState::zero(int d) {
  LinearHeadState st;
  st.S = zero_matrix(static_cast<std::size_t>(d), static_cast<std::size_t>(d));
  st.Z.assign(static_cast<std::size_t>(d), Rational(0));
  return st;
}

LinearProjections linear_projections(const LayerConfig& cfg, int head, std::span<const PBitNumber> x) {
  const auto& hp = cfg.heads.at(static_cast<std::size_t>(head));
  LinearProjections pr;
  pr.v = quantize(hp.V.apply(x), cfg.precision);
  pr.phi_k = apply_feature_map(cfg, hp.K.apply(x));
  pr.phi_q = apply_feature_map(cfg, hp.Q.apply(x));
  return pr;
}

void linear_update(LinearHeadState& st, const LinearProjections& pr) {
  const std::size_t d = st.Z.size();
  if (pr.v.size() != d || pr.phi_k.size() != d) throw DimensionError("projection width != d");
  for (std::size_t b = 0; b < d; ++b) {
    if (pr.phi_k[b].is_zero()) continue;
    const Rational kb = pr.phi_k[b].value();
    st.Z[b] += kb;
    for (std::size_t a = 0; a < d; ++a) {
      if (!pr.v[a].is_zero()) st.S[a][b] += pr.v[a].value() * kb;
    }
  }
}

RVec linear_readout(const LinearHeadState& st, std::span<const PBitNumber> phi_q) {
  const std::size_t d = st.Z.size();
  if (phi_q.size() != d) throw DimensionError("query feature width != d");
  const RVec q = values(phi_q);
  const Rational den = exact_dot(std::span<const Rational>(st.Z), std::span<const Rational>(q));
  if (den == 0) throw DegenerateInputError("linear attention denominator phi(Qx)^T Z is zero");
  RVec y(d);
  for (std::size_t a = 0; a < d; ++a) {
    y[a] = exact_dot(std::span<const Rational>(st.S[a]), std::span<const Rational>(q)) / den;
  }
  return y;
}

Sequence linear_layer_from(const Sequence& seq, const LayerConfig& cfg, std::vector<LinearHeadState>& states) {
  if (cfg.kind != LayerKind::kLinear) throw ValidationError("linear_layer needs a linear-attention config");
  cfg.validate();
  check_width(seq, cfg);
  if (states.size() != cfg.heads.size()) throw DimensionError("one state per head required");
  Sequence out;
  out.reserve(seq.size());
  for (const auto& x : seq) {
    std::vector<RVec> heads;
    for (int h = 0; h < cfg.H; ++h) {
      const auto pr = linear_projections(cfg, h, x);
      auto& st = states[static_cast<std::size_t>(h)];
      linear_update(st, pr);
      heads.push_back(linear_readout(st, pr.phi_q));
    }
    out.push_back(finish_heads(cfg, x, heads));
  }
  return out;
}

Sequence linear_layer(const Sequence& seq, const LayerConfig& cfg, LinearMode mode) {
  if (mode == LinearMode::kRecurrent) {
    std::vector<LinearHeadState> states(cfg.heads.size(), LinearHeadState::zero(cfg.d));
    return linear_layer_from(seq, cfg, states);
  }
  if (cfg.kind != LayerKind::kLinear) throw ValidationError("linear_layer needs a linear-attention config");
  cfg.validate();
  check_width(seq, cfg);
  const auto d = static_cast<std::size_t>(cfg.d);
  std::vector<std::vector<LinearProjections>> proj(cfg.heads.size());
  for (std::size_t h = 0; h < cfg.heads.size(); ++h) {
    for (const auto& x : seq) proj[h].push_back(linear_projections(cfg, static_cast<int>(h), x));
  }
  // alpha_ij = phi(q_i) . phi(k_j) / sum_j' phi(q_i) . phi(k_j')
  Sequence out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    std::vector<RVec> heads;
    for (std::size_t h = 0; h < cfg.heads.size(); ++h) {
      std::vector<Rational> score(i + 1);
      Rational den = 0;
      for (std::size_t j = 0; j <= i; ++j) {
        score[j] = exact_dot(proj[h][i].phi_q, proj[h][j].phi_k);
        den += score[j];
      }
      if (den == 0) throw DegenerateInputError("linear attention denominator is zero");
      RVec y(d, Rational(0));
      for (std::size_t j = 0; j <= i; ++j) {
        const Rational alpha = score[j] / den;
        for (std::size_t a = 0; a < d; ++a) y[a] += alpha * proj[h][j].v[a].value();
      }
      heads.push_back(std::move(y));
    }
    out.push_back(finish_heads(cfg, seq[i], heads));
  }
  return out;
}

// ---------------------------------------------------------------------------
// RNN layers

void RnnLayerSpec::validate() const {
  if (m < 0) throw ValidationError("hidden dimension must be non-negative");
  state_precision.validate();
  output_precision.validate();
  if (h0.size() != static_cast<std::size_t>(m)) throw DimensionError("h0 must have m entries");
  if (!transition || !readout) throw ValidationError("rnn maps must be set");
}

Sequence rnn_run_from(const RnnLayerSpec& spec, const Sequence& seq, PVec& h) {
  spec.validate();
  if (h.size() != static_cast<std::size_t>(spec.m)) throw DimensionError("state must have m entries");
  Sequence out;
  out.reserve(seq.size());
  for (const auto& x : seq) {
    const RVec next = spec.transition(x, h);
    if (next.size() != static_cast<std::size_t>(spec.m)) throw DimensionError("transition changed the hidden dimension");
    h = quantize(next, spec.state_precision);
    out.push_back(quantize(spec.readout(x, h), spec.output_precision));
  }
  return out;
}

Sequence rnn_run(const RnnLayerSpec& spec, const Sequence& seq) {
  PVec h = spec.h0;
  return rnn_run_from(spec, seq, h);
}

RnnLayerSpec rnn_identity(int width, int m, const PrecisionConfig& state, const PrecisionConfig& out) {
  RnnLayerSpec s;
  s.m = m;
  s.state_precision = state;
  s.output_precision = out;
  s.h0.assign(static_cast<std::size_t>(m), PBitNumber::zero(state));
  s.transition_id = "hold";
  s.readout_id = "input";
  s.transition = [](std::span<const PBitNumber>, std::span<const PBitNumber> h) { return values(h); };
  s.readout = [width](std::span<const PBitNumber> x, std::span<const PBitNumber>) {
    if (x.size() != static_cast<std::size_t>(width)) throw DimensionError("token width mismatch");
    return values(x);
  };
  return s;
}

RnnLayerSpec rnn_running_sum(int width, int m, const PrecisionConfig& state, const PrecisionConfig& out) {
  if (m > width) throw DimensionError("running sum needs m <= token width");
  RnnLayerSpec s = rnn_identity(width, m, state, out);
  s.transition_id = "running_sum";
  s.readout_id = "state";
  s.transition = [m](std::span<const PBitNumber> x, std::span<const PBitNumber> h) {
    RVec next = values(h);
    for (std::size_t c = 0; c < static_cast<std::size_t>(m); ++c) next[c] += x[c].value();
    return next;
  };
  s.readout = [width](std::span<const PBitNumber>, std::span<const PBitNumber> h) {
    RVec y(static_cast<std::size_t>(width), Rational(0));
    for (std::size_t c = 0; c < h.size(); ++c) y[c] = h[c].value();
    return y;
  };
  return s;
}

PrecisionConfig linear_state_precision(const PrecisionConfig& layer) {
  PrecisionConfig st;
  st.total_bits = std::min(PrecisionConfig::kMaxTotalBits, 2 * layer.total_bits + 24);
  st.frac_bits = std::min(2 * layer.frac_bits, st.total_bits - 1);
  return st;
}

RnnLayerSpec linear_as_rnn(const LayerConfig& cfg) {
  if (cfg.kind != LayerKind::kLinear) throw ValidationError("adapter needs a linear-attention config");
  cfg.validate();
  RnnLayerSpec s;
  s.m = cfg.H * (cfg.d * cfg.d + cfg.d);
  s.state_precision = linear_state_precision(cfg.precision);
  s.output_precision = cfg.precision;
  s.h0.assign(static_cast<std::size_t>(s.m), PBitNumber::zero(s.state_precision));
  s.transition_id = "linear_state_update";
  s.readout_id = "linear_readout";
  s.transition = [cfg](std::span<const PBitNumber> x, std::span<const PBitNumber> h) {
    RVec next;
    next.reserve(h.size());
    for (int head = 0; head < cfg.H; ++head) {
      LinearHeadState st = unpack_head(h, static_cast<std::size_t>(head), cfg.d);
      linear_update(st, linear_projections(cfg, head, x));
      pack_head(next, st);
    }
    return next;
  };
  s.readout = [cfg](std::span<const PBitNumber> x, std::span<const PBitNumber> h) {
    std::vector<RVec> heads;
    for (int head = 0; head < cfg.H; ++head) {
      const LinearHeadState st = unpack_head(h, static_cast<std::size_t>(head), cfg.d);
      heads.push_back(linear_readout(st, linear_projections(cfg, head, x).phi_q));
    }
    return values(finish_heads(cfg, x, heads));
  };
  return s;
}

// ---------------------------------------------------------------------------
// Log-linear attention

int lssb(std::uint64_t t) {
  if (t == 0) throw ValidationError("lssb is undefined at 0");
  return std::countr_zero(t);
}

std::size_t loglinear_state_count(std::uint64_t i) {
  if (i == 0) throw ValidationError("positions start at 1");
  return static_cast<std::size_t>(ceil_log2(i)) + 2;
}

void loglinear_step(LogLinearState& st, const LayerConfig& cfg, const LinearProjections& pr) {
  const std::size_t d = pr.v.size();
  RMatrix fresh = zero_matrix(d, pr.phi_k.size());
  for (std::size_t a = 0; a < d; ++a) {
    if (pr.v[a].is_zero()) continue;
    for (std::size_t b = 0; b < pr.phi_k.size(); ++b) fresh[a][b] = pr.v[a].value() * pr.phi_k[b].value();
  }
  const std::uint64_t i = st.i + 1;
  const std::size_t R = loglinear_state_count(i);
  const auto update = loglinear_update(cfg.update_rule);
  std::vector<RMatrix> next;
  next.reserve(R);
  for (std::size_t r = 0; r < R; ++r) next.push_back(update(r, i, st.S, fresh));
  st.S = std::move(next);
  st.i = i;
}

RVec loglinear_readout(const LogLinearState& st, const RVec& lambda, std::span<const PBitNumber> q) {
  if (lambda.size() != st.S.size()) throw DimensionError("one weight per live state required");
  const RVec qv = values(q);
  const std::size_t d = st.S.empty() ? 0 : st.S.front().size();
  RVec y(d, Rational(0));
  for (std::size_t r = 0; r < st.S.size(); ++r) {
    if (lambda[r] == 0) continue;
    for (std::size_t a = 0; a < d; ++a) {
      y[a] += lambda[r] * exact_dot(std::span<const Rational>(st.S[r][a]), std::span<const Rational>(qv));
    }
  }
  return y;
}

Sequence loglinear_layer_from(const Sequence& seq, const LayerConfig& cfg, std::vector<LogLinearState>& states,
                              std::vector<LogLinearState>* trace) {
  if (cfg.kind != LayerKind::kLogLinear) throw ValidationError("loglinear_layer needs a log-linear config");
  cfg.validate();
  check_width(seq, cfg);
  if (states.size() != cfg.heads.size()) throw DimensionError("one state per head required");
  const auto rule = weight_rule(cfg.weight_rule);
  Sequence out;
  out.reserve(seq.size());
  for (const auto& x : seq) {
    std::vector<RVec> heads;
    for (int h = 0; h < cfg.H; ++h) {
      const auto pr = linear_projections(cfg, h, x);
      auto& st = states[static_cast<std::size_t>(h)];
      loglinear_step(st, cfg, pr);
      heads.push_back(loglinear_readout(st, rule(x, st.live()), pr.phi_q));
    }
    if (trace) trace->push_back(states.front());
    out.push_back(finish_heads(cfg, x, heads));
  }
  return out;
}

Sequence loglinear_layer(const Sequence& seq, const LayerConfig& cfg) {
  std::vector<LogLinearState> states(cfg.heads.size());
  return loglinear_layer_from(seq, cfg, states);
}

}  // namespace attnlab
