#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "attnlab/comm.hpp"
#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

std::size_t sz(std::int64_t v) { return static_cast<std::size_t>(v); }

// ---------------------------------------------------------------------------
// Field codecs

void put_exact(BitString& out, const Rational& x, const PrecisionConfig& cfg) {
  const PBitNumber q = quantize(x, cfg);
  if (q.value() != x) throw PrecisionError("payload value " + to_decimal(x) + " is not exact in " + to_string(cfg));
  append_pbit(out, q);
}

Rational get_exact(const BitString& in, std::size_t& off, const PrecisionConfig& cfg) {
  const Rational v = read_pbit(in, off, cfg).value();
  off += sz(cfg.total_bits);
  return v;
}

PrecisionConfig field_cfg(const ProtocolSpec& spec, int frac_bits) {
  PrecisionConfig cfg{spec.p, std::min(frac_bits, spec.p - 1)};
  cfg.validate();
  return cfg;
}

void put_token(BitString& out, const Token& t, const PrecisionConfig& cfg) {
  for (const auto& x : t) put_exact(out, x.value(), cfg);
}

Token get_token(const BitString& in, std::size_t& off, std::size_t width, const PrecisionConfig& field,
                const PrecisionConfig& grid) {
  Token t;
  for (std::size_t i = 0; i < width; ++i) t.push_back(quantize(get_exact(in, off, field), grid));
  return t;
}

// ---------------------------------------------------------------------------
// Hashing: FNV-1a over the bits, then a splitmix64 stream.

std::uint64_t splitmix(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t digest(std::uint64_t seed, const BitString& bits) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    h ^= bits[i] ? 0x31 : 0x30;
    h *= 0x100000001b3ULL;
  }
  h ^= bits.size();
  return splitmix(h);
}

BitString hash_bits(std::uint64_t seed, const BitString& bits, std::size_t n) {
  std::uint64_t s = digest(seed, bits);
  BitString out;
  while (out.size() < n) {
    const std::uint64_t w = splitmix(s);
    const int take = static_cast<int>(std::min<std::size_t>(64, n - out.size()));
    out.append_uint(w >> (64 - take), take);
  }
  return out;
}

BitString slot_header(const ChannelSlot& slot) {
  BitString b;
  for (int v : {slot.epoch, slot.round, slot.from, slot.to}) b.append_uint(static_cast<std::uint64_t>(v), 32);
  return b;
}

BitString prefix(const BitString& b, std::size_t n) {
  BitString out;
  for (std::size_t i = 0; i < std::min(n, b.size()); ++i) out.push_back(b[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Player tokens, mirroring encode_prompt.

Sequence player_tokens(const ProtocolSpec& spec, int player, const std::vector<std::int64_t>& in,
                       const PromptLayout& layout) {
  Sequence out;
  const auto push = [&](std::int64_t owner, std::size_t pos, std::int64_t v) {
    out.push_back(prompt_token(owner, static_cast<std::int64_t>(pos), v, layout));
  };
  switch (task_of(spec.kind)) {
    case TaskKind::kEva:
      if (player == kAlice) {
        for (std::size_t i = 0; i < in.size(); ++i) push(1, i + 1, in[i]);
      } else {
        push(-1, 1, in.at(0));
      }
      break;
    case TaskKind::kPerCom:
      for (std::size_t i = 0; i < in.size(); ++i) push(player == kAlice ? 2 : 1, i + 1, in[i]);
      break;
    case TaskKind::kTwoSum:
      if (spec.kind == ProtocolKind::kSparseTwoSum) {
        if (player == spec.block_players()) {
          push(1, sz(spec.n) + 1, in.at(0));
        } else {
          for (std::size_t t = 0; t < in.size(); ++t) push(1, sz(player) * sz(spec.B) + t + 1, in[t]);
        }
      } else if (player == kAlice) {
        for (std::size_t i = 0; i < in.size(); ++i) push(1, i + 1, in[i]);
      } else {
        push(1, sz(spec.n) + 1, in.at(0));
      }
      break;
    case TaskKind::kFuncComp:
      return encode_funccomp_player(spec.funccomp, player, in, layout);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-party streaming models share one shape: Alice sends her per-layer state
// after her tokens, Bob continues from it; with CoT Bob forwards his own
// per-layer state plus the last output token and Charles runs that token as
// one extra position.

template <class State>
struct StreamModel {
  std::string name;
  int layers = 1;
  std::function<State(int l)> zero;
  std::function<Sequence(int l, const Sequence&, State&)> run;
  std::function<void(BitString&, const State&, int l)> put;
  // pos is the last position the state has absorbed (1-based).
  std::function<State(const BitString&, std::size_t&, int l, std::uint64_t pos)> get;
  std::function<PrecisionConfig(int l)> token_grid;
};

template <class State>
StrategyBundle stream_bundle(const ProtocolSpec& spec, StreamModel<State> model, PromptLayout layout,
                             TokenDecoder decoder) {
  spec.validate();
  require(is_two_party(spec.kind), model.name + " needs a two-party protocol kind");
  require(model.layers == spec.L, model.name + ": one layer per round required");
  auto mdl = std::make_shared<const StreamModel<State>>(std::move(model));
  const std::uint64_t alice_end = sz(spec.n);
  const std::uint64_t bob_end = spec.prompt_length();

  // Bob's outputs through layers [0, upto) from Alice's states.
  auto bob_run = [spec, mdl, layout, alice_end](const InfoSet& bob, int upto, std::vector<State>* out_states) {
    const auto msgs = bob.received_from(kAlice, kMsgState);
    require(msgs.size() >= sz(upto), "Bob is missing Alice's state messages");
    Sequence seq = player_tokens(spec, kBob, bob.input(), layout);
    for (int l = 0; l < upto; ++l) {
      std::size_t off = 0;
      State st = mdl->get(msgs[sz(l)]->payload, off, l, alice_end);
      seq = mdl->run(l, seq, st);
      if (out_states) out_states->push_back(std::move(st));
    }
    return seq;
  };

  StrategyBundle b;
  b.name = mdl->name;
  b.message = [spec, mdl, layout, bob_run](const InfoSet& info, const ChannelSlot& slot) {
    BitString out;
    if (slot.kind == kMsgState) {
      Sequence seq = player_tokens(spec, kAlice, info.input(), layout);
      State st = mdl->zero(0);
      for (int l = 0; l < slot.round; ++l) {
        st = mdl->zero(l);
        seq = mdl->run(l, seq, st);
      }
      mdl->put(out, st, slot.round - 1);
      return out;
    }
    std::vector<State> states;
    const Sequence seq = bob_run(info, slot.round, &states);
    mdl->put(out, states.back(), slot.round - 1);
    put_token(out, seq.back(), field_cfg(spec, mdl->token_grid(slot.round - 1).frac_bits));
    return out;
  };
  b.select = [](const InfoSet&) { return std::vector<int>{}; };
  b.output = [spec, mdl, decoder, bob_run, bob_end](const InfoSet& info) {
    if (info.player() == kBob) return decoder(bob_run(info, spec.L, nullptr));
    const auto msgs = info.received_from(kBob, kMsgCot);
    require(msgs.size() == sz(spec.L), "Charles is missing Bob's messages");
    std::vector<State> states;
    Token y;
    for (int l = 0; l < spec.L; ++l) {
      std::size_t off = 0;
      states.push_back(mdl->get(msgs[sz(l)]->payload, off, l, bob_end));
      if (l + 1 == spec.L) {
        const auto grid = mdl->token_grid(l);
        const std::size_t width = sz(spec.H) * sz(spec.d);
        y = get_token(msgs[sz(l)]->payload, off, width, field_cfg(spec, grid.frac_bits), grid);
      }
    }
    Sequence seq{y};
    for (int l = 0; l < spec.L; ++l) seq = mdl->run(l, seq, states[sz(l)]);
    return decoder(seq);
  };
  return b;
}

// ---------------------------------------------------------------------------
// Output rules shared by the adversarial strategies.

std::int64_t value_range(const ProtocolSpec& spec) {
  return task_of(spec.kind) == TaskKind::kTwoSum ? spec.two_sum_modulus() : spec.n;
}

int code_width(const ProtocolSpec& spec) { return std::max(1, ceil_log2(static_cast<std::uint64_t>(value_range(spec)))); }

BitString encode_values(const ProtocolSpec& spec, const std::vector<std::int64_t>& v) {
  BitString out;
  for (auto x : v) out.append_uint(static_cast<std::uint64_t>(x - 1), code_width(spec));
  return out;
}

using Partial = std::vector<std::optional<bool>>;

std::vector<std::optional<std::int64_t>> decode_values(const ProtocolSpec& spec, const Partial& bits,
                                                       std::size_t count) {
  const auto w = sz(code_width(spec));
  std::vector<std::optional<std::int64_t>> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t v = 0;
    bool known = true;
    for (std::size_t t = 0; t < w && known; ++t) {
      const std::size_t at = i * w + t;
      known = at < bits.size() && bits[at].has_value();
      if (known) v = (v << 1) | (*bits[at] ? 1u : 0u);
    }
    if (known && static_cast<std::int64_t>(v) < value_range(spec)) out[i] = static_cast<std::int64_t>(v) + 1;
  }
  return out;
}

void place(Partial& into, std::size_t at, const BitString& bits, std::size_t limit) {
  for (std::size_t t = 0; t < bits.size() && t < limit; ++t) {
    if (into.size() <= at + t) into.resize(at + t + 1);
    into[at + t] = bits[t];
  }
}

std::int64_t two_sum_answer(const std::vector<std::int64_t>& known, std::int64_t x, std::int64_t M) {
  for (auto v : known) {
    if ((v + x) % M == 0) return 1;
  }
  return 0;
}

// Answer from partially known sender values and a (possibly unknown) query.
Output answer_from(const ProtocolSpec& spec, const std::vector<std::optional<std::int64_t>>& sender,
                   const std::vector<std::optional<std::int64_t>>& query) {
  switch (task_of(spec.kind)) {
    case TaskKind::kEva: {
      const auto& x = query.at(0);
      if (!x) return {1};
      const auto& fx = sender.at(sz(*x - 1));
      return {fx.value_or(1)};
    }
    case TaskKind::kPerCom: {
      Output out;
      for (const auto& t : query) {
        out.push_back(t && sender.at(sz(*t - 1)) ? *sender.at(sz(*t - 1)) : 1);
      }
      return out;
    }
    default: {
      if (!query.at(0)) return {0};
      std::vector<std::int64_t> known;
      for (const auto& v : sender) {
        if (v) known.push_back(*v);
      }
      return {two_sum_answer(known, *query[0], spec.two_sum_modulus())};
    }
  }
}

std::vector<std::optional<std::int64_t>> known(const std::vector<std::int64_t>& v) {
  return {v.begin(), v.end()};
}

std::vector<int> first_blocks(const ProtocolSpec& spec) {
  std::vector<int> out;
  for (int j = 0; j < spec.k; ++j) out.push_back(j);
  return out;
}

std::vector<std::int64_t> raw_values(const Message& select_record) {
  std::vector<std::int64_t> out;
  for (std::size_t off = 0; off + 64 <= select_record.payload.size(); off += 64) {
    out.push_back(static_cast<std::int64_t>(select_record.payload.read_uint(off, 64)));
  }
  return out;
}

std::vector<std::int64_t> selected_raw(const InfoSet& info) {
  std::vector<std::int64_t> out;
  for (const auto& m : info.received()) {
    if (m.kind != kMsgSelect) continue;
    auto v = raw_values(m);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hybrid helpers

struct HybridPlan {
  std::vector<std::size_t> full_index;  // per epoch (0-based)
  std::vector<std::pair<int, int>> at;  // layer -> (epoch, round)
};

HybridPlan hybrid_plan(const ProtocolSpec& spec) {
  HybridPlan plan;
  for (int l = 1; l <= spec.L; ++l) {
    plan.full_index.push_back(plan.at.size());
    for (int r = 0; r <= spec.a[sz(l - 1)]; ++r) plan.at.emplace_back(l, r);
  }
  return plan;
}

std::vector<LinearHeadState> decode_states(const BitString& in, std::size_t& off, int H, int d,
                                           const DyadicFloatCodec& codec) {
  std::vector<LinearHeadState> out;
  for (int h = 0; h < H; ++h) {
    LinearHeadState st = LinearHeadState::zero(d);
    for (auto& row : st.S) {
      for (auto& x : row) {
        x = codec.read(in, off);
        off += sz(codec.width);
      }
    }
    for (auto& x : st.Z) {
      x = codec.read(in, off);
      off += sz(codec.width);
    }
    out.push_back(std::move(st));
  }
  return out;
}

void encode_states(BitString& out, const std::vector<LinearHeadState>& states, const DyadicFloatCodec& codec) {
  for (const auto& st : states) {
    for (const auto& row : st.S) {
      for (const auto& x : row) codec.append(out, x);
    }
    for (const auto& x : st.Z) codec.append(out, x);
  }
}

}  // namespace

// ---------------------------------------------------------------------------

TokenDecoder value_slot_decoder() {
  return [](const Sequence& seq) {
    Output out;
    for (const auto& t : seq) {
      const Rational v = t.at(kSlotValue).value() + Rational(1, 2);
      mpz_class f;
      mpz_fdiv_q(f.get_mpz_t(), v.get_num_mpz_t(), v.get_den_mpz_t());
      out.push_back(f.get_si());
    }
    return out;
  };
}

TokenDecoder mantissa_decoder() {
  return [](const Sequence& seq) {
    Output out;
    if (seq.empty()) return out;
    for (const auto& x : seq.back()) out.push_back(static_cast<std::int64_t>(x.mantissa()));
    return out;
  };
}

StrategyBundle honest_rnn(const ProtocolSpec& spec, std::vector<RnnLayerSpec> layers, PromptLayout layout,
                          TokenDecoder decoder) {
  for (const auto& l : layers) l.validate();
  auto ls = std::make_shared<const std::vector<RnnLayerSpec>>(std::move(layers));
  StreamModel<PVec> m;
  m.name = "honest-rnn";
  m.layers = static_cast<int>(ls->size());
  m.zero = [ls](int l) { return (*ls)[sz(l)].h0; };
  m.run = [ls](int l, const Sequence& seq, PVec& h) { return rnn_run_from((*ls)[sz(l)], seq, h); };
  m.put = [ls, spec](BitString& out, const PVec& h, int l) {
    const auto f = field_cfg(spec, (*ls)[sz(l)].state_precision.frac_bits);
    for (const auto& x : h) put_exact(out, x.value(), f);
  };
  m.get = [ls, spec](const BitString& in, std::size_t& off, int l, std::uint64_t) {
    const auto& L = (*ls)[sz(l)];
    const auto f = field_cfg(spec, L.state_precision.frac_bits);
    PVec h;
    for (int a = 0; a < L.m; ++a) h.push_back(quantize(get_exact(in, off, f), L.state_precision));
    return h;
  };
  m.token_grid = [ls](int l) { return (*ls)[sz(l)].output_precision; };
  return stream_bundle(spec, std::move(m), layout, std::move(decoder));
}

StrategyBundle honest_linear(const ProtocolSpec& spec, std::vector<LayerConfig> layers, PromptLayout layout,
                             TokenDecoder decoder) {
  for (const auto& l : layers) {
    l.validate();
    require(l.kind == LayerKind::kLinear, "honest_linear needs linear layers");
  }
  auto ls = std::make_shared<const std::vector<LayerConfig>>(std::move(layers));
  using State = std::vector<LinearHeadState>;
  StreamModel<State> m;
  m.name = "honest-linear";
  m.layers = static_cast<int>(ls->size());
  m.zero = [ls](int l) { return State(sz((*ls)[sz(l)].H), LinearHeadState::zero((*ls)[sz(l)].d)); };
  m.run = [ls](int l, const Sequence& seq, State& st) { return linear_layer_from(seq, (*ls)[sz(l)], st); };
  m.put = [ls, spec](BitString& out, const State& st, int l) {
    const auto f = field_cfg(spec, linear_state_precision((*ls)[sz(l)].precision).frac_bits);
    for (const auto& h : st) {
      for (const auto& row : h.S) {
        for (const auto& x : row) put_exact(out, x, f);
      }
      for (const auto& x : h.Z) put_exact(out, x, f);
    }
  };
  m.get = [ls, spec](const BitString& in, std::size_t& off, int l, std::uint64_t) {
    const auto& c = (*ls)[sz(l)];
    const auto f = field_cfg(spec, linear_state_precision(c.precision).frac_bits);
    State st(sz(c.H), LinearHeadState::zero(c.d));
    for (auto& h : st) {
      for (auto& row : h.S) {
        for (auto& x : row) x = get_exact(in, off, f);
      }
      for (auto& x : h.Z) x = get_exact(in, off, f);
    }
    return st;
  };
  m.token_grid = [ls](int l) { return (*ls)[sz(l)].precision; };
  return stream_bundle(spec, std::move(m), layout, std::move(decoder));
}

StrategyBundle honest_loglinear(const ProtocolSpec& spec, std::vector<LayerConfig> layers, PromptLayout layout,
                                TokenDecoder decoder) {
  for (const auto& l : layers) {
    l.validate();
    require(l.kind == LayerKind::kLogLinear, "honest_loglinear needs log-linear layers");
  }
  auto ls = std::make_shared<const std::vector<LayerConfig>>(std::move(layers));
  using State = std::vector<LogLinearState>;
  StreamModel<State> m;
  m.name = "honest-loglinear";
  m.layers = static_cast<int>(ls->size());
  m.zero = [ls](int l) { return State(sz((*ls)[sz(l)].H)); };
  m.run = [ls](int l, const Sequence& seq, State& st) { return loglinear_layer_from(seq, (*ls)[sz(l)], st); };
  m.put = [ls, spec](BitString& out, const State& st, int l) {
    const auto f = field_cfg(spec, 2 * (*ls)[sz(l)].precision.frac_bits);
    for (const auto& h : st) {
      for (const auto& S : h.S) {
        for (const auto& row : S) {
          for (const auto& x : row) put_exact(out, x, f);
        }
      }
    }
  };
  m.get = [ls, spec](const BitString& in, std::size_t& off, int l, std::uint64_t pos) {
    const auto& c = (*ls)[sz(l)];
    const auto f = field_cfg(spec, 2 * c.precision.frac_bits);
    State st(sz(c.H));
    for (auto& h : st) {
      h.i = pos;
      h.S.assign(loglinear_state_count(pos), zero_matrix(sz(c.d), sz(c.d)));
      for (auto& S : h.S) {
        for (auto& row : S) {
          for (auto& x : row) x = get_exact(in, off, f);
        }
      }
    }
    return st;
  };
  m.token_grid = [ls](int l) { return (*ls)[sz(l)].precision; };
  return stream_bundle(spec, std::move(m), layout, std::move(decoder));
}

StrategyBundle honest_sparse(const ProtocolSpec& spec, LayerConfig layer, PromptLayout layout, TokenDecoder decoder) {
  spec.validate();
  require(spec.kind == ProtocolKind::kSparseTwoSum, "honest_sparse needs the sparse model");
  require(layer.kind == LayerKind::kSparse && layer.sparse.B == spec.B && layer.sparse.k == spec.k,
          "sparse layer must match the spec's B and k");
  layer.validate();
  auto cfg = std::make_shared<const LayerConfig>(std::move(layer));
  const auto field = field_cfg(spec, cfg->precision.frac_bits);
  const int nb = spec.block_players();
  const bool own_completes = (spec.n + 1) % spec.B == 0;

  // Completed compressed tokens and the candidate list, as sparse_layer sees
  // them at the last position.
  struct View {
    Token own;
    std::vector<Token> compressed;
    std::vector<Token> candidates;
  };
  auto view = [spec, cfg, layout, field, nb, own_completes](const InfoSet& info) {
    View v;
    const Sequence own = player_tokens(spec, nb, info.input(), layout);
    v.own = own.back();
    for (int j = 0; j < nb; ++j) {
      const auto got = info.received_from(j, kMsgCompressed);
      require(got.size() == 1, "missing compressed block");
      std::size_t off = 0;
      v.compressed.push_back(get_token(got[0]->payload, off, sz(cfg->width()), field, cfg->precision));
    }
    const Token own_c = compress_block(*cfg, own);
    v.candidates = v.compressed;
    v.candidates.push_back(own_c);
    if (own_completes) v.compressed.push_back(own_c);
    return v;
  };

  StrategyBundle b;
  b.name = "honest-sparse";
  b.message = [spec, cfg, layout, field](const InfoSet& info, const ChannelSlot&) {
    const Sequence block = player_tokens(spec, info.player(), info.input(), layout);
    BitString out;
    put_token(out, compress_block(*cfg, block), field);
    return out;
  };
  b.select = [cfg, view, nb](const InfoSet& info) {
    const View v = view(info);
    std::set<int> ids;
    for (int h = 0; h < cfg->H; ++h) {
      for (auto j : select_blocks(*cfg, h, v.own, v.candidates)) {
        if (static_cast<int>(j) < nb) ids.insert(static_cast<int>(j));
      }
    }
    return std::vector<int>(ids.begin(), ids.end());
  };
  b.output = [spec, cfg, layout, view, nb, decoder](const InfoSet& info) {
    const View v = view(info);
    std::map<int, Sequence> raw;
    for (const auto& m : info.received()) {
      if (m.kind == kMsgSelect) raw[m.from] = player_tokens(spec, m.from, raw_values(m), layout);
    }
    std::vector<Sequence> selected(sz(cfg->H));
    for (int h = 0; h < cfg->H; ++h) {
      for (auto j : select_blocks(*cfg, h, v.own, v.candidates)) {
        const Sequence& blk = static_cast<int>(j) < nb ? raw.at(static_cast<int>(j)) : Sequence{v.own};
        selected[sz(h)].insert(selected[sz(h)].end(), blk.begin(), blk.end());
      }
    }
    return decoder(Sequence{sparse_output(*cfg, v.own, v.compressed, selected)});
  };
  return b;
}

StrategyBundle honest_hybrid(const ProtocolSpec& spec, std::vector<LayerConfig> layers, PromptLayout layout,
                             TokenDecoder decoder) {
  spec.validate();
  require(spec.kind == ProtocolKind::kHybridFuncComp, "honest_hybrid needs the hybrid model");
  const HybridPlan plan = hybrid_plan(spec);
  require(layers.size() == plan.at.size(), "layer count does not match the hybrid schedule");
  for (std::size_t li = 0; li < layers.size(); ++li) {
    layers[li].validate();
    const auto want = plan.at[li].second == 0 ? LayerKind::kFull : LayerKind::kLinear;
    require(layers[li].kind == want, "layer kinds do not match the hybrid schedule");
    require(layers[li].H == spec.H && layers[li].d == spec.d, "layer H, d must match the spec");
  }
  require(layout.width == spec.H * spec.d, "prompt width must be H * d");
  auto ls = std::make_shared<const std::vector<LayerConfig>>(std::move(layers));
  const DyadicFloatCodec codec{spec.p};
  const std::size_t H = sz(spec.H), d = sz(spec.d);

  // Incoming linear state for the layer at (epoch, round): zero at player L.
  auto incoming = [spec, ls, codec](const InfoSet& info, std::size_t li, int epoch, int round) {
    const auto& cfg = (*ls)[li];
    if (info.player() == spec.L) return std::vector<LinearHeadState>(sz(cfg.H), LinearHeadState::zero(cfg.d));
    for (const auto* m : info.received_from(info.player() + 1, kMsgLinear)) {
      if (m->epoch == epoch && m->round == round) {
        std::size_t off = 0;
        return decode_states(m->payload, off, cfg.H, cfg.d, codec);
      }
    }
    throw ProtocolViolation("player " + std::to_string(info.player()) + " is missing a linear transcript");
  };

  // The player's tokens after layers [0, upto), from its own input and the
  // messages it has received.
  auto reconstruct = std::make_shared<std::function<Sequence(const InfoSet&, std::size_t)>>();
  *reconstruct = [spec, ls, layout, plan, codec, H, d, incoming](const InfoSet& info, std::size_t upto) {
    Sequence seq = player_tokens(spec, info.player(), info.input(), layout);
    for (std::size_t li = 0; li < upto; ++li) {
      const auto& cfg = (*ls)[li];
      const auto [epoch, round] = plan.at[li];
      if (round > 0) {
        auto st = incoming(info, li, epoch, round);
        seq = linear_layer_from(seq, cfg, st);
        continue;
      }
      std::vector<std::vector<SoftmaxPartial>> parts(seq.size(), std::vector<SoftmaxPartial>(H));
      for (std::size_t t = 0; t < seq.size(); ++t) {
        for (std::size_t h = 0; h < H; ++h) {
          parts[t][h] = softmax_partial(cfg, static_cast<int>(h), seq[t],
                                        std::span<const Token>(seq).subspan(0, t + 1));
        }
      }
      for (const auto& m : info.received()) {
        if (m.kind != kMsgSoft || m.epoch != epoch) continue;
        std::size_t off = 0;
        for (std::size_t t = 0; t < seq.size(); ++t) {
          for (std::size_t h = 0; h < H; ++h) {
            SoftmaxPartial p;
            for (std::size_t a = 0; a < d; ++a) {
              p.numerator.push_back(codec.read(m.payload, off));
              off += sz(codec.width);
            }
            p.denominator = codec.read(m.payload, off);
            off += sz(codec.width) * d;  // denominator plus padding
            accumulate(parts[t][h], p);
          }
        }
      }
      Sequence next;
      for (std::size_t t = 0; t < seq.size(); ++t) next.push_back(finish_full(cfg, seq[t], parts[t]));
      seq = std::move(next);
    }
    return seq;
  };

  StrategyBundle b;
  b.name = "honest-hybrid";
  b.message = [spec, ls, plan, codec, H, d, reconstruct, incoming](const InfoSet& info, const ChannelSlot& slot) {
    BitString out;
    if (slot.kind == kMsgSoft) {
      const std::size_t li = plan.full_index[sz(slot.epoch - 1)];
      const Sequence mine = (*reconstruct)(info, li);
      const Sequence theirs = (*reconstruct)(info.forwarded(), li);
      for (const auto& q : theirs) {
        for (std::size_t h = 0; h < H; ++h) {
          const auto p = softmax_partial((*ls)[li], static_cast<int>(h), q, mine);
          for (const auto& x : p.numerator) codec.append(out, x);
          codec.append(out, p.denominator);
          for (std::size_t a = 1; a < d; ++a) codec.append(out, Rational(0));
        }
      }
      return out;
    }
    const std::size_t li = plan.full_index[sz(slot.epoch - 1)] + sz(slot.round);
    const Sequence mine = (*reconstruct)(info, li);
    auto st = incoming(info, li, slot.epoch, slot.round);
    linear_layer_from(mine, (*ls)[li], st);
    encode_states(out, st, codec);
    return out;
  };
  b.select = [](const InfoSet&) { return std::vector<int>{}; };
  b.output = [ls, reconstruct, decoder](const InfoSet& info) { return decoder((*reconstruct)(info, ls->size())); };
  return b;
}

StrategyBundle honest_value_sum_rnn(const ProtocolSpec& spec) {
  require(spec.kind == ProtocolKind::kRnnEva || spec.kind == ProtocolKind::kRnnPerCom,
          "value-sum RNN needs an RNN protocol kind");
  require(spec.p >= 2, "value-sum RNN needs p >= 2");
  const PromptLayout layout{4, PrecisionConfig{16, 0}};
  const PrecisionConfig state{spec.p, 0};
  std::vector<RnnLayerSpec> layers;
  for (int l = 0; l < spec.L; ++l) {
    RnnLayerSpec r;
    r.m = spec.m;
    r.state_precision = state;
    r.output_precision = layout.precision;
    r.h0.assign(sz(spec.m), PBitNumber::zero(state));
    r.transition_id = "value_sum";
    r.readout_id = "value_from_state";
    r.transition = [](std::span<const PBitNumber> x, std::span<const PBitNumber> h) {
      RVec next;
      for (std::size_t a = 0; a < h.size(); ++a) {
        next.push_back(h[a].value() + x[kSlotValue].value() * static_cast<long>(a + 1));
      }
      return next;
    };
    r.readout = [](std::span<const PBitNumber> x, std::span<const PBitNumber> h) {
      RVec y = values(x);
      y[kSlotValue] = h[0].value();
      return y;
    };
    layers.push_back(std::move(r));
  }
  auto b = honest_rnn(spec, std::move(layers), layout, value_slot_decoder());
  b.name = "honest-rnn";
  return b;
}

StrategyBundle random_hash_strategy(const ProtocolSpec& spec, std::uint64_t seed) {
  spec.validate();
  StrategyBundle b;
  b.name = "random-hash";
  b.message = [seed](const InfoSet& info, const ChannelSlot& slot) {
    BitString key = slot_header(slot);
    key.append(info.serialize());
    if (info.has_forwarded()) key.append(info.forwarded().serialize());
    return hash_bits(seed, key, slot.budget);
  };
  b.select = [spec](const InfoSet&) { return first_blocks(spec); };
  b.output = [spec, seed](const InfoSet& info) {
    std::uint64_t s = digest(seed ^ 0xa5a5a5a5ULL, info.serialize());
    switch (task_of(spec.kind)) {
      case TaskKind::kEva:
        return Output{1 + static_cast<std::int64_t>(splitmix(s) % sz(spec.n))};
      case TaskKind::kPerCom: {
        Output out;
        for (int i = 0; i < spec.n; ++i) out.push_back(1 + static_cast<std::int64_t>(splitmix(s) % sz(spec.n)));
        return out;
      }
      case TaskKind::kTwoSum:
        return Output{static_cast<std::int64_t>(splitmix(s) & 1)};
      default:
        return Output{1 + static_cast<std::int64_t>(splitmix(s) % static_cast<std::uint64_t>(spec.funccomp.m))};
    }
  };
  return b;
}

StrategyBundle truncation_strategy(const ProtocolSpec& spec) {
  spec.validate();
  require(spec.kind != ProtocolKind::kHybridFuncComp, "truncation strategy covers the two-party and sparse models");
  const auto sched = schedule(spec);
  std::size_t alice_budget = 0, cot_budget = 0;
  for (const auto& s : sched) {
    if (s.kind == kMsgState || s.kind == kMsgCompressed) alice_budget = s.budget;
    if (s.kind == kMsgCot) cot_budget = s.budget;
  }

  // Alice's code bits known to Bob, from the per-round chunks.
  auto alice_bits = [alice_budget](const std::vector<BitString>& chunks, std::size_t per_chunk) {
    Partial bits;
    for (std::size_t r = 0; r < chunks.size(); ++r) place(bits, r * alice_budget, chunks[r], per_chunk);
    return bits;
  };

  StrategyBundle b;
  b.name = "truncation";
  b.message = [spec](const InfoSet& info, const ChannelSlot& slot) {
    const BitString code = encode_values(spec, info.input());
    if (slot.kind == kMsgCompressed) return prefix(code, slot.budget);
    if (slot.kind == kMsgState) {
      BitString out;
      const std::size_t start = sz(slot.round - 1) * slot.budget;
      for (std::size_t t = start; t < code.size() && t < start + slot.budget; ++t) out.push_back(code[t]);
      return out;
    }
    // Bob -> Charles: his own code, then the chunk he just received.
    BitString out = code;
    const auto chunks = info.received_from(kAlice, kMsgState);
    out.append(chunks.at(sz(slot.round - 1))->payload);
    return prefix(out, slot.budget);
  };
  b.select = [spec](const InfoSet&) { return first_blocks(spec); };
  b.output = [spec, alice_bits, alice_budget, cot_budget](const InfoSet& info) {
    if (spec.kind == ProtocolKind::kSparseTwoSum) {
      std::vector<std::optional<std::int64_t>> vals;
      for (int j = 0; j < spec.block_players(); ++j) {
        Partial bits;
        place(bits, 0, info.received_from(j, kMsgCompressed).at(0)->payload, alice_budget);
        auto v = decode_values(spec, bits, sz(spec.B));
        vals.insert(vals.end(), v.begin(), v.end());
      }
      for (auto v : selected_raw(info)) vals.push_back(v);
      return answer_from(spec, vals, known(info.input()));
    }
    const std::size_t n_alice = sz(spec.n);
    if (info.player() == kBob) {
      std::vector<BitString> chunks;
      for (const auto* m : info.received_from(kAlice, kMsgState)) chunks.push_back(m->payload);
      return answer_from(spec, decode_values(spec, alice_bits(chunks, alice_budget), n_alice), known(info.input()));
    }
    // Charles: Bob's code sits in front of every message.
    const auto msgs = info.received_from(kBob, kMsgCot);
    const std::size_t bob_count = task_of(spec.kind) == TaskKind::kPerCom ? sz(spec.n) : 1;
    const std::size_t bob_len = bob_count * sz(code_width(spec));
    Partial bob_bits;
    std::vector<BitString> chunks;
    if (!msgs.empty()) place(bob_bits, 0, msgs[0]->payload, std::min(bob_len, cot_budget));
    for (const auto* m : msgs) {
      BitString rest;
      for (std::size_t t = bob_len; t < m->payload.size(); ++t) rest.push_back(m->payload[t]);
      chunks.push_back(rest);
    }
    const std::size_t per_chunk = cot_budget > bob_len ? std::min(alice_budget, cot_budget - bob_len) : 0;
    return answer_from(spec, decode_values(spec, alice_bits(chunks, per_chunk), n_alice),
                       decode_values(spec, bob_bits, bob_count));
  };
  return b;
}

StrategyBundle bitmask_strategy(const ProtocolSpec& spec, int hash_bits_count) {
  spec.validate();
  require(spec.kind == ProtocolKind::kSparseTwoSum, "bitmask strategy needs the sparse model");
  require(hash_bits_count >= 0, "hash width must be non-negative");
  const std::int64_t M = spec.two_sum_modulus();
  StrategyBundle b;
  b.name = hash_bits_count > 0 ? "hash-bitmask" : "bitmask";
  b.message = [M, hash_bits_count](const InfoSet& info, const ChannelSlot& slot) {
    BitString out;
    std::set<std::int64_t> present(info.input().begin(), info.input().end());
    for (std::int64_t v = 1; v <= M; ++v) out.push_back(present.count(v) > 0);
    if (hash_bits_count > 0) out = hash_bits(0x6d61736bULL, out, sz(hash_bits_count));
    return prefix(out, slot.budget);
  };
  b.select = [spec](const InfoSet&) { return first_blocks(spec); };
  b.output = [spec, M, hash_bits_count](const InfoSet& info) {
    std::vector<std::int64_t> vals;
    if (hash_bits_count == 0) {
      for (int j = 0; j < spec.block_players(); ++j) {
        const auto& payload = info.received_from(j, kMsgCompressed).at(0)->payload;
        for (std::size_t t = 0; t < payload.size() && t < sz(M); ++t) {
          if (payload[t]) vals.push_back(static_cast<std::int64_t>(t) + 1);
        }
      }
    }
    for (auto v : selected_raw(info)) vals.push_back(v);
    return Output{two_sum_answer(vals, info.input().at(0), M)};
  };
  return b;
}

std::vector<StrategyBundle> shipped_strategies(const ProtocolSpec& spec) {
  spec.validate();
  std::vector<StrategyBundle> out;
  // The value-sum RNN emits 4-wide tokens, which the CoT leg must carry.
  if ((spec.kind == ProtocolKind::kRnnEva || spec.kind == ProtocolKind::kRnnPerCom) && spec.p >= 2 &&
      (!spec.cot || spec.H * spec.d >= 4)) {
    out.push_back(honest_value_sum_rnn(spec));
  }
  out.push_back(random_hash_strategy(spec, 0x5eed));
  if (spec.kind != ProtocolKind::kHybridFuncComp) out.push_back(truncation_strategy(spec));
  if (spec.kind == ProtocolKind::kSparseTwoSum) {
    out.push_back(bitmask_strategy(spec));
    out.push_back(bitmask_strategy(spec, 4));
  }
  return out;
}

StrategyBundle strategy_by_name(const ProtocolSpec& spec, const std::string& name) {
  if (name == "random-hash") return random_hash_strategy(spec, 0x5eed);
  if (name == "truncation") return truncation_strategy(spec);
  if (name == "injective" || name == "honest-injective") {
    auto b = truncation_strategy(spec);
    const auto rep = budget(spec);
    const std::size_t need = spec.kind == ProtocolKind::kSparseTwoSum
                                 ? sz(spec.B) * sz(code_width(spec))
                                 : sz(spec.n) * sz(code_width(spec));
    if (rep.alice_bits < need) {
      throw ValidationError("budget of " + std::to_string(rep.alice_bits) + " bits cannot hold an injective code of " +
                            std::to_string(need) + " bits");
    }
    b.name = "injective";
    return b;
  }
  if (name == "honest-rnn") return honest_value_sum_rnn(spec);
  if (name == "bitmask") return bitmask_strategy(spec);
  if (name == "hash-bitmask") return bitmask_strategy(spec, 4);
  throw ValidationError("unknown strategy: " + name);
}

}  // namespace attnlab
