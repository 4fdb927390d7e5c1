#include "attnlab/comm.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

struct KindName {
  ProtocolKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {ProtocolKind::kRnnEva, "rnn_eva"},
    {ProtocolKind::kLogLinearEva, "loglinear_eva"},
    {ProtocolKind::kRnnPerCom, "rnn_percom"},
    {ProtocolKind::kLogLinearPerCom, "loglinear_percom"},
    {ProtocolKind::kLinearTwoSum, "linear_twosum"},
    {ProtocolKind::kLogLinearTwoSum, "loglinear_twosum"},
    {ProtocolKind::kSparseTwoSum, "sparse_twosum"},
    {ProtocolKind::kHybridFuncComp, "hybrid_funccomp"},
};

bool is_rnn(ProtocolKind k) { return k == ProtocolKind::kRnnEva || k == ProtocolKind::kRnnPerCom; }

std::size_t sz(std::int64_t v) { return static_cast<std::size_t>(v); }

// Tokens Alice holds in the two-party models.
std::size_t alice_tokens(const ProtocolSpec& spec) { return sz(spec.n); }

std::size_t alice_message_bits(const ProtocolSpec& spec) {
  if (spec.message_bits) return *spec.message_bits;
  const std::size_t H = sz(spec.H), d = sz(spec.d), p = sz(spec.p), m = sz(spec.m);
  switch (spec.kind) {
    case ProtocolKind::kRnnEva:
    case ProtocolKind::kRnnPerCom:
      return H * m * p;
    case ProtocolKind::kLinearTwoSum:
      return H * d * (d + 1) * p;
    case ProtocolKind::kSparseTwoSum:
      return H * d * p;
    case ProtocolKind::kHybridFuncComp:
      return 0;
    default:
      return loglinear_live_states(alice_tokens(spec)) * H * d * d * p;
  }
}

std::size_t cot_message_bits(const ProtocolSpec& spec) {
  const std::size_t H = sz(spec.H), d = sz(spec.d), p = sz(spec.p), m = sz(spec.m);
  if (is_rnn(spec.kind)) return H * (m + d) * p;
  if (spec.kind == ProtocolKind::kLinearTwoSum) return H * d * (d + 1) * p + H * d * p;
  return loglinear_live_states(spec.prompt_length()) * H * d * d * p + H * d * p;
}

// Raw values a player contributes, for the select records and fingerprints.
BitString serialize_values(const std::vector<std::int64_t>& v) {
  BitString out;
  for (auto x : v) out.append_uint(static_cast<std::uint64_t>(x), 64);
  return out;
}

std::vector<std::int64_t> sender_input(const ProtocolSpec& spec, const Instance& inst) {
  if (const auto* e = std::get_if<EvaInstance>(&inst)) return e->f;
  if (const auto* p = std::get_if<PerComInstance>(&inst)) return p->sigma;
  if (const auto* t = std::get_if<TwoSumInstance>(&inst)) {
    return std::vector<std::int64_t>(t->x.begin(), t->x.begin() + spec.n);
  }
  throw ValidationError("hybrid instances have no single sender");
}

void check_instance(const ProtocolSpec& spec, const Instance& inst) {
  validate(inst);
  require(task_of(inst) == task_of(spec.kind), "instance task does not match the protocol kind");
  if (const auto* e = std::get_if<EvaInstance>(&inst)) require(e->n == spec.n, "instance n != spec n");
  if (const auto* p = std::get_if<PerComInstance>(&inst)) require(p->n == spec.n, "instance n != spec n");
  if (const auto* t = std::get_if<TwoSumInstance>(&inst)) {
    require(t->n == spec.n, "instance n != spec n");
    require(t->modulus == spec.two_sum_modulus(), "instance modulus != spec modulus");
  }
  if (const auto* f = std::get_if<FuncCompInstance>(&inst)) {
    require(f->spec == spec.funccomp, "instance FuncComp shape != spec shape");
  }
}

BitString checked_payload(const StrategyBundle& bundle, const InfoSet& view, const ChannelSlot& slot) {
  BitString payload = bundle.message(view, slot);
  if (payload.size() > slot.budget) {
    std::ostringstream os;
    os << bundle.name << ": " << slot.kind << " message " << slot.from << "->" << slot.to << " has "
       << payload.size() << " bits, budget " << slot.budget;
    throw ProtocolViolation(os.str());
  }
  payload.pad_to(slot.budget);
  return payload;
}

Message record(const ChannelSlot& slot, BitString payload) {
  return Message{slot.epoch, slot.round, slot.from, slot.to, slot.kind, std::move(payload)};
}

// Odometer over [1, M]^len restricted to non-decreasing tuples.
std::vector<std::vector<std::int64_t>> nondecreasing_tuples(int len, std::int64_t M) {
  std::vector<std::vector<std::int64_t>> out;
  std::vector<std::int64_t> cur(sz(len), 1);
  while (true) {
    out.push_back(cur);
    int i = len - 1;
    while (i >= 0 && cur[sz(i)] == M) --i;
    if (i < 0) break;
    const std::int64_t v = cur[sz(i)] + 1;
    for (int j = i; j < len; ++j) cur[sz(j)] = v;
  }
  return out;
}

std::vector<std::vector<std::int64_t>> all_tuples(int len, std::int64_t M) {
  std::vector<std::vector<std::int64_t>> out;
  std::vector<std::int64_t> cur(sz(len), 1);
  while (true) {
    out.push_back(cur);
    int i = len - 1;
    while (i >= 0 && cur[sz(i)] == M) cur[sz(i--)] = 1;
    if (i < 0) break;
    ++cur[sz(i)];
  }
  return out;
}

std::vector<std::vector<std::int64_t>> all_permutations(int n) {
  std::vector<std::int64_t> p(sz(n));
  std::iota(p.begin(), p.end(), 1);
  std::vector<std::vector<std::int64_t>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

BigNat factorial(unsigned long n) {
  BigNat r = 1;
  for (unsigned long i = 2; i <= n; ++i) r *= i;
  return r;
}

std::set<std::int64_t> as_set(const std::vector<std::int64_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(ProtocolKind kind) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "unknown";
}

ProtocolKind parse_protocol_kind(const std::string& name) {
  for (const auto& kn : kKindNames) {
    if (name == kn.name) return kn.kind;
  }
  throw ValidationError("unknown protocol kind: " + name);
}

TaskKind task_of(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::kRnnEva:
    case ProtocolKind::kLogLinearEva:
      return TaskKind::kEva;
    case ProtocolKind::kRnnPerCom:
    case ProtocolKind::kLogLinearPerCom:
      return TaskKind::kPerCom;
    case ProtocolKind::kHybridFuncComp:
      return TaskKind::kFuncComp;
    default:
      return TaskKind::kTwoSum;
  }
}

bool is_two_party(ProtocolKind kind) {
  return kind != ProtocolKind::kSparseTwoSum && kind != ProtocolKind::kHybridFuncComp;
}

std::size_t loglinear_live_states(std::uint64_t i) {
  require(i >= 1, "live states are defined from position 1");
  return static_cast<std::size_t>(ceil_log2(i)) + 2;
}

void ProtocolSpec::validate() const {
  require(L >= 1 && H >= 1 && d >= 1 && m >= 1 && p >= 1 && n >= 1, "protocol sizes must be positive");
  require(!cot || is_two_party(kind), "CoT applies to the two-party models only");
  if (task_of(kind) == TaskKind::kTwoSum) require(two_sum_modulus() >= 2, "2-Sum needs M >= 2");
  if (kind == ProtocolKind::kSparseTwoSum) {
    require(B >= 1 && n % B == 0, "sparse model needs B | n");
    require(k >= 1 && k <= n / B, "sparse model needs 1 <= k <= n / B");
  }
  if (kind == ProtocolKind::kHybridFuncComp) {
    funccomp.validate();
    require(funccomp.L == L, "hybrid epochs must equal the FuncComp depth");
    require(a.size() == static_cast<std::size_t>(L), "hybrid schedule needs a_1 .. a_L");
    for (int v : a) require(v >= 0, "a_l must be non-negative");
    require(!message_bits, "message_bits does not apply to the hybrid model");
  }
}

std::vector<int> ProtocolSpec::players() const {
  std::vector<int> out;
  if (is_two_party(kind)) {
    out = {kAlice, kBob};
    if (cot) out.push_back(kCharles);
  } else if (kind == ProtocolKind::kSparseTwoSum) {
    for (int j = 0; j <= block_players(); ++j) out.push_back(j);
  } else {
    for (int i = -1; i <= L; ++i) out.push_back(i);
  }
  return out;
}

int ProtocolSpec::output_player() const {
  if (is_two_party(kind)) return cot ? kCharles : kBob;
  if (kind == ProtocolKind::kSparseTwoSum) return block_players();
  return -1;
}

std::size_t ProtocolSpec::input_share(int player) const {
  if (kind != ProtocolKind::kHybridFuncComp) throw ValidationError("input shares are defined for the hybrid model");
  if (player <= 0) return 1;
  return sz(funccomp.N(player - 1));
}

std::size_t ProtocolSpec::prompt_length() const {
  switch (task_of(kind)) {
    case TaskKind::kPerCom:
      return 2 * sz(n);
    case TaskKind::kFuncComp:
      return sz(funccomp.prompt_length());
    default:
      return sz(n) + 1;
  }
}

std::vector<ChannelSlot> schedule(const ProtocolSpec& spec) {
  spec.validate();
  std::vector<ChannelSlot> out;
  if (is_two_party(spec.kind)) {
    const std::size_t alice = alice_message_bits(spec);
    const std::size_t cot = spec.cot ? cot_message_bits(spec) : 0;
    for (int l = 1; l <= spec.L; ++l) {
      out.push_back({1, l, kAlice, kBob, kMsgState, alice, true});
      if (spec.cot) out.push_back({1, l, kBob, kCharles, kMsgCot, cot, true});
    }
  } else if (spec.kind == ProtocolKind::kSparseTwoSum) {
    const std::size_t bits = alice_message_bits(spec);
    for (int j = 0; j < spec.block_players(); ++j) {
      out.push_back({1, 1, j, spec.block_players(), kMsgCompressed, bits, true});
    }
  } else {
    const std::size_t H = sz(spec.H), d = sz(spec.d), p = sz(spec.p);
    for (int l = 1; l <= spec.L; ++l) {
      for (int i = -1; i < spec.L; ++i) {
        for (int j = i + 1; j <= spec.L; ++j) {
          out.push_back({l, 0, i, j, kMsgForward, 0, false});
          out.push_back({l, 0, j, i, kMsgSoft, 2 * H * d * p * spec.input_share(i), true});
        }
      }
      for (int r = 1; r <= spec.a[sz(l - 1)]; ++r) {
        for (int s = spec.L; s >= 0; --s) out.push_back({l, r, s, s - 1, kMsgLinear, H * d * (d + 1) * p, true});
      }
    }
  }
  return out;
}

BudgetReport budget(const ProtocolSpec& spec) {
  BudgetReport r;
  r.channels = schedule(spec);
  for (const auto& c : r.channels) {
    if (!c.budgeted) continue;
    r.total_bits += c.budget;
    if (c.to == spec.output_player()) r.output_view_bits += c.budget;
  }
  if (spec.kind == ProtocolKind::kHybridFuncComp) {
    r.primary_message_bits = 2 * sz(spec.H) * sz(spec.d) * sz(spec.p) * spec.input_share(0);
    return r;
  }
  r.primary_message_bits = alice_message_bits(spec);
  if (spec.cot) r.cot_message_bits = cot_message_bits(spec);
  const auto n = static_cast<unsigned long>(spec.n);
  const auto M = static_cast<unsigned long>(spec.two_sum_modulus());
  switch (task_of(spec.kind)) {
    case TaskKind::kEva:
      r.alice_bits = r.primary_message_bits * sz(spec.L);
      r.distinguishable = pow_big(BigNat(n), n);
      r.distinguishable_formula = "n^n";
      break;
    case TaskKind::kPerCom:
      r.alice_bits = r.primary_message_bits * sz(spec.L);
      r.distinguishable = factorial(n);
      r.distinguishable_formula = "n!";
      break;
    default:
      if (spec.kind == ProtocolKind::kSparseTwoSum) {
        r.alice_bits = r.primary_message_bits;
        BigNat sum = 0;
        for (unsigned long j = 0; j <= static_cast<unsigned long>(spec.B); ++j) sum += binomial(M, j);
        r.distinguishable = sum;
        r.distinguishable_formula = "sum_{j<=B} C(M, j)";
      } else {
        r.alice_bits = r.primary_message_bits * sz(spec.L);
        r.distinguishable = binomial(M, n);
        r.distinguishable_formula = "C(M, n)";
      }
  }
  BigNat cap = 1;
  mpz_mul_2exp(cap.get_mpz_t(), cap.get_mpz_t(), r.alice_bits);
  r.pigeonhole_forced = cap < *r.distinguishable;
  return r;
}

// ---------------------------------------------------------------------------

std::vector<const Message*> InfoSet::received_from(int from, const std::string& kind) const {
  std::vector<const Message*> out;
  for (const auto& m : received_) {
    if (m.from == from && m.kind == kind) out.push_back(&m);
  }
  return out;
}

const InfoSet& InfoSet::forwarded() const {
  if (!forwarded_) {
    throw ForgetfulnessViolation("player " + std::to_string(player_) + " has no forwarded information set in scope");
  }
  return *forwarded_;
}

BitString InfoSet::serialize() const {
  BitString out = serialize_values(input_);
  for (const auto& m : received_) out.append(m.payload);
  return out;
}

std::vector<std::int64_t> player_input(const ProtocolSpec& spec, const Instance& inst, int player) {
  if (const auto* e = std::get_if<EvaInstance>(&inst)) {
    if (player == kAlice) return e->f;
    if (player == kBob) return {e->x};
    return {};
  }
  if (const auto* p = std::get_if<PerComInstance>(&inst)) {
    if (player == kAlice) return p->sigma;
    if (player == kBob) return p->tau;
    return {};
  }
  if (const auto* t = std::get_if<TwoSumInstance>(&inst)) {
    if (spec.kind == ProtocolKind::kSparseTwoSum) {
      if (player == spec.block_players()) return {t->x.back()};
      const auto begin = t->x.begin() + static_cast<std::ptrdiff_t>(player) * spec.B;
      return std::vector<std::int64_t>(begin, begin + spec.B);
    }
    if (player == kAlice) return std::vector<std::int64_t>(t->x.begin(), t->x.begin() + spec.n);
    if (player == kBob) return {t->x.back()};
    return {};
  }
  return funccomp_player_input(std::get<FuncCompInstance>(inst), player);
}

Output protocol_oracle(const ProtocolSpec& spec, const Instance& inst) {
  (void)spec;
  if (const auto* t = std::get_if<TwoSumInstance>(&inst)) return {oracle_two_sum(*t).back()};
  return oracle(inst);
}

RunResult run_protocol(const ProtocolSpec& spec, const StrategyBundle& bundle, const Instance& inst) {
  spec.validate();
  check_instance(spec, inst);
  std::map<int, std::shared_ptr<InfoSet>> infos;
  for (int p : spec.players()) infos[p] = std::make_shared<InfoSet>(p, player_input(spec, inst, p));

  RunResult rr;
  std::map<int, std::shared_ptr<const InfoSet>> snap;
  int snap_epoch = 0;
  for (const auto& slot : schedule(spec)) {
    if (spec.kind == ProtocolKind::kHybridFuncComp && slot.epoch != snap_epoch) {
      snap.clear();
      for (const auto& [p, info] : infos) snap[p] = std::make_shared<const InfoSet>(*info);
      snap_epoch = slot.epoch;
    }
    if (slot.kind == kMsgForward) {
      rr.transcript.push_back(record(slot, snap.at(slot.from)->serialize()));
      continue;
    }
    Message msg;
    if (slot.kind == kMsgSoft) {
      InfoSet view = *snap.at(slot.from);
      view.set_forwarded(snap.at(slot.to));
      msg = record(slot, checked_payload(bundle, view, slot));
    } else {
      msg = record(slot, checked_payload(bundle, *infos.at(slot.from), slot));
    }
    infos.at(slot.to)->deliver(msg);
    rr.transcript.push_back(std::move(msg));
  }

  if (spec.kind == ProtocolKind::kSparseTwoSum) {
    const int last = spec.block_players();
    if (!bundle.select) throw ProtocolViolation(bundle.name + ": sparse bundle has no select function");
    std::vector<int> sel = bundle.select(*infos.at(last));
    std::set<int> seen;
    for (int s : sel) {
      if (s < 0 || s >= last || !seen.insert(s).second) {
        throw ProtocolViolation(bundle.name + ": invalid block selection " + std::to_string(s));
      }
    }
    if (sel.size() > static_cast<std::size_t>(spec.k) * static_cast<std::size_t>(spec.H)) {
      throw ProtocolViolation(bundle.name + ": selected more than k blocks per head");
    }
    for (int s : sel) {
      Message msg{1, 2, s, last, kMsgSelect, infos.at(s)->serialize()};
      infos.at(last)->deliver(msg);
      rr.transcript.push_back(std::move(msg));
    }
  }
  rr.output = bundle.output(*infos.at(spec.output_player()));
  return rr;
}

BitString transcript_fingerprint(const Transcript& t, int viewpoint) {
  BitString out;
  for (const auto& m : t) {
    if (m.to == viewpoint && m.kind != kMsgForward) out.append(m.payload);
  }
  return out;
}

// ---------------------------------------------------------------------------

InputSpace enumerate_inputs(const ProtocolSpec& spec) {
  spec.validate();
  InputSpace s;
  const int n = spec.n;
  switch (task_of(spec.kind)) {
    case TaskKind::kEva:
      if (n > 4) throw ResourceError("Eva enumeration is capped at n <= 4");
      s.sender = all_tuples(n, n);
      for (int x = 1; x <= n; ++x) s.query.push_back({x});
      break;
    case TaskKind::kPerCom:
      if (n > 4) throw ResourceError("PerCom enumeration is capped at n <= 4");
      s.sender = all_permutations(n);
      s.query = s.sender;
      break;
    case TaskKind::kTwoSum: {
      if (n > 10) throw ResourceError("2-Sum enumeration is capped at n <= 10");
      const std::int64_t M = spec.two_sum_modulus();
      const BigNat count = binomial(static_cast<unsigned long>(M + n - 1), static_cast<unsigned long>(n));
      if (count * M > BigNat(static_cast<unsigned long>(kDefaultRunCap))) {
        throw ResourceError("2-Sum enumeration exceeds the run cap");
      }
      s.sender = nondecreasing_tuples(n, M);
      for (std::int64_t x = 1; x <= M; ++x) s.query.push_back({x});
      break;
    }
    case TaskKind::kFuncComp:
      throw ValidationError("hybrid inputs are not enumerated; use the independence check");
  }
  return s;
}

Instance assemble_instance(const ProtocolSpec& spec, const std::vector<std::int64_t>& sender,
                           const std::vector<std::int64_t>& query) {
  switch (task_of(spec.kind)) {
    case TaskKind::kEva: {
      require(query.size() == 1, "Eva query is a single value");
      return EvaInstance{spec.n, sender, query[0]};
    }
    case TaskKind::kPerCom:
      return PerComInstance{spec.n, sender, query};
    case TaskKind::kTwoSum: {
      TwoSumInstance t{spec.n, spec.two_sum_modulus(), sender};
      t.x.insert(t.x.end(), query.begin(), query.end());
      return t;
    }
    default:
      throw ValidationError("hybrid instances are not assembled from a sender/query split");
  }
}

CollisionSearch find_collision(const ProtocolSpec& spec, const StrategyBundle& bundle, const InputSpace& space,
                               std::size_t run_cap) {
  CollisionSearch cs;
  cs.sender_inputs = space.sender.size();
  if (space.sender.size() * space.query.size() > run_cap) {
    throw ResourceError("collision search needs " + std::to_string(space.sender.size() * space.query.size()) +
                        " runs, cap " + std::to_string(run_cap));
  }
  const int viewer = spec.output_player();
  for (std::size_t qi = 0; qi < space.query.size(); ++qi) {
    const auto& q = space.query[qi];
    struct Member {
      std::size_t sender;
      Output oracle;
    };
    std::map<BitString, std::vector<Member>> classes;
    for (std::size_t si = 0; si < space.sender.size(); ++si) {
      const Instance inst = assemble_instance(spec, space.sender[si], q);
      const auto rr = run_protocol(spec, bundle, inst);
      ++cs.runs;
      BitString fp = transcript_fingerprint(rr.transcript, viewer);
      cs.fingerprint_bits = std::max(cs.fingerprint_bits, fp.size());
      classes[std::move(fp)].push_back({si, protocol_oracle(spec, inst)});
    }
    cs.max_classes = std::max(cs.max_classes, classes.size());
    for (const auto& [fp, members] : classes) {
      cs.max_class_size = std::max(cs.max_class_size, members.size());
      if (qi == 0) ++cs.class_size_histogram[members.size()];
      if (cs.witness) continue;
      for (std::size_t t = 1; t < members.size(); ++t) {
        if (members[t].oracle == members[0].oracle) continue;
        CollisionWitness w;
        w.a = assemble_instance(spec, space.sender[members[0].sender], q);
        w.b = assemble_instance(spec, space.sender[members[t].sender], q);
        w.query = q;
        w.oracle_a = members[0].oracle;
        w.oracle_b = members[t].oracle;
        w.fingerprint = fp;
        cs.witness = std::move(w);
        break;
      }
    }
  }
  return cs;
}

CollisionSearch find_collision(const ProtocolSpec& spec, const StrategyBundle& bundle) {
  return find_collision(spec, bundle, enumerate_inputs(spec));
}

WitnessCheck check_witness(const CollisionWitness& w, const ProtocolSpec& spec, const StrategyBundle& bundle) {
  WitnessCheck c;
  const Instance a = assemble_instance(spec, sender_input(spec, w.a), w.query);
  const Instance b = assemble_instance(spec, sender_input(spec, w.b), w.query);
  const auto ra = run_protocol(spec, bundle, a);
  const auto rb = run_protocol(spec, bundle, b);
  const int viewer = spec.output_player();
  c.fingerprints_equal = transcript_fingerprint(ra.transcript, viewer) == transcript_fingerprint(rb.transcript, viewer);
  const Output oa = protocol_oracle(spec, a);
  const Output ob = protocol_oracle(spec, b);
  c.oracles_differ = oa != ob;
  c.protocol_errs = ra.output != oa || rb.output != ob;
  return c;
}

bool verify_witness(const CollisionWitness& w, const ProtocolSpec& spec, const StrategyBundle& bundle) {
  try {
    return check_witness(w, spec, bundle).ok();
  } catch (const ValidationError&) {
    return false;
  }
}

bool cot_replay_check(const ProtocolSpec& spec, const StrategyBundle& bundle, const Instance& inst) {
  require(spec.cot, "replay check needs a CoT spec");
  const auto rr = run_protocol(spec, bundle, inst);
  const auto slots = schedule(spec);
  InfoSet bob(kBob, player_input(spec, inst, kBob));
  for (std::size_t i = 0; i < rr.transcript.size(); ++i) {
    const auto& msg = rr.transcript[i];
    if (msg.to == kCharles && (msg.from != kBob || msg.kind != kMsgCot)) return false;
    if (msg.from == kBob && msg.kind == kMsgCot) {
      if (checked_payload(bundle, bob, slots.at(i)) != msg.payload) return false;
    }
    if (msg.to == kBob) bob.deliver(msg);
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

BitString block_message(const ProtocolSpec& spec, const StrategyBundle& bundle, int player,
                        const std::vector<std::int64_t>& content) {
  for (const auto& s : schedule(spec)) {
    if (s.from == player && s.kind == kMsgCompressed) return checked_payload(bundle, InfoSet(player, content), s);
  }
  throw ValidationError("no block player " + std::to_string(player));
}

}  // namespace

std::optional<BlockCollision> find_block_collision(const ProtocolSpec& spec, const StrategyBundle& bundle,
                                                   std::size_t run_cap, int player) {
  require(spec.kind == ProtocolKind::kSparseTwoSum, "block collisions need the sparse model");
  require(player >= 0 && player < spec.block_players(), "not a block player");
  const std::int64_t M = spec.two_sum_modulus();
  BigNat count = pow_big(BigNat(static_cast<unsigned long>(M)), static_cast<unsigned long>(spec.B));
  if (count > BigNat(static_cast<unsigned long>(run_cap))) throw ResourceError("block enumeration exceeds the run cap");
  std::map<BitString, std::vector<std::vector<std::int64_t>>> classes;
  std::set<std::set<std::int64_t>> sets;
  for (auto& tuple : all_tuples(spec.B, M)) {
    sets.insert(as_set(tuple));
    classes[block_message(spec, bundle, player, tuple)].push_back(std::move(tuple));
  }
  for (const auto& [msg, members] : classes) {
    for (std::size_t t = 1; t < members.size(); ++t) {
      auto sa = as_set(members[0]);
      auto sb = as_set(members[t]);
      if (sa == sb) continue;
      BlockCollision bc{player, members[0], members[t], msg, classes.size(), sets.size()};
      if (std::includes(sb.begin(), sb.end(), sa.begin(), sa.end())) std::swap(bc.a, bc.b);
      return bc;
    }
  }
  return std::nullopt;
}

SparseAdversary sparse_adversary(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b, int n,
                                 std::int64_t modulus, int block_size, const std::vector<int>& b_blocks) {
  require(block_size >= 1 && n % block_size == 0, "block size must divide n");
  require(a.size() == static_cast<std::size_t>(block_size) && b.size() == a.size(), "block contents need B entries");
  const auto sa = as_set(a), sb = as_set(b);
  std::vector<std::int64_t> diff;
  std::set_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(diff));
  if (diff.empty()) throw ValidationError("set(a) is contained in set(b): no distinguishing value");
  SparseAdversary adv;
  adv.v = diff.front();
  const std::int64_t r = ((-adv.v) % modulus + modulus) % modulus;
  adv.last_token = r == 0 ? modulus : r;
  adv.b_blocks = b_blocks;
  std::sort(adv.b_blocks.begin(), adv.b_blocks.end());
  const int blocks = n / block_size;
  adv.with_a = TwoSumInstance{n, modulus, {}};
  adv.with_b = adv.with_a;
  int a_blocks = 0;
  for (int j = 0; j < blocks; ++j) {
    const bool keep_b = std::binary_search(adv.b_blocks.begin(), adv.b_blocks.end(), j);
    a_blocks += keep_b ? 0 : 1;
    adv.with_b.x.insert(adv.with_b.x.end(), b.begin(), b.end());
    const auto& fill = keep_b ? b : a;
    adv.with_a.x.insert(adv.with_a.x.end(), fill.begin(), fill.end());
  }
  if (a_blocks == 0) throw ValidationError("every block carries b; the fillings coincide");
  adv.with_a.x.push_back(adv.last_token);
  adv.with_b.x.push_back(adv.last_token);
  adv.with_a.validate();
  adv.with_b.validate();
  return adv;
}

SparseAdversary sparse_adversary(const ProtocolSpec& spec, const StrategyBundle& bundle,
                                 const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  require(spec.kind == ProtocolKind::kSparseTwoSum, "sparse adversary needs the sparse model");
  // The all-b filling does not depend on the block list; any a-block will do.
  const auto probe = sparse_adversary(a, b, spec.n, spec.two_sum_modulus(), spec.B, {});
  const auto rr = run_protocol(spec, bundle, probe.with_b);
  std::vector<int> keep;
  for (const auto& m : rr.transcript) {
    if (m.kind == kMsgSelect) keep.push_back(m.from);
  }
  for (int j = 0; j < spec.block_players(); ++j) {
    if (std::find(keep.begin(), keep.end(), j) != keep.end()) continue;
    if (block_message(spec, bundle, j, a) != block_message(spec, bundle, j, b)) keep.push_back(j);
  }
  return sparse_adversary(a, b, spec.n, spec.two_sum_modulus(), spec.B, keep);
}

std::optional<SparseAttack> find_sparse_attack(const ProtocolSpec& spec, const StrategyBundle& bundle,
                                               std::size_t run_cap) {
  for (int j = 0; j < spec.block_players(); ++j) {
    auto bc = find_block_collision(spec, bundle, run_cap, j);
    if (!bc) continue;
    try {
      auto adv = sparse_adversary(spec, bundle, bc->a, bc->b);
      return SparseAttack{std::move(*bc), std::move(adv)};
    } catch (const ValidationError&) {
      // player j was selected or no block collides; try the next one
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

IndependenceReport soft_transcript_independence_check(
    const ProtocolSpec& spec, const StrategyBundle& bundle, const FuncCompInstance& base,
    const std::map<int, std::vector<std::vector<std::int64_t>>>& alternatives) {
  require(spec.kind == ProtocolKind::kHybridFuncComp, "independence check needs the hybrid model");
  const std::vector<int> roster = spec.players();
  std::vector<std::vector<std::vector<std::int64_t>>> options;
  std::size_t total = 1;
  for (int p : roster) {
    std::vector<std::vector<std::int64_t>> opts{funccomp_player_input(base, p)};
    if (auto it = alternatives.find(p); it != alternatives.end()) {
      for (const auto& alt : it->second) {
        if (std::find(opts.begin(), opts.end(), alt) == opts.end()) opts.push_back(alt);
      }
    }
    total *= opts.size();
    if (total > 65536) throw ResourceError("independence sweep exceeds 65536 runs");
    options.push_back(std::move(opts));
  }

  IndependenceReport rep;
  // (record index, inputs of the players the record may depend on) -> payload
  std::map<std::pair<std::size_t, std::vector<std::vector<std::int64_t>>>, BitString> seen;
  std::vector<std::size_t> pick(roster.size(), 0);
  for (std::size_t run = 0; run < total; ++run) {
    std::size_t rest = run;
    FuncCompInstance inst = base;
    for (std::size_t t = 0; t < roster.size(); ++t) {
      pick[t] = rest % options[t].size();
      rest /= options[t].size();
      inst = funccomp_with_player_input(inst, roster[t], options[t][pick[t]]);
    }
    const auto rr = run_protocol(spec, bundle, inst);
    ++rep.runs;
    for (std::size_t r = 0; r < rr.transcript.size(); ++r) {
      const auto& msg = rr.transcript[r];
      int lowest;
      if (msg.kind == kMsgSoft) {
        lowest = msg.to;
      } else if (msg.kind == kMsgLinear) {
        lowest = msg.from;
      } else {
        continue;
      }
      std::vector<std::vector<std::int64_t>> key;
      for (std::size_t t = 0; t < roster.size(); ++t) {
        if (roster[t] >= lowest) key.push_back(options[t][pick[t]]);
      }
      ++rep.records_checked;
      auto [it, fresh] = seen.emplace(std::make_pair(r, std::move(key)), msg.payload);
      if (!fresh && it->second != msg.payload) {
        ++rep.violations;
        if (rep.details.size() < 8) {
          std::ostringstream os;
          os << msg.kind << " " << msg.from << "->" << msg.to << " epoch " << msg.epoch << " round " << msg.round
             << " changed with the inputs of players below " << lowest;
          rep.details.push_back(os.str());
        }
      }
    }
  }
  return rep;
}

}  // namespace attnlab
