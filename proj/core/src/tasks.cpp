#include "attnlab/tasks.hpp"

#include <algorithm>
#include <limits>

#include "attnlab/errors.hpp"
#include "attnlab/random.hpp"

namespace attnlab {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  if (a != 0 && b > std::numeric_limits<std::int64_t>::max() / a) {
    throw ResourceError("FuncComp sizes overflow 64-bit indices; use derive_params for big magnitudes");
  }
  return a * b;
}

bool in_range(std::int64_t v, std::int64_t hi) { return v >= 1 && v <= hi; }

PBitNumber encode_value(std::int64_t v, const PrecisionConfig& cfg) {
  const Rational r(static_cast<long>(v));
  if (abs(r) > cfg.max_value()) {
    throw PrecisionError("value " + std::to_string(v) + " is not representable with " + to_string(cfg));
  }
  return quantize(r, cfg);
}

Token make_token(std::int64_t owner, std::int64_t position, std::int64_t value, const PromptLayout& layout) {
  Token t(static_cast<std::size_t>(layout.width), PBitNumber::zero(layout.precision));
  t[kSlotOwner] = encode_value(owner, layout.precision);
  t[kSlotPosition] = encode_value(position, layout.precision);
  t[kSlotValue] = encode_value(value, layout.precision);
  t[kSlotBias] = encode_value(1, layout.precision);
  return t;
}

std::int64_t slot_int(const Token& t, int slot) {
  const Rational v = t.at(static_cast<std::size_t>(slot)).value();
  if (v.get_den() != 1) throw ValidationError("token slot does not hold an integer");
  return v.get_num().get_si();
}

void check_owner(const Token& t, std::int64_t owner) {
  if (slot_int(t, kSlotOwner) != owner) {
    throw ValidationError("unexpected token owner " + std::to_string(slot_int(t, kSlotOwner)) +
                          ", expected " + std::to_string(owner));
  }
}

std::vector<std::int64_t> random_permutation(int n, Rng& rng) {
  std::vector<std::int64_t> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i + 1;
  shuffle(p, rng);
  return p;
}

}  // namespace

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::kEva:
      return "eva";
    case TaskKind::kPerCom:
      return "percom";
    case TaskKind::kTwoSum:
      return "twosum";
    case TaskKind::kFuncComp:
      return "funccomp";
  }
  return "unknown";
}

TaskKind parse_task(const std::string& name) {
  if (name == "eva") return TaskKind::kEva;
  if (name == "percom") return TaskKind::kPerCom;
  if (name == "twosum" || name == "two_sum" || name == "2sum") return TaskKind::kTwoSum;
  if (name == "funccomp") return TaskKind::kFuncComp;
  throw ValidationError("unknown task '" + name + "'");
}

void EvaInstance::validate() const {
  require(n >= 1, "Eva needs n >= 1");
  require(f.size() == static_cast<std::size_t>(n), "Eva table must have n entries");
  for (auto v : f) require(in_range(v, n), "Eva table entry outside [n]");
  require(in_range(x, n), "Eva query outside [n]");
}

void PerComInstance::validate() const {
  require(n >= 1, "PerCom needs n >= 1");
  for (const auto* perm : {&sigma, &tau}) {
    require(perm->size() == static_cast<std::size_t>(n), "PerCom permutation must have n entries");
    std::vector<bool> seen(static_cast<std::size_t>(n) + 1, false);
    for (auto v : *perm) {
      require(in_range(v, n), "PerCom entry outside [n]");
      require(!seen[static_cast<std::size_t>(v)], "PerCom input is not a bijection");
      seen[static_cast<std::size_t>(v)] = true;
    }
  }
}

void TwoSumInstance::validate() const {
  require(n >= 0, "2-Sum needs n >= 0");
  require(modulus >= 1, "2-Sum modulus must be positive");
  require(x.size() == static_cast<std::size_t>(n) + 1, "2-Sum sequence must have n + 1 entries");
  for (auto v : x) require(in_range(v, modulus), "2-Sum entry outside [M]");
}

std::int64_t two_sum_modulus(int n, ModulusPreset preset) {
  require(n >= 1, "2-Sum needs n >= 1");
  return preset == ModulusPreset::kLinear ? n : static_cast<std::int64_t>(n) * n;
}

void FuncCompSpec::validate() const {
  require(L >= 2, "FuncComp needs L >= 2");
  require(m >= 1, "FuncComp needs m >= 1");
  require(n.size() == static_cast<std::size_t>(L - 1), "FuncComp needs n_1 .. n_{L-1}");
  for (auto v : n) require(v >= 1, "FuncComp n_l must be positive");
  (void)N(L - 1);
}

std::int64_t FuncCompSpec::N(int l) const {
  require(l >= 0 && l <= L - 1, "N_l index outside [0, L-1]");
  std::int64_t out = m;
  for (int i = 1; i <= l; ++i) out = checked_mul(out, n[static_cast<std::size_t>(i - 1)]);
  return out;
}

std::int64_t FuncCompSpec::prompt_length() const {
  std::int64_t total = 2;
  for (int l = 0; l < L; ++l) total += N(l);
  return total;
}

std::int64_t FuncCompSpec::pair_index(int l, std::int64_t w_l, std::int64_t i_l) const {
  require(l >= 1 && l <= L - 1, "pairing index outside [1, L-1]");
  require(in_range(w_l, n[static_cast<std::size_t>(l - 1)]), "query component outside [n_l]");
  require(in_range(i_l, N(l - 1)), "partial value outside [N_{l-1}]");
  return (w_l - 1) * N(l - 1) + i_l;
}

std::int64_t FuncCompSpec::query_count() const {
  std::int64_t out = 1;
  for (auto v : n) out = checked_mul(out, v);
  return out;
}

void FuncCompInstance::validate() const {
  spec.validate();
  require(in_range(z0, spec.m), "z_0 outside [m]");
  require(z.size() == static_cast<std::size_t>(spec.L), "FuncComp needs tables z_1 .. z_L");
  for (int l = 1; l <= spec.L; ++l) {
    const std::int64_t size = spec.N(l - 1);
    const auto& t = table(l);
    require(t.size() == static_cast<std::size_t>(size), "z_l table must have N_{l-1} entries");
    for (auto v : t) require(in_range(v, size), "z_l entry outside [N_{l-1}]");
  }
  require(w.size() == static_cast<std::size_t>(spec.L - 1), "query must have L-1 components");
  for (int l = 1; l < spec.L; ++l) {
    require(in_range(w[static_cast<std::size_t>(l - 1)], spec.n[static_cast<std::size_t>(l - 1)]),
            "query component outside [n_l]");
  }
}

TaskKind task_of(const Instance& inst) {
  return static_cast<TaskKind>(inst.index());
}

void validate(const Instance& inst) {
  std::visit([](const auto& i) { i.validate(); }, inst);
}

std::int64_t oracle_eva(const EvaInstance& inst) {
  inst.validate();
  return inst.f[static_cast<std::size_t>(inst.x - 1)];
}

std::vector<std::int64_t> oracle_percom(const PerComInstance& inst) {
  inst.validate();
  std::vector<std::int64_t> out(static_cast<std::size_t>(inst.n));
  for (int i = 0; i < inst.n; ++i) {
    const auto t = inst.tau[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = inst.sigma[static_cast<std::size_t>(t - 1)];
  }
  return out;
}

std::vector<std::int64_t> oracle_two_sum(const TwoSumInstance& inst) {
  inst.validate();
  // Residues seen so far; y_i asks whether -x_i mod M was seen.
  std::vector<bool> seen(static_cast<std::size_t>(inst.modulus), false);
  std::vector<std::int64_t> y;
  y.reserve(inst.x.size());
  for (auto v : inst.x) {
    const std::int64_t r = v % inst.modulus;
    const std::int64_t need = (inst.modulus - r) % inst.modulus;
    y.push_back(seen[static_cast<std::size_t>(need)] ? 1 : 0);
    seen[static_cast<std::size_t>(r)] = true;
  }
  return y;
}

std::vector<std::int64_t> funccomp_trace(const FuncCompInstance& inst) {
  inst.validate();
  const auto& spec = inst.spec;
  std::vector<std::int64_t> trace;
  trace.push_back(inst.z0);
  // N_0 = m, so i_0 in [m] indexes z_1 directly.
  trace.push_back(inst.table(1)[static_cast<std::size_t>(inst.z0 - 1)]);
  for (int l = 1; l <= spec.L - 1; ++l) {
    const std::int64_t idx = spec.pair_index(l, inst.w[static_cast<std::size_t>(l - 1)], trace.back());
    const auto& t = inst.table(l + 1);
    if (idx < 1 || idx > static_cast<std::int64_t>(t.size())) {
      throw ValidationError("malformed FuncComp instance: index outside table range");
    }
    trace.push_back(t[static_cast<std::size_t>(idx - 1)]);
  }
  return trace;
}

std::int64_t oracle_funccomp(const FuncCompInstance& inst) { return funccomp_trace(inst).back(); }

Output oracle(const Instance& inst) {
  struct Visitor {
    Output operator()(const EvaInstance& i) const { return {oracle_eva(i)}; }
    Output operator()(const PerComInstance& i) const { return oracle_percom(i); }
    Output operator()(const TwoSumInstance& i) const { return oracle_two_sum(i); }
    Output operator()(const FuncCompInstance& i) const { return {oracle_funccomp(i)}; }
  };
  return std::visit(Visitor{}, inst);
}

Instance gen_instance(TaskKind task, const GenParams& params, std::uint64_t seed) {
  Rng rng(seed);
  switch (task) {
    case TaskKind::kEva: {
      require(params.n >= 1, "Eva needs n >= 1");
      EvaInstance inst;
      inst.n = params.n;
      for (int i = 0; i < params.n; ++i) inst.f.push_back(uniform_int(rng, 1, params.n));
      inst.x = uniform_int(rng, 1, params.n);
      return inst;
    }
    case TaskKind::kPerCom: {
      require(params.n >= 1, "PerCom needs n >= 1");
      PerComInstance inst;
      inst.n = params.n;
      inst.sigma = random_permutation(params.n, rng);
      inst.tau = random_permutation(params.n, rng);
      return inst;
    }
    case TaskKind::kTwoSum: {
      require(params.n >= 1, "2-Sum needs n >= 1");
      TwoSumInstance inst;
      inst.n = params.n;
      inst.modulus = params.modulus.value_or(two_sum_modulus(params.n, params.modulus_preset));
      require(inst.modulus >= 1, "2-Sum modulus must be positive");
      for (int i = 0; i <= params.n; ++i) inst.x.push_back(uniform_int(rng, 1, inst.modulus));
      return inst;
    }
    case TaskKind::kFuncComp: {
      const auto& spec = params.funccomp;
      spec.validate();
      FuncCompInstance inst;
      inst.spec = spec;
      inst.z0 = uniform_int(rng, 1, spec.m);
      for (int l = 1; l <= spec.L; ++l) {
        const std::int64_t size = spec.N(l - 1);
        if (size > (std::int64_t{1} << 24)) throw ResourceError("FuncComp table too large to generate");
        std::vector<std::int64_t> t(static_cast<std::size_t>(size));
        for (auto& v : t) v = uniform_int(rng, 1, size);
        inst.z.push_back(std::move(t));
      }
      for (auto nl : spec.n) inst.w.push_back(uniform_int(rng, 1, nl));
      return inst;
    }
  }
  throw ValidationError("unknown task");
}

void PromptLayout::validate() const {
  precision.validate();
  require(width >= 4, "prompt layout needs at least 4 slots");
}

std::int64_t funccomp_query_index(const FuncCompSpec& spec, const std::vector<std::int64_t>& w) {
  require(w.size() == spec.n.size(), "query must have L-1 components");
  std::int64_t idx = 0;
  for (std::size_t l = w.size(); l-- > 0;) {
    require(in_range(w[l], spec.n[l]), "query component outside [n_l]");
    idx = idx * spec.n[l] + (w[l] - 1);
  }
  return idx + 1;
}

std::vector<std::int64_t> funccomp_query_from_index(const FuncCompSpec& spec, std::int64_t index) {
  require(in_range(index, spec.query_count()), "query index outside range");
  std::vector<std::int64_t> w;
  std::int64_t rest = index - 1;
  for (auto nl : spec.n) {
    w.push_back(rest % nl + 1);
    rest /= nl;
  }
  return w;
}

std::vector<std::int64_t> funccomp_player_input(const FuncCompInstance& inst, int player) {
  if (player == -1) return inst.w;
  if (player == 0) return {inst.z0};
  require(player >= 1 && player <= inst.spec.L, "player outside [-1, L]");
  return inst.table(player);
}

FuncCompInstance funccomp_with_player_input(const FuncCompInstance& inst, int player,
                                            const std::vector<std::int64_t>& input) {
  FuncCompInstance out = inst;
  if (player == -1) {
    out.w = input;
  } else if (player == 0) {
    require(input.size() == 1, "player 0 holds a single value");
    out.z0 = input[0];
  } else {
    require(player >= 1 && player <= inst.spec.L, "player outside [-1, L]");
    out.z[static_cast<std::size_t>(player - 1)] = input;
  }
  return out;
}

Sequence encode_funccomp_player(const FuncCompSpec& spec, int player,
                                const std::vector<std::int64_t>& input, const PromptLayout& layout) {
  layout.validate();
  Sequence out;
  if (player == -1) {
    out.push_back(make_token(-1, 1, funccomp_query_index(spec, input), layout));
  } else if (player == 0) {
    require(input.size() == 1, "player 0 holds a single value");
    out.push_back(make_token(0, 1, input[0], layout));
  } else {
    for (std::size_t j = 0; j < input.size(); ++j) {
      out.push_back(make_token(player, static_cast<std::int64_t>(j) + 1, input[j], layout));
    }
  }
  return out;
}

Token prompt_token(std::int64_t owner, std::int64_t position, std::int64_t value, const PromptLayout& layout) {
  layout.validate();
  return make_token(owner, position, value, layout);
}

Sequence encode_prompt(const Instance& inst, const PromptLayout& layout) {
  validate(inst);
  layout.validate();
  Sequence out;
  if (const auto* e = std::get_if<EvaInstance>(&inst)) {
    for (int i = 0; i < e->n; ++i) out.push_back(make_token(1, i + 1, e->f[static_cast<std::size_t>(i)], layout));
    out.push_back(make_token(-1, 1, e->x, layout));
  } else if (const auto* p = std::get_if<PerComInstance>(&inst)) {
    for (int i = 0; i < p->n; ++i) out.push_back(make_token(2, i + 1, p->sigma[static_cast<std::size_t>(i)], layout));
    for (int i = 0; i < p->n; ++i) out.push_back(make_token(1, i + 1, p->tau[static_cast<std::size_t>(i)], layout));
  } else if (const auto* t = std::get_if<TwoSumInstance>(&inst)) {
    for (std::size_t i = 0; i < t->x.size(); ++i) {
      out.push_back(make_token(1, static_cast<std::int64_t>(i) + 1, t->x[i], layout));
    }
  } else {
    const auto& f = std::get<FuncCompInstance>(inst);
    for (int player = f.spec.L; player >= -1; --player) {
      auto part = encode_funccomp_player(f.spec, player, funccomp_player_input(f, player), layout);
      out.insert(out.end(), part.begin(), part.end());
    }
  }
  return out;
}

PromptShape shape_of(const Instance& inst) {
  PromptShape shape;
  shape.task = task_of(inst);
  if (const auto* t = std::get_if<TwoSumInstance>(&inst)) shape.modulus = t->modulus;
  if (const auto* f = std::get_if<FuncCompInstance>(&inst)) shape.funccomp = f->spec;
  return shape;
}

Instance decode_prompt(const PromptShape& shape, const Sequence& tokens) {
  switch (shape.task) {
    case TaskKind::kEva: {
      require(tokens.size() >= 2, "Eva prompt needs at least 2 tokens");
      EvaInstance inst;
      inst.n = static_cast<int>(tokens.size()) - 1;
      for (int i = 0; i < inst.n; ++i) {
        const auto& t = tokens[static_cast<std::size_t>(i)];
        check_owner(t, 1);
        inst.f.push_back(slot_int(t, kSlotValue));
      }
      check_owner(tokens.back(), -1);
      inst.x = slot_int(tokens.back(), kSlotValue);
      inst.validate();
      return inst;
    }
    case TaskKind::kPerCom: {
      require(tokens.size() % 2 == 0 && !tokens.empty(), "PerCom prompt needs 2n tokens");
      PerComInstance inst;
      inst.n = static_cast<int>(tokens.size() / 2);
      for (int i = 0; i < inst.n; ++i) {
        check_owner(tokens[static_cast<std::size_t>(i)], 2);
        inst.sigma.push_back(slot_int(tokens[static_cast<std::size_t>(i)], kSlotValue));
        check_owner(tokens[static_cast<std::size_t>(inst.n + i)], 1);
        inst.tau.push_back(slot_int(tokens[static_cast<std::size_t>(inst.n + i)], kSlotValue));
      }
      inst.validate();
      return inst;
    }
    case TaskKind::kTwoSum: {
      require(!tokens.empty(), "2-Sum prompt is empty");
      TwoSumInstance inst;
      inst.n = static_cast<int>(tokens.size()) - 1;
      inst.modulus = shape.modulus;
      for (const auto& t : tokens) {
        check_owner(t, 1);
        inst.x.push_back(slot_int(t, kSlotValue));
      }
      inst.validate();
      return inst;
    }
    case TaskKind::kFuncComp: {
      const auto& spec = shape.funccomp;
      spec.validate();
      require(static_cast<std::int64_t>(tokens.size()) == spec.prompt_length(), "FuncComp prompt has the wrong length");
      FuncCompInstance inst;
      inst.spec = spec;
      inst.z.resize(static_cast<std::size_t>(spec.L));
      std::size_t pos = 0;
      for (int player = spec.L; player >= 1; --player) {
        const std::int64_t size = spec.N(player - 1);
        for (std::int64_t j = 0; j < size; ++j) {
          const auto& t = tokens[pos++];
          check_owner(t, player);
          inst.z[static_cast<std::size_t>(player - 1)].push_back(slot_int(t, kSlotValue));
        }
      }
      check_owner(tokens[pos], 0);
      inst.z0 = slot_int(tokens[pos++], kSlotValue);
      check_owner(tokens[pos], -1);
      inst.w = funccomp_query_from_index(spec, slot_int(tokens[pos], kSlotValue));
      inst.validate();
      return inst;
    }
  }
  throw ValidationError("unknown task");
}

}  // namespace attnlab
