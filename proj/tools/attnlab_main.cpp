// attnlab: instance generation, solvers, collision search, parameter reports
// and the desk-scale hierarchy table.
//
//   attnlab gen eva n=16 seed=1
//   attnlab solve inst.json mechanism=retrieval
//   attnlab collide rnn_eva n=3 budget=4 [strategy]
//   attnlab params 1 2 1 2 [schedule=default|adversarial|1,64]
//   attnlab budget linear_twosum n=8
//   attnlab table hierarchy
//
// Positional key=value pairs and --config (a JSON object of the same keys,
// which wins over the command line). Output goes to --out, else to
// $ATTNLAB_OUT_DIR/<default name>, else stdout.
// Exit codes: 0 ok, 2 validation error, 3 resource cap, 1 anything else.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <attnlab/comm.hpp>
#include <attnlab/constructions.hpp>
#include <attnlab/errors.hpp>
#include <attnlab/params.hpp>
#include <attnlab/random.hpp>
#include <attnlab/serialization.hpp>
#include <attnlab/tasks.hpp>

using namespace attnlab;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kOutDirEnv = "ATTNLAB_OUT_DIR";

struct Options {
  std::vector<std::string> raw;
  std::string config;
  std::string out;
  std::string format = "json";
  std::uint64_t seed = 1;
};

struct Args {
  std::vector<std::string> pos;
  std::map<std::string, std::string> kv;

  bool has(const std::string& k) const { return kv.count(k) != 0; }
  std::string str(const std::string& k, const std::string& def) const {
    auto it = kv.find(k);
    return it == kv.end() ? def : it->second;
  }
  std::int64_t i64(const std::string& k, std::int64_t def) const {
    auto it = kv.find(k);
    if (it == kv.end()) return def;
    return parse_i64(it->second, k);
  }
  int num(const std::string& k, int def) const { return static_cast<int>(i64(k, def)); }
  bool flag(const std::string& k, bool def) const {
    auto it = kv.find(k);
    if (it == kv.end()) return def;
    if (it->second == "1" || it->second == "true" || it->second == "yes") return true;
    if (it->second == "0" || it->second == "false" || it->second == "no") return false;
    throw ValidationError("bad boolean for " + k + ": " + it->second);
  }
  std::vector<std::int64_t> list(const std::string& k) const {
    std::vector<std::int64_t> out;
    std::stringstream ss(str(k, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(parse_i64(item, k));
    }
    return out;
  }

  static std::int64_t parse_i64(const std::string& s, const std::string& k) {
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(s, &used, 10);
    } catch (const std::exception&) {
      throw ValidationError("bad integer for " + k + ": " + s);
    }
    if (used != s.size()) throw ValidationError("bad integer for " + k + ": " + s);
    return v;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Args collect(Options& o) {
  Args a;
  for (const auto& t : o.raw) {
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      a.pos.push_back(t);
    } else {
      a.kv[t.substr(0, eq)] = t.substr(eq + 1);
    }
  }
  if (!o.config.empty()) {
    json cfg;
    try {
      cfg = json::parse(read_file(o.config));
    } catch (const json::exception& e) {
      throw ValidationError(std::string("bad config file: ") + e.what());
    }
    if (!cfg.is_object()) throw ValidationError("config file must hold a JSON object");
    for (const auto& [k, v] : cfg.items()) {
      std::string s;
      if (v.is_string()) {
        s = v.get<std::string>();
      } else if (v.is_array()) {
        for (const auto& e : v) s += (s.empty() ? "" : ",") + (e.is_string() ? e.get<std::string>() : e.dump());
      } else {
        s = v.dump();
      }
      if (k == "args" && v.is_array()) {
        a.pos.clear();
        for (const auto& e : v) a.pos.push_back(e.is_string() ? e.get<std::string>() : e.dump());
        continue;
      }
      a.kv[k] = s;
    }
  }
  if (a.has("out")) o.out = a.str("out", "");
  if (a.has("format")) o.format = a.str("format", "json");
  if (a.has("seed")) {
    o.seed = static_cast<std::uint64_t>(a.i64("seed", 1));
  }
  if (o.format != "json" && o.format != "csv") throw ValidationError("format must be json or csv");
  return a;
}

// Destination for a produced file; empty means stdout.
std::string destination(const Options& o, const std::string& default_name) {
  if (!o.out.empty()) return o.out;
  if (const char* dir = std::getenv(kOutDirEnv); dir != nullptr && *dir != '\0') {
    std::filesystem::create_directories(dir);
    return (std::filesystem::path(dir) / default_name).string();
  }
  return {};
}

void emit(const Options& o, const std::string& default_name, const std::string& text) {
  const auto path = destination(o, default_name);
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
  std::cerr << "wrote " << path << "\n";
}

json as_json(const std::string& text) { return json::parse(text); }

json dec_array(const std::vector<std::int64_t>& xs) {
  json a = json::array();
  for (auto v : xs) a.push_back(std::to_string(v));
  return a;
}

// ---------------------------------------------------------------------------
// gen

GenParams gen_params(const Args& a, TaskKind task) {
  GenParams gp;
  gp.n = a.num("n", 4);
  if (a.has("modulus")) gp.modulus = a.i64("modulus", 0);
  const auto preset = a.str("preset", "linear");
  if (preset == "square") {
    gp.modulus_preset = ModulusPreset::kSquare;
  } else if (preset != "linear") {
    throw ValidationError("preset must be linear or square");
  }
  if (task == TaskKind::kFuncComp) {
    gp.funccomp.L = a.num("L", 2);
    gp.funccomp.m = a.i64("m", 2);
    auto ns = a.list("ns");
    // Defaults are the toy shape (m = 2, every n_l = 2); "toy" on the command line is accepted as a no-op.
    if (ns.empty()) ns.assign(static_cast<std::size_t>(std::max(0, gp.funccomp.L - 1)), 2);
    gp.funccomp.n = ns;
  }
  if (task != TaskKind::kFuncComp && gp.n < 1) throw ValidationError("n must be positive");
  return gp;
}

int cmd_gen(Options& o) {
  Args a = collect(o);
  if (a.pos.empty()) throw ValidationError("gen needs a task: eva | percom | twosum | funccomp");
  const auto task = parse_task(a.pos[0]);
  const auto inst = gen_instance(task, gen_params(a, task), o.seed);
  if (o.format == "csv") {
    emit(o, to_string(task) + "_oracle.csv", oracle_csv(inst));
  } else {
    emit(o, to_string(task) + "_instance.json", instance_to_json(inst));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// solve

json solve_record(const Instance& inst, const Args& a) {
  const auto mech = a.str("mechanism", "retrieval");
  const auto task = task_of(inst);
  json r;
  r["task"] = to_string(task);
  r["mechanism"] = mech;
  if (mech != "retrieval" && mech != "full") throw ValidationError("unknown mechanism: " + mech);
  if (task != TaskKind::kEva && task != TaskKind::kPerCom) {
    throw ValidationError("mechanism " + mech + " solves eva and percom only");
  }
  const int n = task == TaskKind::kEva ? std::get<EvaInstance>(inst).n : std::get<PerComInstance>(inst).n;
  const auto un = static_cast<std::uint64_t>(n);
  SolverConfig cfg;
  const int D = a.num("D", retrieval_key_width(un));
  cfg.D = D;
  PrecisionConfig prec = retrieval_precision(std::max(un, kMinRetrievalSize));
  if (a.has("p")) prec.total_bits = a.num("p", prec.total_bits);
  if (a.has("s")) prec.frac_bits = a.num("s", prec.frac_bits);
  if (a.has("p") && !a.has("s")) prec.frac_bits = std::min(prec.frac_bits, std::max(0, prec.total_bits - 1));
  cfg.precision = prec;
  if (a.str("log", "natural") == "binary") cfg.retrieval.base = LogBase::kBinary;
  const Output want = oracle(inst);
  r["n"] = std::to_string(n);
  r["H"] = 1;
  r["d"] = 5 * D;
  r["p"] = prec.total_bits;
  r["frac_bits"] = prec.frac_bits;
  r["hdp"] = std::to_string(static_cast<std::int64_t>(5) * D * prec.total_bits);
  r["oracle"] = dec_array(want);
  try {
    Output got;
    if (task == TaskKind::kEva) {
      got = {solve_eva(std::get<EvaInstance>(inst), cfg)};
    } else {
      got = solve_percom(std::get<PerComInstance>(inst), cfg);
    }
    r["answer"] = dec_array(got);
    r["agreement"] = got == want;
    r["error"] = nullptr;
  } catch (const Error& e) {
    r["answer"] = nullptr;
    r["agreement"] = false;
    r["error"] = e.what();
  }
  return r;
}

int cmd_solve(Options& o) {
  Args a = collect(o);
  if (a.pos.empty()) throw ValidationError("solve needs an instance file");
  const auto inst = instance_from_json(read_file(a.pos[0]));
  emit(o, "solve.json", solve_record(inst, a).dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// collide / budget

ProtocolSpec protocol_spec(const Args& a, const std::string& kind) {
  ProtocolSpec s;
  s.kind = parse_protocol_kind(kind);
  s.L = a.num("L", 1);
  s.H = a.num("H", 1);
  s.d = a.num("d", 1);
  s.m = a.num("m", 1);
  s.n = a.num("n", 2);
  s.modulus = a.i64("modulus", 0);
  s.cot = a.flag("cot", false);
  s.B = a.num("B", 1);
  s.k = a.num("k", 1);
  if (a.has("budget")) s.message_bits = static_cast<std::size_t>(a.i64("budget", 0));
  // Without an explicit p, size the fields so an m-dimensional state fills the budget.
  const int fill = s.message_bits ? static_cast<int>(*s.message_bits) / std::max(1, s.L * s.H * s.m) : 8;
  s.p = a.num("p", std::max(2, fill));
  if (s.kind == ProtocolKind::kHybridFuncComp) {
    s.L = a.num("L", 2);
    s.funccomp.L = s.L;
    s.funccomp.m = a.i64("fm", 2);
    auto ns = a.list("ns");
    if (ns.empty()) ns.assign(static_cast<std::size_t>(s.L - 1), 2);
    s.funccomp.n = ns;
    for (auto v : a.list("a")) s.a.push_back(static_cast<int>(v));
    if (s.a.empty()) s.a.assign(static_cast<std::size_t>(s.L), 1);
  }
  s.validate();
  return s;
}

json collide_one(const ProtocolSpec& spec, const StrategyBundle& b, const BudgetReport& rep) {
  json r;
  r["strategy"] = b.name;
  const auto cs = find_collision(spec, b);
  r["runs"] = cs.runs;
  r["sender_inputs"] = cs.sender_inputs;
  r["max_classes"] = cs.max_classes;
  r["max_class_size"] = cs.max_class_size;
  r["fingerprint_bits"] = cs.fingerprint_bits;
  json hist = json::object();
  for (const auto& [size, count] : cs.class_size_histogram) hist[std::to_string(size)] = count;
  r["class_size_histogram"] = std::move(hist);
  // Pigeonhole bookkeeping: classes seen by one query never exceed 2^(view bits).
  const auto view = rep.output_view_bits;
  r["classes_within_2_pow_view_bits"] = view >= 63 || cs.max_classes <= (std::size_t{1} << view);
  r["witness_found"] = cs.witness.has_value();
  if (cs.witness) {
    r["verified"] = verify_witness(*cs.witness, spec, b);
    r["witness"] = as_json(witness_to_json({spec, b.name, *cs.witness}));
  } else {
    r["verified"] = false;
    r["witness"] = nullptr;
  }
  if (spec.kind == ProtocolKind::kSparseTwoSum) {
    const auto atk = find_sparse_attack(spec, b);
    json s;
    s["found"] = atk.has_value();
    if (atk) {
      s["player"] = atk->collision.player;
      s["a"] = dec_array(atk->collision.a);
      s["b"] = dec_array(atk->collision.b);
      s["with_a"] = as_json(instance_to_json(atk->adversary.with_a));
      s["with_b"] = as_json(instance_to_json(atk->adversary.with_b));
      s["oracles_differ"] = oracle_two_sum(atk->adversary.with_a).back() != oracle_two_sum(atk->adversary.with_b).back();
    }
    r["sparse_attack"] = std::move(s);
  }
  return r;
}

int cmd_collide(Options& o) {
  Args a = collect(o);
  if (a.pos.empty()) throw ValidationError("collide needs a protocol kind");
  const auto spec = protocol_spec(a, a.pos[0]);
  const auto rep = budget(spec);
  std::vector<StrategyBundle> bundles;
  const auto name = a.pos.size() > 1 ? a.pos[1] : a.str("strategy", "all");
  if (name == "all") {
    bundles = shipped_strategies(spec);
  } else {
    bundles.push_back(strategy_by_name(spec, name));
  }
  json summary;
  summary["spec"] = as_json(protocol_spec_to_json(spec));
  summary["alice_bits"] = rep.alice_bits;
  summary["output_view_bits"] = rep.output_view_bits;
  summary["distinguishable"] = rep.distinguishable ? json(rep.distinguishable->get_str(10)) : json(nullptr);
  summary["pigeonhole_forced"] = rep.pigeonhole_forced;
  json results = json::array();
  json first_witness = nullptr;
  for (const auto& b : bundles) {
    auto r = collide_one(spec, b, rep);
    if (first_witness.is_null() && !r["witness"].is_null()) first_witness = r["witness"];
    results.push_back(std::move(r));
  }
  summary["results"] = std::move(results);
  if (!first_witness.is_null()) {
    const auto path = destination(o, "witness.json");
    if (!path.empty()) {
      std::ofstream out(path, std::ios::binary);
      if (!out) throw ValidationError("cannot write " + path);
      out << first_witness.dump(2) << "\n";
      summary["witness_file"] = path;
    }
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_budget(Options& o) {
  Args a = collect(o);
  if (a.pos.empty()) throw ValidationError("budget needs a protocol kind");
  const auto spec = protocol_spec(a, a.pos[0]);
  emit(o, "budget.json", budget_to_json(spec, budget(spec)));
  return 0;
}

// ---------------------------------------------------------------------------
// params

std::vector<BigNat> schedule_for(const Args& a, const ParamSet& ps) {
  const auto name = a.str("schedule", "default");
  auto sched = default_hybrid_schedule(ps.L);
  if (name == "default") return sched;
  if (name == "adversarial") {
    sched.at(1) = ps.K;
    return sched;
  }
  std::vector<BigNat> out;
  std::stringstream ss(name);
  std::string item;
  while (std::getline(ss, item, ',')) {
    BigNat v;
    if (v.set_str(item, 10) != 0 || v < 0) throw ValidationError("bad schedule entry: " + item);
    out.push_back(v);
  }
  return out;
}

int cmd_params(Options& o) {
  Args a = collect(o);
  std::vector<int> hdpl;
  for (const auto& t : a.pos) hdpl.push_back(static_cast<int>(Args::parse_i64(t, "H d p L")));
  if (hdpl.empty()) hdpl = {a.num("H", 1), a.num("d", 2), a.num("p", 1), a.num("L", 2)};
  if (hdpl.size() != 4) throw ValidationError("params needs H d p L");
  const auto ps = derive_params(hdpl[0], hdpl[1], hdpl[2], hdpl[3]);
  const auto sched = schedule_for(a, ps);
  emit(o, "params.json",
       params_report_to_json(ps, verify_param_equalities(ps), check_size_bound(ps), check_hybrid_budget(ps, sched),
                             sched));
  return 0;
}

// ---------------------------------------------------------------------------
// table hierarchy

struct Row {
  std::string mechanism;
  std::string task;
  std::string size;
  std::string budget;
  std::string outcome;
  std::string note;
};

Row solved_row(const std::string& mech, TaskKind task, int n, std::uint64_t seed) {
  GenParams gp;
  gp.n = n;
  const auto un = static_cast<std::uint64_t>(n);
  const auto prec = retrieval_precision(std::max(un, kMinRetrievalSize));
  const auto hdp = 5 * retrieval_key_width(un) * prec.total_bits;
  int agree = 0;
  constexpr int kTrials = 10;
  for (int t = 0; t < kTrials; ++t) {
    const auto inst = gen_instance(task, gp, seed + static_cast<std::uint64_t>(t));
    try {
      const Output got = task == TaskKind::kEva ? Output{solve_eva(std::get<EvaInstance>(inst))}
                                                : solve_percom(std::get<PerComInstance>(inst));
      agree += got == oracle(inst) ? 1 : 0;
    } catch (const Error&) {
    }
  }
  return {mech, to_string(task), "n=" + std::to_string(n), "Hdp=" + std::to_string(hdp),
          agree == kTrials ? "solved" : "failed", std::to_string(agree) + "/" + std::to_string(kTrials) + " agree"};
}

Row collision_row(const std::string& mech, ProtocolSpec spec, const std::string& strategy) {
  spec.validate();
  std::vector<StrategyBundle> bundles;
  if (strategy.empty()) {
    bundles = shipped_strategies(spec);
  } else {
    bundles.push_back(strategy_by_name(spec, strategy));
  }
  std::size_t hits = 0;
  std::string names;
  for (const auto& b : bundles) {
    bool hit = false;
    if (spec.kind == ProtocolKind::kSparseTwoSum) {
      const auto atk = find_sparse_attack(spec, b);
      hit = atk && oracle_two_sum(atk->adversary.with_a).back() != oracle_two_sum(atk->adversary.with_b).back();
    } else {
      const auto cs = find_collision(spec, b);
      hit = cs.witness && verify_witness(*cs.witness, spec, b);
    }
    hits += hit ? 1 : 0;
    names += (names.empty() ? "" : "+") + b.name;
  }
  std::string size = "n=" + std::to_string(spec.n);
  if (task_of(spec.kind) == TaskKind::kTwoSum) size += " M=" + std::to_string(spec.two_sum_modulus());
  if (spec.kind == ProtocolKind::kSparseTwoSum) size += " B=" + std::to_string(spec.B);
  const std::string outcome = hits == bundles.size() ? "collision" : hits == 0 ? "no-collision" : "mixed";
  return {mech, to_string(task_of(spec.kind)), size, std::to_string(budget(spec).alice_bits) + " bits", outcome,
          names};
}

// Honest hybrid run on the toy FuncComp: do raw payload lengths equal the
// closed-form channel budgets?
Row hybrid_row(std::uint64_t seed) {
  ProtocolSpec spec;
  spec.kind = ProtocolKind::kHybridFuncComp;
  spec.L = 2;
  spec.d = 4;
  spec.p = 128;
  spec.funccomp = FuncCompSpec{2, 2, {2}};
  spec.a = {1, 1};
  const PrecisionConfig cfg{10, 3};
  Rng rng(seed);
  auto matrix = [&] {
    PMatrix m(4, 4, cfg);
    for (auto& x : m.data) x = PBitNumber(uniform_int(rng, -4, 4), cfg);
    return m;
  };
  std::vector<LayerConfig> layers;
  for (int a : spec.a) {
    for (int r = 0; r <= a; ++r) {
      LayerConfig l;
      l.kind = r == 0 ? LayerKind::kFull : LayerKind::kLinear;
      l.d = 4;
      l.precision = cfg;
      l.feature_map = "relu_plus_one";
      l.mlp = "residual_add";
      l.heads.push_back({matrix(), matrix(), matrix()});
      layers.push_back(l);
    }
  }
  auto b = honest_hybrid(spec, layers, PromptLayout{4, cfg}, mantissa_decoder());
  bool exact = true;
  b.message = [inner = b.message, &exact](const InfoSet& info, const ChannelSlot& slot) {
    BitString p = inner(info, slot);
    exact = exact && p.size() == slot.budget;
    return p;
  };
  GenParams gp;
  gp.funccomp = spec.funccomp;
  run_protocol(spec, b, gen_instance(TaskKind::kFuncComp, gp, seed));
  return {"hybrid", "funccomp", "L=2 m=2 n1=2", std::to_string(budget(spec).total_bits) + " bits",
          exact ? "budget-exact" : "budget-mismatch", "honest full+linear stack, a=(1,1)"};
}

ProtocolSpec two_party(ProtocolKind kind, int n, std::size_t bits, std::int64_t modulus = 0) {
  ProtocolSpec s;
  s.kind = kind;
  s.n = n;
  s.m = 1;
  s.p = std::max<int>(2, static_cast<int>(bits));
  s.modulus = modulus;
  s.message_bits = bits;
  return s;
}

std::vector<Row> hierarchy(std::uint64_t seed) {
  std::vector<Row> rows;
  const auto na = [](const std::string& mech, TaskKind task, const std::string& why) {
    return Row{mech, to_string(task), "-", "-", "n/a", why};
  };
  // Full attention: the retrieval construction.
  for (int n : {8, 16, 32}) rows.push_back(solved_row("full", TaskKind::kEva, n, seed));
  for (int n : {8, 16}) rows.push_back(solved_row("full", TaskKind::kPerCom, n, seed + 100));
  rows.push_back(na("full", TaskKind::kTwoSum, "no hand-built construction shipped"));
  rows.push_back(na("full", TaskKind::kFuncComp, "no hand-built construction shipped"));

  // Linear / log-linear: streaming lower bounds, one row below the pigeonhole
  // threshold and one with an injective budget.
  struct Pair {
    std::string mech;
    ProtocolKind eva, percom, twosum;
  };
  for (const auto& p : {Pair{"linear", ProtocolKind::kRnnEva, ProtocolKind::kRnnPerCom, ProtocolKind::kLinearTwoSum},
                        Pair{"loglinear", ProtocolKind::kLogLinearEva, ProtocolKind::kLogLinearPerCom,
                             ProtocolKind::kLogLinearTwoSum}}) {
    rows.push_back(collision_row(p.mech, two_party(p.eva, 3, 4), ""));
    rows.push_back(collision_row(p.mech, two_party(p.eva, 2, 8), "injective"));
    rows.push_back(collision_row(p.mech, two_party(p.percom, 3, 2), ""));
    rows.push_back(collision_row(p.mech, two_party(p.percom, 3, 8), "injective"));
    rows.push_back(collision_row(p.mech, two_party(p.twosum, 4, 6, 8), ""));
    rows.push_back(collision_row(p.mech, two_party(p.twosum, 4, 12, 8), "injective"));
    rows.push_back(na(p.mech, TaskKind::kFuncComp, "covered by the hybrid model"));
  }

  // Sparse: block budgets below and at the set-encoding threshold.
  for (int c : {2, 4, 7, 8}) {
    ProtocolSpec s;
    s.kind = ProtocolKind::kSparseTwoSum;
    s.n = 8;
    s.B = 4;
    s.k = 1;
    s.message_bits = static_cast<std::size_t>(c);
    rows.push_back(collision_row("sparse", s, c < 8 ? "" : "bitmask"));
  }
  rows.push_back(na("sparse", TaskKind::kEva, "no sparse protocol model"));
  rows.push_back(na("sparse", TaskKind::kPerCom, "no sparse protocol model"));
  rows.push_back(na("sparse", TaskKind::kFuncComp, "no sparse protocol model"));
  rows.push_back(hybrid_row(seed));
  return rows;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

int cmd_table(Options& o) {
  Args a = collect(o);
  const auto suite = a.pos.empty() ? a.str("suite", "") : a.pos[0];
  if (suite != "hierarchy") throw ValidationError("unknown suite: '" + suite + "' (available: hierarchy)");
  std::string out = "mechanism,task,size,budget,outcome,note\n";
  for (const auto& r : hierarchy(o.seed)) {
    out += csv_field(r.mechanism) + "," + csv_field(r.task) + "," + csv_field(r.size) + "," + csv_field(r.budget) +
           "," + csv_field(r.outcome) + "," + csv_field(r.note) + "\n";
  }
  emit(o, "hierarchy.csv", out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attnlab: attention mechanisms, tasks and communication lower bounds at desk scale"};
  app.require_subcommand(1);
  Options o;
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(Options&);
  };
  const Sub subs[] = {
      {"gen", "generate a task instance: gen <task> n=.. [modulus=..] [L=.. m=.. ns=..]", cmd_gen},
      {"solve", "run a solver on an instance file: solve <file> [mechanism=retrieval] [p=..]", cmd_solve},
      {"collide", "collision search: collide <kind> n=.. budget=.. [strategy]", cmd_collide},
      {"params", "parameter calculus report: params H d p L [schedule=..]", cmd_params},
      {"budget", "closed-form channel budgets: budget <kind> [key=value ...]", cmd_budget},
      {"table", "desk-scale sweep: table hierarchy", cmd_table},
  };
  int (*chosen)(Options&) = nullptr;
  for (const auto& s : subs) {
    auto* sc = app.add_subcommand(s.name, s.help);
    sc->add_option("args", o.raw, "positional arguments and key=value pairs");
    sc->add_option("--config", o.config, "JSON config; its keys override the command line");
    sc->add_option("--out,-o", o.out, "output path (default: $ATTNLAB_OUT_DIR or stdout)");
    sc->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sc->add_option("--seed", o.seed, "64-bit seed");
    sc->callback([&chosen, fn = s.fn] { chosen = fn; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    return chosen(o);
  } catch (const ResourceError& e) {
    std::cerr << "resource cap: " << e.what() << "\n";
    return 3;
  } catch (const ProtocolViolation& e) {
    std::cerr << "protocol violation: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
