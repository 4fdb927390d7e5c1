#include "attnlab/serialization.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

using json = nlohmann::ordered_json;

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::string dec(std::int64_t v) { return std::to_string(v); }

std::int64_t to_i64(const json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (!j.is_string()) throw ValidationError("expected an integer");
  const auto& s = j.get_ref<const std::string&>();
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used, 10);
  } catch (const std::exception&) {
    throw ValidationError("malformed integer '" + s + "'");
  }
  if (used != s.size()) throw ValidationError("malformed integer '" + s + "'");
  return v;
}

int to_int(const json& j) {
  const auto v = to_i64(j);
  if (v < INT32_MIN || v > INT32_MAX) throw ValidationError("integer out of range");
  return static_cast<int>(v);
}

json dec_array(const std::vector<std::int64_t>& xs) {
  json a = json::array();
  for (auto v : xs) a.push_back(dec(v));
  return a;
}

std::vector<std::int64_t> i64_array(const json& j) {
  if (!j.is_array()) throw ValidationError("expected an array");
  std::vector<std::int64_t> out;
  for (const auto& v : j) out.push_back(to_i64(v));
  return out;
}

// ---------------------------------------------------------------------------

json instance_json(const Instance& inst) {
  json j;
  j["task"] = to_string(task_of(inst));
  std::visit(
      [&](const auto& i) {
        using T = std::decay_t<decltype(i)>;
        json params;
        json payload;
        if constexpr (std::is_same_v<T, EvaInstance>) {
          params["n"] = dec(i.n);
          payload["f"] = dec_array(i.f);
          payload["x"] = dec_array({i.x});
        } else if constexpr (std::is_same_v<T, PerComInstance>) {
          params["n"] = dec(i.n);
          payload["sigma"] = dec_array(i.sigma);
          payload["tau"] = dec_array(i.tau);
        } else if constexpr (std::is_same_v<T, TwoSumInstance>) {
          params["n"] = dec(i.n);
          params["modulus"] = dec(i.modulus);
          payload["x"] = dec_array(i.x);
        } else {
          params["L"] = dec(i.spec.L);
          params["m"] = dec(i.spec.m);
          params["n"] = dec_array(i.spec.n);
          payload["z0"] = dec_array({i.z0});
          json z = json::array();
          for (const auto& t : i.z) z.push_back(dec_array(t));
          payload["z"] = std::move(z);
          payload["w"] = dec_array(i.w);
        }
        j["params"] = std::move(params);
        j["payload"] = std::move(payload);
      },
      inst);
  return j;
}

std::int64_t single(const json& j) {
  const auto v = i64_array(j);
  if (v.size() != 1) throw ValidationError("expected a one-element array");
  return v[0];
}

Instance instance_of(const json& j) {
  const auto task = parse_task(field(j, "task").get<std::string>());
  const json& params = field(j, "params");
  const json& payload = field(j, "payload");
  Instance out;
  try {
    switch (task) {
      case TaskKind::kEva: {
        EvaInstance i;
        i.n = to_int(field(params, "n"));
        i.f = i64_array(field(payload, "f"));
        i.x = single(field(payload, "x"));
        out = i;
        break;
      }
      case TaskKind::kPerCom: {
        PerComInstance i;
        i.n = to_int(field(params, "n"));
        i.sigma = i64_array(field(payload, "sigma"));
        i.tau = i64_array(field(payload, "tau"));
        out = i;
        break;
      }
      case TaskKind::kTwoSum: {
        TwoSumInstance i;
        i.n = to_int(field(params, "n"));
        i.modulus = to_i64(field(params, "modulus"));
        i.x = i64_array(field(payload, "x"));
        out = i;
        break;
      }
      case TaskKind::kFuncComp: {
        FuncCompInstance i;
        i.spec.L = to_int(field(params, "L"));
        i.spec.m = to_i64(field(params, "m"));
        i.spec.n = i64_array(field(params, "n"));
        i.z0 = single(field(payload, "z0"));
        const json& z = field(payload, "z");
        if (!z.is_array()) throw ValidationError("z must be an array of tables");
        for (const auto& t : z) i.z.push_back(i64_array(t));
        i.w = i64_array(field(payload, "w"));
        out = i;
        break;
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad instance: ") + e.what());
  }
  validate(out);
  return out;
}

json precision_json(const PrecisionConfig& cfg) {
  json j;
  j["total_bits"] = cfg.total_bits;
  j["frac_bits"] = cfg.frac_bits;
  j["rounding"] = "nearest_ties_even";
  return j;
}

PrecisionConfig precision_of(const json& j) {
  PrecisionConfig cfg;
  cfg.total_bits = to_int(field(j, "total_bits"));
  cfg.frac_bits = to_int(field(j, "frac_bits"));
  if (j.contains("rounding") && j.at("rounding") != "nearest_ties_even") {
    throw ValidationError("unsupported rounding mode");
  }
  try {
    cfg.validate();
  } catch (const PrecisionError& e) {
    throw ValidationError(e.what());
  }
  return cfg;
}

json matrix_json(const PMatrix& m) {
  json j;
  j["rows"] = m.rows;
  j["cols"] = m.cols;
  json data = json::array();
  for (const auto& x : m.data) data.push_back(x.to_decimal());
  j["data"] = std::move(data);
  return j;
}

PMatrix matrix_of(const json& j, const PrecisionConfig& cfg) {
  const auto rows = static_cast<std::size_t>(to_i64(field(j, "rows")));
  const auto cols = static_cast<std::size_t>(to_i64(field(j, "cols")));
  const json& data = field(j, "data");
  if (!data.is_array() || data.size() != rows * cols) throw ValidationError("matrix data size mismatch");
  PMatrix m(rows, cols, cfg);
  for (std::size_t t = 0; t < data.size(); ++t) {
    if (!data[t].is_string()) throw ValidationError("matrix entries must be decimal strings");
    const Rational v = parse_rational(data[t].get<std::string>());
    const PBitNumber q = quantize(v, cfg);
    if (q.value() != v) throw ValidationError("matrix entry not on the layer grid: " + data[t].get<std::string>());
    m.data[t] = q;
  }
  return m;
}

json layer_json(const LayerConfig& cfg) {
  json j;
  j["kind"] = to_string(cfg.kind);
  j["H"] = cfg.H;
  j["d"] = cfg.d;
  j["precision"] = precision_json(cfg.precision);
  json heads = json::array();
  for (const auto& h : cfg.heads) {
    json hj;
    hj["Q"] = matrix_json(h.Q);
    hj["K"] = matrix_json(h.K);
    hj["V"] = matrix_json(h.V);
    heads.push_back(std::move(hj));
  }
  j["heads"] = std::move(heads);
  j["feature_map"] = cfg.feature_map;
  j["weight_rule"] = cfg.weight_rule;
  j["update_rule"] = cfg.update_rule;
  json sp;
  sp["B"] = cfg.sparse.B;
  sp["k"] = cfg.sparse.k;
  sp["lambda"] = to_decimal(cfg.sparse.lambda);
  sp["compression"] = cfg.sparse.compression;
  sp["selection"] = cfg.sparse.selection;
  j["sparse"] = std::move(sp);
  j["mlp"] = cfg.mlp;
  return j;
}

LayerConfig layer_of(const json& j) {
  LayerConfig cfg;
  try {
    cfg.kind = parse_layer_kind(field(j, "kind").get<std::string>());
    cfg.H = to_int(field(j, "H"));
    cfg.d = to_int(field(j, "d"));
    cfg.precision = precision_of(field(j, "precision"));
    const json& heads = field(j, "heads");
    if (!heads.is_array()) throw ValidationError("heads must be an array");
    for (const auto& h : heads) {
      cfg.heads.push_back(HeadParams{matrix_of(field(h, "Q"), cfg.precision), matrix_of(field(h, "K"), cfg.precision),
                                     matrix_of(field(h, "V"), cfg.precision)});
    }
    if (j.contains("feature_map")) cfg.feature_map = j.at("feature_map").get<std::string>();
    if (j.contains("weight_rule")) cfg.weight_rule = j.at("weight_rule").get<std::string>();
    if (j.contains("update_rule")) cfg.update_rule = j.at("update_rule").get<std::string>();
    if (j.contains("sparse")) {
      const json& sp = j.at("sparse");
      cfg.sparse.B = to_int(field(sp, "B"));
      cfg.sparse.k = to_int(field(sp, "k"));
      cfg.sparse.lambda = parse_rational(field(sp, "lambda").get<std::string>());
      cfg.sparse.compression = field(sp, "compression").get<std::string>();
      cfg.sparse.selection = field(sp, "selection").get<std::string>();
    }
    if (j.contains("mlp")) cfg.mlp = j.at("mlp").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad layer config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json spec_json(const ProtocolSpec& s) {
  json j;
  j["kind"] = to_string(s.kind);
  j["L"] = s.L;
  j["H"] = s.H;
  j["d"] = s.d;
  j["m"] = s.m;
  j["p"] = s.p;
  j["n"] = s.n;
  j["modulus"] = dec(s.modulus);
  j["cot"] = s.cot;
  j["B"] = s.B;
  j["k"] = s.k;
  json fc;
  fc["L"] = dec(s.funccomp.L);
  fc["m"] = dec(s.funccomp.m);
  fc["n"] = dec_array(s.funccomp.n);
  j["funccomp"] = std::move(fc);
  json a = json::array();
  for (int v : s.a) a.push_back(v);
  j["a"] = std::move(a);
  if (s.message_bits) {
    j["message_bits"] = *s.message_bits;
  } else {
    j["message_bits"] = nullptr;
  }
  return j;
}

ProtocolSpec spec_of(const json& j) {
  ProtocolSpec s;
  try {
    s.kind = parse_protocol_kind(field(j, "kind").get<std::string>());
    auto opt_int = [&](const char* key, int& into) {
      if (j.contains(key)) into = to_int(j.at(key));
    };
    opt_int("L", s.L);
    opt_int("H", s.H);
    opt_int("d", s.d);
    opt_int("m", s.m);
    opt_int("p", s.p);
    opt_int("n", s.n);
    opt_int("B", s.B);
    opt_int("k", s.k);
    if (j.contains("modulus")) s.modulus = to_i64(j.at("modulus"));
    if (j.contains("cot")) s.cot = j.at("cot").get<bool>();
    if (j.contains("funccomp")) {
      const json& fc = j.at("funccomp");
      s.funccomp.L = to_int(field(fc, "L"));
      s.funccomp.m = to_i64(field(fc, "m"));
      s.funccomp.n = i64_array(field(fc, "n"));
    }
    if (j.contains("a")) {
      for (const auto& v : j.at("a")) s.a.push_back(to_int(v));
    }
    if (j.contains("message_bits") && !j.at("message_bits").is_null()) {
      const auto bits = to_i64(j.at("message_bits"));
      if (bits < 0) throw ValidationError("message_bits must be non-negative");
      s.message_bits = static_cast<std::size_t>(bits);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad protocol spec: ") + e.what());
  }
  s.validate();
  return s;
}

json message_json(const Message& m) {
  json j;
  j["epoch"] = m.epoch;
  j["round"] = m.round;
  j["from"] = m.from;
  j["to"] = m.to;
  j["kind"] = m.kind;
  j["bits_hex"] = m.payload.to_hex();
  j["nbits"] = m.payload.size();
  return j;
}

Message message_of(const json& j) {
  Message m;
  try {
    m.epoch = to_int(field(j, "epoch"));
    m.round = to_int(field(j, "round"));
    m.from = to_int(field(j, "from"));
    m.to = to_int(field(j, "to"));
    m.kind = field(j, "kind").get<std::string>();
    const auto nbits = to_i64(field(j, "nbits"));
    if (nbits < 0) throw ValidationError("negative nbits");
    m.payload = BitString::from_hex(field(j, "bits_hex").get<std::string>(), static_cast<std::size_t>(nbits));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad transcript record: ") + e.what());
  }
  return m;
}

std::string big(const BigNat& v) { return v.get_str(10); }

// log2 of a positive integer, exact when it is a power of two.
std::string log2_str(const BigNat& v) {
  if (v <= 0) return "-inf";
  const auto fl = floor_log2(v);
  if (fl == ceil_log2(v)) return std::to_string(fl);
  long exp = 0;
  const double mant = mpz_get_d_2exp(&exp, v.get_mpz_t());
  std::ostringstream os;
  os.precision(12);
  os << static_cast<double>(exp) + std::log2(mant);
  return os.str();
}

std::string rational_str(const Rational& r) {
  Rational c = r;
  c.canonicalize();
  return c.get_str(10);
}

}  // namespace

// ---------------------------------------------------------------------------

std::string instance_to_json(const Instance& inst) { return instance_json(inst).dump(2) + "\n"; }

Instance instance_from_json(const std::string& text) { return instance_of(parse(text)); }

std::string oracle_csv(const Instance& inst) {
  std::ostringstream os;
  const auto task = to_string(task_of(inst));
  os << "task,index,output\n";
  const auto out = oracle(inst);
  for (std::size_t i = 0; i < out.size(); ++i) os << task << ',' << i + 1 << ',' << out[i] << '\n';
  return os.str();
}

std::string precision_to_json(const PrecisionConfig& cfg) { return precision_json(cfg).dump(2) + "\n"; }
PrecisionConfig precision_from_json(const std::string& text) { return precision_of(parse(text)); }

std::string layer_to_json(const LayerConfig& cfg) { return layer_json(cfg).dump(2) + "\n"; }
LayerConfig layer_from_json(const std::string& text) { return layer_of(parse(text)); }

std::string protocol_spec_to_json(const ProtocolSpec& spec) { return spec_json(spec).dump(2) + "\n"; }
ProtocolSpec protocol_spec_from_json(const std::string& text) { return spec_of(parse(text)); }

std::string transcript_to_jsonl(const Transcript& t) {
  std::string out;
  for (const auto& m : t) out += message_json(m).dump() + "\n";
  return out;
}

Transcript transcript_from_jsonl(const std::string& text) {
  Transcript t;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    t.push_back(message_of(parse(line)));
  }
  return t;
}

std::string witness_to_json(const WitnessFile& w) {
  json j;
  j["spec"] = spec_json(w.spec);
  j["strategy"] = w.strategy;
  j["a"] = instance_json(w.witness.a);
  j["b"] = instance_json(w.witness.b);
  j["query"] = dec_array(w.witness.query);
  j["oracle_a"] = dec_array(w.witness.oracle_a);
  j["oracle_b"] = dec_array(w.witness.oracle_b);
  j["fingerprint_hex"] = w.witness.fingerprint.to_hex();
  j["fingerprint_nbits"] = w.witness.fingerprint.size();
  return j.dump(2) + "\n";
}

WitnessFile witness_from_json(const std::string& text) {
  const json j = parse(text);
  WitnessFile w;
  w.spec = spec_of(field(j, "spec"));
  try {
    w.strategy = field(j, "strategy").get<std::string>();
    w.witness.a = instance_of(field(j, "a"));
    w.witness.b = instance_of(field(j, "b"));
    w.witness.query = i64_array(field(j, "query"));
    w.witness.oracle_a = i64_array(field(j, "oracle_a"));
    w.witness.oracle_b = i64_array(field(j, "oracle_b"));
    const auto nbits = to_i64(field(j, "fingerprint_nbits"));
    if (nbits < 0) throw ValidationError("negative fingerprint length");
    w.witness.fingerprint =
        BitString::from_hex(field(j, "fingerprint_hex").get<std::string>(), static_cast<std::size_t>(nbits));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad witness: ") + e.what());
  }
  return w;
}

std::string concentration_to_json(const ConcentrationReport& r) {
  json j;
  j["n"] = dec(static_cast<std::int64_t>(r.n));
  j["D"] = r.D;
  j["p"] = r.precision.total_bits;
  j["frac_bits"] = r.precision.frac_bits;
  j["log_base"] = to_string(r.base);
  j["scale"] = to_decimal(r.scale);
  j["defined"] = r.defined;
  Rational w = r.match_weight;
  w.canonicalize();
  j["match_weight_num"] = w.get_num().get_str(10);
  j["match_weight_den"] = w.get_den().get_str(10);
  j["bound"] = rational_str(r.bound);
  j["meets_bound"] = r.meets_bound;
  j["max_mismatch_weight"] = rational_str(r.max_mismatch_weight);
  j["mismatch_bound"] = rational_str(r.mismatch_bound);
  j["mismatches_within_bound"] = r.mismatches_within_bound;
  j["quantizes_to_one"] = r.quantizes_to_one;
  j["mismatches_quantize_to_zero"] = r.mismatches_quantize_to_zero;
  j["hdp"] = dec(r.hdp);
  j["hdp_polylog_cap"] = dec(r.hdp_polylog_cap);
  j["hdp_polylog"] = r.hdp_polylog;
  return j.dump(2) + "\n";
}

std::string params_report_to_json(const ParamSet& ps, const std::vector<EqualityCheck>& eqs,
                                  const SizeBoundReport& size, const HybridBudgetReport& hybrid,
                                  const std::vector<BigNat>& schedule) {
  json j;
  j["H"] = ps.H;
  j["d"] = ps.d;
  j["p"] = ps.p;
  j["L"] = ps.L;
  j["K"] = big(ps.K);
  j["log2_K"] = log2_str(ps.K);
  j["sqrt_K"] = big(ps.sqrt_K);
  j["m"] = big(ps.m);
  j["log2_m"] = log2_str(ps.m);
  auto list = [](const std::vector<BigNat>& xs, int first) {
    json a = json::array();
    for (std::size_t t = 0; t < xs.size(); ++t) {
      json e;
      e["l"] = first + static_cast<int>(t);
      e["value"] = big(xs[t]);
      e["log2"] = log2_str(xs[t]);
      a.push_back(std::move(e));
    }
    return a;
  };
  j["n"] = list(ps.n, 1);
  j["N"] = list(ps.N, 0);
  j["x"] = list(ps.x, 0);
  json delta = json::array();
  for (std::size_t t = 0; t < ps.delta_log2.size(); ++t) {
    json e;
    e["l"] = static_cast<int>(t) + 2;
    e["log2"] = big(ps.delta_log2[t]);
    delta.push_back(std::move(e));
  }
  j["Delta"] = std::move(delta);
  json theta = json::array();
  for (std::size_t t = 0; t < ps.theta.size(); ++t) {
    json e;
    e["l"] = static_cast<int>(t) + 1;
    e["value"] = rational_str(ps.theta[t]);
    theta.push_back(std::move(e));
  }
  j["Theta"] = std::move(theta);
  json eq = json::array();
  bool all_eq = true;
  for (const auto& e : eqs) {
    json ej;
    ej["name"] = e.name;
    ej["formula"] = e.formula;
    ej["holds"] = e.holds;
    all_eq = all_eq && e.holds;
    eq.push_back(std::move(ej));
  }
  j["equalities"] = std::move(eq);
  j["equalities_hold"] = all_eq;
  json sb;
  sb["prompt_length"] = big(size.prompt_length);
  sb["log2_prompt_length"] = log2_str(size.prompt_length);
  sb["bound_exponent"] = big(size.bound_exponent);
  sb["mode"] = size.mode;
  sb["n0_at_least_two"] = size.n0_at_least_two;
  sb["doubling"] = size.doubling;
  sb["n_at_most_twice_last"] = size.n_at_most_twice_last;
  sb["exponent_identity"] = size.exponent_identity;
  sb["holds"] = size.holds;
  j["size_bound"] = std::move(sb);
  json hb;
  json a = json::array();
  for (const auto& v : schedule) a.push_back(big(v));
  hb["schedule"] = std::move(a);
  json rows = json::array();
  for (const auto& r : hybrid.rows) {
    json rj;
    rj["l"] = r.l;
    rj["lhs"] = big(r.lhs);
    rj["rhs"] = big(r.rhs);
    rj["holds"] = r.holds;
    rows.push_back(std::move(rj));
  }
  hb["rows"] = std::move(rows);
  hb["holds"] = hybrid.holds();
  j["hybrid_budget"] = std::move(hb);
  j["all_checks_pass"] = all_eq && size.holds && hybrid.holds();
  return j.dump(2) + "\n";
}

std::string budget_to_json(const ProtocolSpec& spec, const BudgetReport& r) {
  json j;
  j["spec"] = spec_json(spec);
  json ch = json::array();
  for (const auto& c : r.channels) {
    json cj;
    cj["epoch"] = c.epoch;
    cj["round"] = c.round;
    cj["from"] = c.from;
    cj["to"] = c.to;
    cj["kind"] = c.kind;
    cj["budget"] = c.budget;
    cj["budgeted"] = c.budgeted;
    ch.push_back(std::move(cj));
  }
  j["channels"] = std::move(ch);
  j["primary_message_bits"] = r.primary_message_bits;
  j["cot_message_bits"] = r.cot_message_bits;
  j["total_bits"] = r.total_bits;
  j["output_view_bits"] = r.output_view_bits;
  j["alice_bits"] = r.alice_bits;
  if (r.distinguishable) {
    j["distinguishable"] = big(*r.distinguishable);
    j["distinguishable_formula"] = r.distinguishable_formula;
  } else {
    j["distinguishable"] = nullptr;
  }
  j["pigeonhole_forced"] = r.pigeonhole_forced;
  return j.dump(2) + "\n";
}

}  // namespace attnlab
