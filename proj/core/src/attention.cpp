#include "attnlab/attention.hpp"

#include <map>
#include <mutex>
#include <unordered_map>

#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

template <class Fn>
class Registry {
 public:
  template <class Init>
  Registry(std::string what, Init init) : what_(std::move(what)) {
    init(*this);
  }

  void add(const std::string& name, Fn fn) {
    std::lock_guard lock(mu_);
    maps_[name] = std::move(fn);
  }
  Fn get(const std::string& name) const {
    std::lock_guard lock(mu_);
    auto it = maps_.find(name);
    if (it == maps_.end()) throw UnknownMapError("unregistered " + what_ + " '" + name + "'");
    return it->second;
  }
  bool has(const std::string& name) const {
    std::lock_guard lock(mu_);
    return maps_.count(name) != 0;
  }

 private:
  std::string what_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Fn> maps_;
};

Registry<FeatureMap>& feature_maps() {
  static Registry<FeatureMap> r("feature map", [](Registry<FeatureMap>& reg) {
    reg.add("identity", [](const RVec& u, const PrecisionConfig&) { return u; });
    reg.add("exp", [](const RVec& u, const PrecisionConfig& cfg) {
      RVec out;
      out.reserve(u.size());
      for (const auto& x : u) out.push_back(exp_rounded(x, softmax_working_bits(cfg)));
      return out;
    });
    reg.add("relu_plus_one", [](const RVec& u, const PrecisionConfig&) {
      RVec out;
      out.reserve(u.size());
      for (const auto& x : u) out.push_back(x > 0 ? Rational(x + 1) : Rational(1));
      return out;
    });
  });
  return r;
}

RVec add_tokens(std::span<const PBitNumber> a, std::span<const PBitNumber> b) {
  if (a.size() != b.size()) throw DimensionError("token width mismatch in residual map");
  RVec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i].value() + b[i].value();
  return out;
}

Registry<MlpMap>& mlps() {
  static Registry<MlpMap> r("mlp", [](Registry<MlpMap>& reg) {
    reg.add("project_first", [](std::span<const PBitNumber> x, std::span<const PBitNumber>) { return values(x); });
    reg.add("project_second", [](std::span<const PBitNumber>, std::span<const PBitNumber> y) { return values(y); });
    reg.add("residual_add", add_tokens);
  });
  return r;
}

Registry<CompressionMap>& compressions() {
  static Registry<CompressionMap> r("compression map", [](Registry<CompressionMap>& reg) {
    reg.add("mean", [](std::span<const Token> block) {
      if (block.empty()) throw DimensionError("empty block");
      RVec out(block.front().size(), Rational(0));
      for (const auto& t : block) {
        if (t.size() != out.size()) throw DimensionError("token width mismatch in block");
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += t[c].value();
      }
      const Rational count(static_cast<long>(block.size()));
      for (auto& v : out) v /= count;
      return out;
    });
    reg.add("sum", [](std::span<const Token> block) {
      if (block.empty()) throw DimensionError("empty block");
      RVec out(block.front().size(), Rational(0));
      for (const auto& t : block) {
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += t.at(c).value();
      }
      return out;
    });
    reg.add("last", [](std::span<const Token> block) {
      if (block.empty()) throw DimensionError("empty block");
      return values(block.back());
    });
  });
  return r;
}

Registry<SelectionScore>& selections() {
  static Registry<SelectionScore> r("selection score", [](Registry<SelectionScore>& reg) {
    reg.add("dot", [](const RVec& q, const RVec& k) { return exact_dot(q, k); });
  });
  return r;
}

Registry<WeightRule>& weight_rules() {
  static Registry<WeightRule> r("weight rule", [](Registry<WeightRule>& reg) {
    reg.add("uniform", [](std::span<const PBitNumber>, std::size_t R) {
      return RVec(R, Rational(1, static_cast<unsigned long>(R)));
    });
    reg.add("ones", [](std::span<const PBitNumber>, std::size_t R) { return RVec(R, Rational(1)); });
  });
  return r;
}

RMatrix add_matrices(const RMatrix& a, const RMatrix& b) {
  RMatrix out = a;
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (std::size_t c = 0; c < out[r].size(); ++c) out[r][c] += b[r][c];
  }
  return out;
}

// The four-case lssb recursion.
RMatrix lssb_update(std::size_t r, std::uint64_t i, const std::vector<RMatrix>& prev, const RMatrix& fresh) {
  const auto low = static_cast<std::size_t>(lssb(i));
  const std::size_t d = fresh.size();
  const std::size_t cols = d == 0 ? 0 : fresh[0].size();
  if (r == 0) return fresh;
  if (r <= low) return zero_matrix(d, cols);
  if (r == low + 1) {
    RMatrix acc = zero_matrix(d, cols);
    for (std::size_t q = 0; q < r && q < prev.size(); ++q) acc = add_matrices(acc, prev[q]);
    return acc;
  }
  return r < prev.size() ? prev[r] : zero_matrix(d, cols);
}

Registry<LogLinearUpdate>& loglinear_updates() {
  static Registry<LogLinearUpdate> r("log-linear update", [](Registry<LogLinearUpdate>& reg) {
    reg.add("lssb", lssb_update);
  });
  return r;
}

void check_width(const Sequence& seq, const LayerConfig& cfg) {
  const auto w = static_cast<std::size_t>(cfg.width());
  for (const auto& t : seq) {
    if (t.size() != w) throw DimensionError("token width " + std::to_string(t.size()) + " != dH = " + std::to_string(w));
  }
}

struct HeadCache {
  std::vector<RVec> q;
  std::vector<RVec> k;
  std::vector<RVec> v;
};

HeadCache project_all(const Sequence& seq, const HeadParams& hp, std::size_t upto) {
  HeadCache c;
  c.q.reserve(upto);
  c.k.reserve(upto);
  c.v.reserve(upto);
  for (std::size_t j = 0; j < upto; ++j) {
    c.q.push_back(hp.Q.apply(seq[j]));
    c.k.push_back(hp.K.apply(seq[j]));
    c.v.push_back(hp.V.apply(seq[j]));
  }
  return c;
}

class ExpCache {
 public:
  explicit ExpCache(int bits) : bits_(bits) {}
  const Rational& operator()(const Rational& x) {
    auto it = cache_.find(x);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(x, exp_rounded(x, bits_)).first->second;
  }

 private:
  int bits_;
  std::map<Rational, Rational> cache_;
};

SoftmaxPartial partial_over(const RVec& q, const std::vector<RVec>& ks, const std::vector<RVec>& vs, std::size_t begin,
                            std::size_t end, std::size_t d, ExpCache& ex) {
  SoftmaxPartial p;
  p.numerator.assign(d, Rational(0));
  for (std::size_t j = begin; j < end; ++j) {
    const Rational& e = ex(exact_dot(q, ks[j]));
    p.denominator += e;
    for (std::size_t c = 0; c < d; ++c) {
      if (sgn(vs[j][c]) != 0) p.numerator[c] += e * vs[j][c];
    }
  }
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------

PMatrix::PMatrix(std::size_t r, std::size_t c, const PrecisionConfig& cfg)
    : rows(r), cols(c), data(r * c, PBitNumber::zero(cfg)) {}

RVec PMatrix::apply(std::span<const PBitNumber> x) const {
  if (x.size() != cols) {
    throw DimensionError("matrix has " + std::to_string(cols) + " columns, vector has " + std::to_string(x.size()));
  }
  RVec out(rows, Rational(0));
  for (std::size_t c = 0; c < cols; ++c) {
    if (x[c].is_zero()) continue;
    const Rational xc = x[c].value();
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& m = data[r * cols + c];
      if (!m.is_zero()) out[r] += m.value() * xc;
    }
  }
  return out;
}

RMatrix zero_matrix(std::size_t rows, std::size_t cols) { return RMatrix(rows, RVec(cols, Rational(0))); }

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kFull: return "full";
    case LayerKind::kLinear: return "linear";
    case LayerKind::kLogLinear: return "loglinear";
    case LayerKind::kSparse: return "sparse";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& name) {
  if (name == "full") return LayerKind::kFull;
  if (name == "linear") return LayerKind::kLinear;
  if (name == "loglinear" || name == "log-linear") return LayerKind::kLogLinear;
  if (name == "sparse") return LayerKind::kSparse;
  throw ValidationError("unknown layer kind '" + name + "'");
}

void SparseConfig::validate() const {
  if (B < 1) throw ValidationError("sparse block size B must be >= 1");
  if (k < 1) throw ValidationError("sparse selection count k must be >= 1");
  if (lambda < 0 || lambda > 1) throw ValidationError("sparse mixing weight must lie in [0, 1]");
  compression_map(compression);
  selection_score(selection);
}

void LayerConfig::validate() const {
  precision.validate();
  if (H < 1 || d < 1) throw DimensionError("H and d must be positive");
  if (heads.size() != static_cast<std::size_t>(H)) {
    throw DimensionError("layer declares " + std::to_string(H) + " heads, has " + std::to_string(heads.size()));
  }
  const auto rows = static_cast<std::size_t>(d);
  const auto cols = static_cast<std::size_t>(width());
  for (const auto& h : heads) {
    for (const PMatrix* m : {&h.Q, &h.K, &h.V}) {
      if (m->rows != rows || m->cols != cols || m->data.size() != rows * cols) {
        throw DimensionError("head matrices must be d x dH");
      }
    }
  }
  mlp_map(mlp);
  switch (kind) {
    case LayerKind::kLinear: attnlab::feature_map(feature_map); break;
    case LayerKind::kLogLinear:
      attnlab::weight_rule(weight_rule);
      loglinear_update(update_rule);
      break;
    case LayerKind::kSparse: sparse.validate(); break;
    case LayerKind::kFull: break;
  }
}

int softmax_working_bits(const PrecisionConfig& cfg) { return 2 * cfg.total_bits + 16; }

void register_feature_map(const std::string& name, FeatureMap fn) { feature_maps().add(name, std::move(fn)); }
void register_mlp(const std::string& name, MlpMap fn) { mlps().add(name, std::move(fn)); }
void register_compression(const std::string& name, CompressionMap fn) { compressions().add(name, std::move(fn)); }
void register_selection(const std::string& name, SelectionScore fn) { selections().add(name, std::move(fn)); }
void register_weight_rule(const std::string& name, WeightRule fn) { weight_rules().add(name, std::move(fn)); }
void register_loglinear_update(const std::string& name, LogLinearUpdate fn) {
  loglinear_updates().add(name, std::move(fn));
}

FeatureMap feature_map(const std::string& name) { return feature_maps().get(name); }
MlpMap mlp_map(const std::string& name) { return mlps().get(name); }
CompressionMap compression_map(const std::string& name) { return compressions().get(name); }
SelectionScore selection_score(const std::string& name) { return selections().get(name); }
WeightRule weight_rule(const std::string& name) { return weight_rules().get(name); }
LogLinearUpdate loglinear_update(const std::string& name) { return loglinear_updates().get(name); }
bool has_feature_map(const std::string& name) { return feature_maps().has(name); }
bool has_mlp(const std::string& name) { return mlps().has(name); }

Token mlp_apply(const std::string& g, std::span<const PBitNumber> x_prev, std::span<const PBitNumber> y,
                const PrecisionConfig& cfg) {
  const RVec out = mlp_map(g)(x_prev, y);
  if (out.size() != x_prev.size()) throw DimensionError("mlp '" + g + "' changed the token width");
  return quantize(out, cfg);
}

// ---------------------------------------------------------------------------
// Full attention

SoftmaxPartial softmax_partial(const LayerConfig& cfg, int head, std::span<const PBitNumber> query_token,
                               std::span<const Token> keys) {
  const auto& hp = cfg.heads.at(static_cast<std::size_t>(head));
  const RVec q = hp.Q.apply(query_token);
  std::vector<RVec> ks;
  std::vector<RVec> vs;
  for (const auto& t : keys) {
    ks.push_back(hp.K.apply(t));
    vs.push_back(hp.V.apply(t));
  }
  ExpCache ex(softmax_working_bits(cfg.precision));
  return partial_over(q, ks, vs, 0, ks.size(), static_cast<std::size_t>(cfg.d), ex);
}

void accumulate(SoftmaxPartial& into, const SoftmaxPartial& part) {
  if (into.numerator.empty()) into.numerator.assign(part.numerator.size(), Rational(0));
  if (into.numerator.size() != part.numerator.size()) throw DimensionError("partial width mismatch");
  for (std::size_t c = 0; c < part.numerator.size(); ++c) into.numerator[c] += part.numerator[c];
  into.denominator += part.denominator;
}

Token finish_full(const LayerConfig& cfg, std::span<const PBitNumber> x_prev, const std::vector<SoftmaxPartial>& heads) {
  Token y;
  y.reserve(static_cast<std::size_t>(cfg.width()));
  for (const auto& p : heads) {
    if (p.denominator <= 0) throw DegenerateInputError("softmax over an empty key set");
    for (const auto& num : p.numerator) y.push_back(quantize(Rational(num / p.denominator), cfg.precision));
  }
  return mlp_apply(cfg.mlp, x_prev, y, cfg.precision);
}

Sequence full_layer_at(const Sequence& seq, const LayerConfig& cfg, std::span<const std::size_t> positions) {
  if (cfg.kind != LayerKind::kFull) throw ValidationError("full_layer needs a full-attention config");
  cfg.validate();
  check_width(seq, cfg);
  std::size_t upto = 0;
  for (auto i : positions) {
    if (i >= seq.size()) throw DimensionError("position out of range");
    upto = std::max(upto, i + 1);
  }
  std::vector<HeadCache> caches;
  for (const auto& hp : cfg.heads) caches.push_back(project_all(seq, hp, upto));
  ExpCache ex(softmax_working_bits(cfg.precision));
  const auto d = static_cast<std::size_t>(cfg.d);

  Sequence out;
  out.reserve(positions.size());
  for (auto i : positions) {
    std::vector<SoftmaxPartial> parts;
    for (const auto& c : caches) parts.push_back(partial_over(c.q[i], c.k, c.v, 0, i + 1, d, ex));
    out.push_back(finish_full(cfg, seq[i], parts));
  }
  return out;
}

Sequence full_layer(const Sequence& seq, const LayerConfig& cfg) {
  std::vector<std::size_t> all(seq.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return full_layer_at(seq, cfg, all);
}

RVec softmax_weights(const Sequence& seq, const LayerConfig& cfg, int head, std::size_t i) {
  cfg.validate();
  check_width(seq, cfg);
  if (i >= seq.size()) throw DimensionError("position out of range");
  const HeadCache c = project_all(seq, cfg.heads.at(static_cast<std::size_t>(head)), i + 1);
  ExpCache ex(softmax_working_bits(cfg.precision));
  RVec w;
  Rational total = 0;
  for (std::size_t j = 0; j <= i; ++j) {
    w.push_back(ex(exact_dot(c.q[i], c.k[j])));
    total += w.back();
  }
  for (auto& x : w) x /= total;
  return w;
}

// ---------------------------------------------------------------------------
// Hybrid

void HybridSchedule::validate() const {
  if (L < 1) throw ValidationError("hybrid schedule needs L >= 1");
  if (a.size() != static_cast<std::size_t>(L)) throw ValidationError("hybrid schedule must list a_1 .. a_L");
  for (int v : a) {
    if (v < 0) throw ValidationError("hybrid schedule counts must be non-negative");
  }
}

std::size_t HybridSchedule::layer_count() const {
  std::size_t n = static_cast<std::size_t>(L);
  for (int v : a) n += static_cast<std::size_t>(v);
  return n;
}

Sequence apply_layer(const Sequence& seq, const LayerConfig& cfg) {
  switch (cfg.kind) {
    case LayerKind::kFull: return full_layer(seq, cfg);
    case LayerKind::kLinear: return linear_layer(seq, cfg, LinearMode::kRecurrent);
    case LayerKind::kLogLinear: return loglinear_layer(seq, cfg);
    case LayerKind::kSparse: return sparse_layer(seq, cfg);
  }
  throw ValidationError("unknown layer kind");
}

Sequence hybrid_forward(const Sequence& seq, const HybridSchedule& schedule, const std::vector<LayerConfig>& layers,
                        std::vector<LayerKind>* trace) {
  schedule.validate();
  if (layers.size() != schedule.layer_count()) {
    throw ValidationError("schedule needs " + std::to_string(schedule.layer_count()) + " layers, got " +
                          std::to_string(layers.size()));
  }
  std::size_t idx = 0;
  for (int l = 0; l < schedule.L; ++l) {
    if (layers[idx].kind != LayerKind::kFull) {
      throw ValidationError("layer " + std::to_string(idx) + " must be full attention");
    }
    ++idx;
    for (int r = 0; r < schedule.a[static_cast<std::size_t>(l)]; ++r, ++idx) {
      if (layers[idx].kind != LayerKind::kLinear) {
        throw ValidationError("layer " + std::to_string(idx) + " must be linear attention");
      }
    }
  }
  Sequence cur = seq;
  for (const auto& cfg : layers) {
    cur = apply_layer(cur, cfg);
    if (trace) trace->push_back(cfg.kind);
  }
  return cur;
}

}  // namespace attnlab
