// (B,k)-sparse block attention.

#include <algorithm>
#include <numeric>

#include "attnlab/attention.hpp"
#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

RVec branch(const LayerConfig& cfg, int head, std::span<const PBitNumber> x_i, std::span<const Token> keys) {
  if (keys.empty()) return RVec(static_cast<std::size_t>(cfg.d), Rational(0));
  const SoftmaxPartial p = softmax_partial(cfg, head, x_i, keys);
  RVec y = p.numerator;
  for (auto& v : y) v /= p.denominator;
  return y;
}

}  // namespace

Token compress_block(const LayerConfig& cfg, std::span<const Token> block) {
  const RVec c = compression_map(cfg.sparse.compression)(block);
  if (c.size() != static_cast<std::size_t>(cfg.width())) throw DimensionError("compression changed the token width");
  return quantize(c, cfg.precision);
}

std::vector<std::size_t> top_k_blocks(const std::vector<Rational>& scores, int k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(idx.size(), static_cast<std::size_t>(std::max(k, 0))));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::size_t> select_blocks(const LayerConfig& cfg, int head, std::span<const PBitNumber> x_i,
                                       const std::vector<Token>& candidates) {
  const auto& hp = cfg.heads.at(static_cast<std::size_t>(head));
  const auto score = selection_score(cfg.sparse.selection);
  const RVec q = hp.Q.apply(x_i);
  std::vector<Rational> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(score(q, hp.K.apply(c)));
  return top_k_blocks(scores, cfg.sparse.k);
}

Token sparse_output(const LayerConfig& cfg, std::span<const PBitNumber> x_i, const std::vector<Token>& compressed,
                    const std::vector<Sequence>& selected_per_head) {
  if (selected_per_head.size() != cfg.heads.size()) throw DimensionError("one selected token set per head required");
  const Rational lambda = cfg.sparse.lambda;
  Token y;
  for (int h = 0; h < cfg.H; ++h) {
    const RVec yc = branch(cfg, h, x_i, compressed);
    const RVec ys = branch(cfg, h, x_i, selected_per_head[static_cast<std::size_t>(h)]);
    for (std::size_t a = 0; a < yc.size(); ++a) {
      y.push_back(quantize(Rational(lambda * yc[a] + (1 - lambda) * ys[a]), cfg.precision));
    }
  }
  return mlp_apply(cfg.mlp, x_i, y, cfg.precision);
}

Sequence sparse_layer(const Sequence& seq, const LayerConfig& cfg) {
  if (cfg.kind != LayerKind::kSparse) throw ValidationError("sparse_layer needs a sparse config");
  cfg.validate();
  for (const auto& t : seq) {
    if (t.size() != static_cast<std::size_t>(cfg.width())) throw DimensionError("token width != dH");
  }
  const auto B = static_cast<std::size_t>(cfg.sparse.B);
  std::vector<Token> completed;
  for (std::size_t j = 0; (j + 1) * B <= seq.size(); ++j) {
    completed.push_back(compress_block(cfg, std::span<const Token>(seq).subspan(j * B, B)));
  }

  Sequence out;
  out.reserve(seq.size());
  for (std::size_t idx = 0; idx < seq.size(); ++idx) {
    const std::size_t i = idx + 1;  // tokens 1..i are visible
    const std::size_t n_completed = i / B;
    std::vector<Token> compressed(completed.begin(), completed.begin() + static_cast<std::ptrdiff_t>(n_completed));
    std::vector<Token> candidates = compressed;
    if (i % B != 0) {
      candidates.push_back(compress_block(cfg, std::span<const Token>(seq).subspan(n_completed * B, i % B)));
    }
    std::vector<Sequence> selected(cfg.heads.size());
    for (int h = 0; h < cfg.H; ++h) {
      for (auto j : select_blocks(cfg, h, seq[idx], candidates)) {
        const std::size_t end = std::min((j + 1) * B, i);
        for (std::size_t t = j * B; t < end; ++t) selected[static_cast<std::size_t>(h)].push_back(seq[t]);
      }
    }
    out.push_back(sparse_output(cfg, seq[idx], compressed, selected));
  }
  return out;
}

}  // namespace attnlab
