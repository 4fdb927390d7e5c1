#pragma once

// Shared helpers for the test binaries: random grid values and layers.

#include <attnlab/attention.hpp>
#include <attnlab/numerics.hpp>
#include <attnlab/random.hpp>

namespace testing_support {

using namespace attnlab;

inline PBitNumber random_grid(Rng& rng, const PrecisionConfig& cfg, std::int64_t max_abs_mantissa) {
  return PBitNumber(uniform_int(rng, -max_abs_mantissa, max_abs_mantissa), cfg);
}

inline PVec random_vec(Rng& rng, std::size_t n, const PrecisionConfig& cfg, std::int64_t max_abs_mantissa) {
  PVec v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(random_grid(rng, cfg, max_abs_mantissa));
  return v;
}

inline Sequence random_sequence(Rng& rng, std::size_t n, std::size_t width, const PrecisionConfig& cfg,
                                std::int64_t max_abs_mantissa) {
  Sequence s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(random_vec(rng, width, cfg, max_abs_mantissa));
  return s;
}

inline PMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, const PrecisionConfig& cfg,
                             std::int64_t max_abs_mantissa) {
  PMatrix m(rows, cols, cfg);
  for (auto& x : m.data) x = random_grid(rng, cfg, max_abs_mantissa);
  return m;
}

inline LayerConfig random_layer(Rng& rng, LayerKind kind, int H, int d, const PrecisionConfig& cfg,
                                std::int64_t max_abs_mantissa) {
  LayerConfig c;
  c.kind = kind;
  c.H = H;
  c.d = d;
  c.precision = cfg;
  const auto rows = static_cast<std::size_t>(d);
  const auto cols = static_cast<std::size_t>(H * d);
  for (int h = 0; h < H; ++h) {
    c.heads.push_back({random_matrix(rng, rows, cols, cfg, max_abs_mantissa),
                       random_matrix(rng, rows, cols, cfg, max_abs_mantissa),
                       random_matrix(rng, rows, cols, cfg, max_abs_mantissa)});
  }
  return c;
}

// Identity-like projection: row r reads column (offset + r) with the given weight.
inline PMatrix selector(std::size_t rows, std::size_t cols, std::size_t offset, const PrecisionConfig& cfg,
                        std::int64_t mantissa) {
  PMatrix m(rows, cols, cfg);
  for (std::size_t r = 0; r < rows && offset + r < cols; ++r) m.at(r, offset + r) = PBitNumber(mantissa, cfg);
  return m;
}

}  // namespace testing_support
