#pragma once

// Exact parameter calculus for the hybrid lower-bound instance family:
//
//   K   = (HdpL)^8 * 8^(2L^2)
//   m   = K^(sum_{l=0}^{L-1} 8^l + 1)
//   n_l = K^(4 * 8^(L-l-1))                       l in [1, L-1]
//   N_l = m * n_1 * ... * n_l                     l in [0, L-1]
//   x_l = K^(8^(L-l-1))                           l in [0, L-1]
//   D_l = 2^(4 sqrt(K) (x_0..x_{l-2}) (n_1..n_{L-1}))   l in [2, L]
//   T_l = 8^(-Ll) (x_0..x_l) (n_1..n_{l-1})       l in [1, L-1]
//
// D_l is far too large to materialize, so it is carried as its base-2
// exponent. |A_l| = N_{l-1}^(N_{l-1}) is carried as a (base, exponent) pair.

#include <string>
#include <vector>

#include "attnlab/numerics.hpp"

namespace attnlab {

struct PowerForm {
  BigNat base;
  BigNat exponent;
};

struct ParamSet {
  int H = 1;
  int d = 1;
  int p = 1;
  int L = 2;

  BigNat K;
  BigNat sqrt_K;
  BigNat m;
  std::vector<BigNat> n;            // n_1 .. n_{L-1}
  std::vector<BigNat> N;            // N_0 .. N_{L-1}
  std::vector<BigNat> x;            // x_0 .. x_{L-1}
  std::vector<BigNat> delta_log2;   // log2 D_l for l = 2 .. L
  std::vector<Rational> theta;      // T_1 .. T_{L-1}
  std::vector<PowerForm> A_card;    // |A_1| .. |A_L|

  const BigNat& n_at(int l) const { return n.at(static_cast<std::size_t>(l - 1)); }
  const BigNat& N_at(int l) const { return N.at(static_cast<std::size_t>(l)); }
  const BigNat& x_at(int l) const { return x.at(static_cast<std::size_t>(l)); }
  const BigNat& delta_log2_at(int l) const { return delta_log2.at(static_cast<std::size_t>(l - 2)); }
  const Rational& theta_at(int l) const { return theta.at(static_cast<std::size_t>(l - 1)); }
  BigNat Hdp() const { return BigNat(H) * d * p; }
};

inline constexpr int kMaxParamLayers = 4;

// Requires Hdp >= 2 and 2 <= L <= 4 (ValidationError / ResourceError).
ParamSet derive_params(int H, int d, int p, int L);

struct EqualityCheck {
  std::string name;
  std::string formula;
  bool holds = false;
};

// Re-derives every field from formula strings with FormulaEvaluator and
// compares against ps.
std::vector<EqualityCheck> verify_param_equalities(const ParamSet& ps);

enum class SizeBoundMode { kAuto, kExact, kLog2Chain };

struct SizeBoundReport {
  BigNat prompt_length;              // n = 2 + sum N_l
  BigNat bound_exponent;             // 4 * 16^L, bound = (Hdp)^exponent
  std::string mode;                  // "exact" or "log2"
  bool holds = false;
  bool n0_at_least_two = false;      // 2 <= N_0
  bool doubling = false;             // 2 N_{l-1} <= N_l for all l
  bool n_at_most_twice_last = false; // n <= 2 N_{L-1}
  bool exponent_identity = false;    // 2 N_{L-1} = 2 K^e with 7e = 12 * 8^(L-1) + 2
  std::size_t log2_n_ceil = 0;
  BigNat log2_bound_floor;           // exponent * floor(log2 Hdp)
};

SizeBoundReport check_size_bound(const ParamSet& ps, SizeBoundMode mode = SizeBoundMode::kAuto);

struct HybridBudgetRow {
  int l = 1;
  BigNat lhs;        // Hd(d+1)p (a_1 + ... + a_{l+1})
  BigNat rhs;        // sqrt(K) (x_0..x_{l-1}) (n_1..n_{L-1})
  bool holds = false;
};

struct HybridBudgetReport {
  std::vector<HybridBudgetRow> rows;
  std::vector<int> failing;
  bool holds() const { return failing.empty(); }
};

// a holds a_1 .. a_L. Throws ValidationError unless a_1 <= 1 and a.size() == L.
HybridBudgetReport check_hybrid_budget(const ParamSet& ps, const std::vector<BigNat>& a);
// a_1 = 1, a_2 = ... = a_L = 2^(3L^2).
std::vector<BigNat> default_hybrid_schedule(int L);

}  // namespace attnlab
