#include "attnlab/params.hpp"

#include <cmath>

#include "attnlab/errors.hpp"
#include "attnlab/formula.hpp"

namespace attnlab {

namespace {

BigNat pow8(unsigned long e) { return pow_big(BigNat(8), e); }

BigNat product(const std::vector<BigNat>& v, std::size_t begin, std::size_t end) {
  BigNat out = 1;
  for (std::size_t i = begin; i < end; ++i) out *= v[i];
  return out;
}

std::string join_product(const std::string& prefix, int from, int to) {
  if (from > to) return "1";
  std::string out;
  for (int i = from; i <= to; ++i) {
    if (!out.empty()) out += "*";
    out += prefix + std::to_string(i);
  }
  return out;
}

// Rough size of N_{L-1} in bits, to refuse inputs that would exhaust memory.
double estimated_bits(int H, int d, int p, int L) {
  const double k_bits = 8.0 * std::log2(double(H) * d * p * L) + 6.0 * L * L;
  double exponent = 1.0;
  for (int l = 0; l < L; ++l) exponent += std::pow(8.0, l);
  for (int l = 1; l < L; ++l) exponent += 4.0 * std::pow(8.0, L - l - 1);
  return k_bits * exponent;
}

}  // namespace

ParamSet derive_params(int H, int d, int p, int L) {
  if (H < 1 || d < 1 || p < 1) throw ValidationError("H, d, p must be positive");
  if (static_cast<long>(H) * d * p < 2) throw ValidationError("parameter calculus assumes Hdp >= 2");
  if (L < 2 || L > kMaxParamLayers) {
    throw ResourceError("parameter calculus supports 2 <= L <= " + std::to_string(kMaxParamLayers));
  }
  if (estimated_bits(H, d, p, L) > double(1u << 26)) throw ResourceError("parameters too large for exact evaluation");

  ParamSet ps;
  ps.H = H;
  ps.d = d;
  ps.p = p;
  ps.L = L;
  const auto uL = static_cast<unsigned long>(L);

  ps.K = pow_big(BigNat(H) * d * p * L, 8) * pow8(2 * uL * uL);
  ps.sqrt_K = isqrt(ps.K);

  BigNat m_exp = 1;
  for (unsigned long l = 0; l < uL; ++l) m_exp += pow8(l);
  ps.m = pow_big(ps.K, m_exp);

  for (int l = 1; l <= L - 1; ++l) {
    ps.n.push_back(pow_big(ps.K, BigNat(4) * pow8(static_cast<unsigned long>(L - l - 1))));
  }
  ps.N.push_back(ps.m);
  for (int l = 1; l <= L - 1; ++l) ps.N.push_back(ps.N.back() * ps.n_at(l));
  for (int l = 0; l <= L - 1; ++l) ps.x.push_back(pow_big(ps.K, pow8(static_cast<unsigned long>(L - l - 1))));

  const BigNat n_all = product(ps.n, 0, ps.n.size());
  for (int l = 2; l <= L; ++l) {
    ps.delta_log2.push_back(4 * ps.sqrt_K * product(ps.x, 0, static_cast<std::size_t>(l - 1)) * n_all);
  }
  for (int l = 1; l <= L - 1; ++l) {
    Rational t(product(ps.x, 0, static_cast<std::size_t>(l + 1)) * product(ps.n, 0, static_cast<std::size_t>(l - 1)));
    Rational scale(1);
    scale.get_den() = pow8(static_cast<unsigned long>(L * l));
    scale.canonicalize();
    ps.theta.push_back(t * scale);
  }
  for (int l = 1; l <= L; ++l) ps.A_card.push_back({ps.N_at(l - 1), ps.N_at(l - 1)});
  return ps;
}

std::vector<EqualityCheck> verify_param_equalities(const ParamSet& ps) {
  FormulaEvaluator ev;
  ev.set("H", ps.H);
  ev.set("d", ps.d);
  ev.set("p", ps.p);
  ev.set("L", ps.L);
  std::vector<EqualityCheck> out;
  auto check = [&](const std::string& name, const std::string& formula, const Rational& expected) {
    const Rational got = ev.eval(formula);
    ev.set(name, got);
    out.push_back({name, formula, got == expected});
  };
  const int L = ps.L;

  check("K", "(H*d*p*L)^8 * 8^(2*L^2)", Rational(ps.K));
  check("sqrtK", "isqrt(K)", Rational(ps.sqrt_K));
  out.push_back({"sqrtK^2", "sqrtK^2 - K", ev.eval("sqrtK^2 - K") == 0});

  std::string m_exp;
  for (int l = 0; l <= L - 1; ++l) m_exp += "8^" + std::to_string(l) + " + ";
  check("m", "K^(" + m_exp + "1)", Rational(ps.m));

  for (int l = 1; l <= L - 1; ++l) {
    check("n_" + std::to_string(l), "K^(4*8^(L-" + std::to_string(l) + "-1))", Rational(ps.n_at(l)));
  }
  for (int l = 0; l <= L - 1; ++l) {
    check("N_" + std::to_string(l), "m*" + join_product("n_", 1, l), Rational(ps.N_at(l)));
  }
  for (int l = 0; l <= L - 1; ++l) {
    check("x_" + std::to_string(l), "K^(8^(L-" + std::to_string(l) + "-1))", Rational(ps.x_at(l)));
  }
  for (int l = 2; l <= L; ++l) {
    check("log2Delta_" + std::to_string(l),
          "4*sqrtK*" + join_product("x_", 0, l - 2) + "*" + join_product("n_", 1, L - 1),
          Rational(ps.delta_log2_at(l)));
  }
  for (int l = 1; l <= L - 1; ++l) {
    check("Theta_" + std::to_string(l),
          "8^(-L*" + std::to_string(l) + ")*" + join_product("x_", 0, l) + "*" + join_product("n_", 1, l - 1),
          ps.theta_at(l));
  }
  // N_l / N_{l-1} = n_l (telescoping of the N_l definition).
  for (int l = 1; l <= L - 1; ++l) {
    const std::string f = "N_" + std::to_string(l) + "/N_" + std::to_string(l - 1) + " - n_" + std::to_string(l);
    out.push_back({"N_ratio_" + std::to_string(l), f, ev.eval(f) == 0});
  }
  return out;
}

SizeBoundReport check_size_bound(const ParamSet& ps, SizeBoundMode mode) {
  SizeBoundReport r;
  r.prompt_length = 2;
  for (const auto& v : ps.N) r.prompt_length += v;
  r.bound_exponent = 4 * pow_big(BigNat(16), static_cast<unsigned long>(ps.L));

  r.n0_at_least_two = ps.N_at(0) >= 2;
  r.doubling = true;
  for (int l = 1; l <= ps.L - 1; ++l) r.doubling = r.doubling && 2 * ps.N_at(l - 1) <= ps.N_at(l);
  r.n_at_most_twice_last = r.prompt_length <= 2 * ps.N_at(ps.L - 1);

  BigNat e = 1;
  for (int l = 0; l <= ps.L - 1; ++l) e += pow8(static_cast<unsigned long>(l));
  for (int l = 1; l <= ps.L - 1; ++l) e += 4 * pow8(static_cast<unsigned long>(ps.L - l - 1));
  r.exponent_identity = (7 * e == 12 * pow8(static_cast<unsigned long>(ps.L - 1)) + 2) &&
                        (2 * ps.N_at(ps.L - 1) == 2 * pow_big(ps.K, e));

  const BigNat hdp = ps.Hdp();
  r.log2_n_ceil = ceil_log2(r.prompt_length);
  r.log2_bound_floor = r.bound_exponent * static_cast<unsigned long>(floor_log2(hdp));

  const bool exact_feasible = r.log2_bound_floor <= BigNat(1) << 24;
  const bool use_exact = mode == SizeBoundMode::kExact || (mode == SizeBoundMode::kAuto && exact_feasible);
  if (use_exact) {
    if (!exact_feasible) throw ResourceError("exact size bound comparison too large");
    r.mode = "exact";
    r.holds = r.prompt_length <= pow_big(hdp, r.bound_exponent);
  } else {
    // n <= 2^ceil(log2 n) <= 2^(E floor(log2 Hdp)) <= (Hdp)^E.
    r.mode = "log2";
    r.holds = BigNat(static_cast<unsigned long>(r.log2_n_ceil)) <= r.log2_bound_floor;
  }
  return r;
}

HybridBudgetReport check_hybrid_budget(const ParamSet& ps, const std::vector<BigNat>& a) {
  if (a.size() != static_cast<std::size_t>(ps.L)) throw ValidationError("schedule must list a_1 .. a_L");
  for (const auto& v : a) {
    if (v < 0) throw ValidationError("schedule counts must be non-negative");
  }
  if (a[0] > 1) throw ValidationError("hybrid budget check assumes a_1 <= 1");

  HybridBudgetReport report;
  const BigNat width = BigNat(ps.H) * ps.d * (ps.d + 1) * ps.p;
  const BigNat n_all = product(ps.n, 0, ps.n.size());
  BigNat prefix = a[0];
  for (int l = 1; l <= ps.L - 1; ++l) {
    prefix += a[static_cast<std::size_t>(l)];
    HybridBudgetRow row;
    row.l = l;
    row.lhs = width * prefix;
    const BigNat scale = product(ps.x, 0, static_cast<std::size_t>(l)) * n_all;
    row.rhs = ps.sqrt_K * scale;
    // lhs <= sqrt(K) * scale  <=>  lhs^2 <= K * scale^2 (both sides non-negative).
    row.holds = row.lhs * row.lhs <= ps.K * scale * scale;
    if (!row.holds) report.failing.push_back(l);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<BigNat> default_hybrid_schedule(int L) {
  std::vector<BigNat> a(static_cast<std::size_t>(L), BigNat(1) << static_cast<unsigned long>(3 * L * L));
  a[0] = 1;
  return a;
}

}  // namespace attnlab
