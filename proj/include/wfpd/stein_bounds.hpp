#pragma once

#include <array>
#include <cmath>
#include <string>
#include <variant>

#include <json.hpp>

#include "wfpd/core.hpp"

namespace wfpd {

// Closed-form constants and error bounds for Dirichlet-process approximation.
// Arithmetic routines are templated on the scalar so they can be evaluated in
// exact rational arithmetic as well as in double.

/// Test functions h(<phi_1,mu>, ..., <phi_k,mu>) with h in BC^{2,1}.
struct SmoothClass {
  double h1 = 0.0;            // |h|_1, sup of first partials
  double h2 = 0.0;            // |h|_2, sup of second partials
  double h21 = 0.0;           // |h|_{2,1}, Lipschitz constant of second partials
  double phi_norm_sum = 0.0;  // sum_i ||phi_i||_inf
};

/// Test functions <phi, mu^k>.
struct MomentClass {
  unsigned k = 1;
  double phi_sup = 0.0;  // ||phi||_inf
};

using TestFunctionClass = std::variant<SmoothClass, MomentClass>;

template <class Real>
using Triple = std::array<Real, 3>;

inline void validate(const TestFunctionClass& tf) {
  if (const auto* s = std::get_if<SmoothClass>(&tf)) {
    if (s->h1 < 0 || s->h2 < 0 || s->h21 < 0 || s->phi_norm_sum < 0) throw ValidationError("norms must be >= 0");
  } else {
    const auto& m = std::get<MomentClass>(tf);
    if (m.k < 1) throw ValidationError("moment class needs k >= 1");
    if (m.phi_sup < 0) throw ValidationError("norms must be >= 0");
  }
}

/// L_1, L_2, L_3. Smooth class: |h|_m (sum ||phi_i||)^m with |h|_{2,1} for m = 3;
/// moment class: k(k-1)...(k-m+1) ||phi||.
template <class Real = double>
Triple<Real> lm_constants(const TestFunctionClass& tf) {
  validate(tf);
  if (const auto* s = std::get_if<SmoothClass>(&tf)) {
    const Real sum = Real(s->phi_norm_sum);
    return {Real(s->h1) * sum, Real(s->h2) * sum * sum, Real(s->h21) * sum * sum * sum};
  }
  const auto& m = std::get<MomentClass>(tf);
  Triple<Real> out{};
  Real falling = Real(1);
  for (unsigned i = 0; i < 3; ++i) {
    falling = falling * Real(static_cast<long long>(m.k) - static_cast<long long>(i));
    out[i] = (m.k > i) ? falling * Real(m.phi_sup) : Real(0);
  }
  return out;
}

/// Stein-solution derivative bounds D_1, D_2, D_3.
template <class Real = double>
Triple<Real> d_constants(const TestFunctionClass& tf, Real theta) {
  if (!(theta > Real(0))) throw DomainError("theta must be positive");
  const auto L = lm_constants<Real>(tf);
  const Real c3 = std::holds_alternative<SmoothClass>(tf) ? Real(16) : Real(12);
  const Real d1 = Real(4) * L[0] / theta;
  const Real d2 = d1 + Real(4) * L[1] / (theta + Real(1));
  const Real d3 = d1 + c3 * L[1] / (theta + Real(1)) + Real(16) * L[2] / (Real(3) * (theta + Real(2)));
  return {d1, d2, d3};
}

/// Sampling-formula constants: a bound B_1..B_3 on moment-class expectations
/// yields d_TV(S_n(W), S_n(Z)) <= sum_i Dhat_i(n; theta) B_i.
template <class Real = double>
Triple<Real> dhat_constants(unsigned n, Real theta) {
  if (n < 1) throw DomainError("n must be >= 1");
  if (!(theta > Real(0))) throw DomainError("theta must be positive");
  const Real nn = Real(static_cast<long long>(n));
  const Real d1 = Real(4) * nn / theta;
  const Real d2 = d1 + Real(4) * nn * (nn - Real(1)) / (theta + Real(1));
  const Real d3 = d1 + Real(12) * nn * (nn - Real(1)) / (theta + Real(1)) +
                  Real(16) * nn * (nn - Real(1)) * (nn - Real(2)) / (Real(3) * (theta + Real(2)));
  return {d1, d2, d3};
}

/// Exact-gap side of the CRP comparison: sup over the moment class is
/// bounded by D_2 theta/n + D_3 2(n+theta-1)/(3n^2).
template <class Real = double>
Real crp_proposition_bound(unsigned n, const Triple<Real>& D, const Real& theta) {
  if (n < 1) throw DomainError("n must be >= 1");
  const Real nn = Real(static_cast<long long>(n));
  return D[1] * theta / nn + D[2] * Real(2) * (nn + theta - Real(1)) / (Real(3) * nn * nn);
}

template <class Real = double>
Real crp_proposition_bound(unsigned n, const TestFunctionClass& tf, Real theta) {
  return crp_proposition_bound<Real>(n, d_constants<Real>(tf, theta), theta);
}

enum class K32Provenance { MonteCarlo, TheoremBound, UserValue };

inline std::string to_string(K32Provenance p) {
  switch (p) {
    case K32Provenance::MonteCarlo: return "mc";
    case K32Provenance::TheoremBound: return "theorem";
    case K32Provenance::UserValue: return "value";
  }
  return "unknown";
}

/// Which cube-root constant enters A_3: 14 as in the theorem statement, or 12
/// as derived in the supporting lemma.
enum class A3Constant { Theorem, Lemma };

struct WFBoundInputs {
  std::size_t N = 0;
  double theta = 1.0;
  double p_sup = 0.0;           // ||p||_inf
  double p_dev_sup = 0.0;       // sup_x |p(x) - theta/2N|
  double kernel_dev_sup = 0.0;  // sup_x ||kappa_x - pi||
  double k32 = 1.0;             // E[K_N^{3/2}]
  K32Provenance k32_provenance = K32Provenance::UserValue;

  void validate() const {
    if (N < 1) throw ValidationError("N must be >= 1");
    require_theta(theta);
    if (!(p_sup >= 0.0 && p_sup <= 1.0)) throw ValidationError("p_sup must lie in [0,1]");
    if (p_dev_sup < 0.0 || kernel_dev_sup < 0.0) throw ValidationError("suprema must be non-negative");
    if (!(k32 >= 1.0)) throw ValidationError("E[K^{3/2}] must be >= 1");
  }

  /// PIM with p = theta/(2N), kappa = pi.
  static WFBoundInputs pim(std::size_t N, double theta, double k32, K32Provenance prov) {
    WFBoundInputs in;
    in.N = N;
    in.theta = theta;
    in.p_sup = theta / (2.0 * static_cast<double>(N));
    in.k32 = k32;
    in.k32_provenance = prov;
    in.validate();
    return in;
  }
};

/// Stationary second moment bound for the number of types:
/// log(N)^2 (4 + 12e3 N||p|| + 6e6 (N||p||)^2).
inline double kn2_bound(std::size_t N, double p_sup) {
  if (N < 3) throw DomainError("kn2_bound: require N >= 3");
  if (!(p_sup >= 0.0 && p_sup <= 1.0)) throw DomainError("p_sup must lie in [0,1]");
  const double ln = std::log(static_cast<double>(N));
  const double np = static_cast<double>(N) * p_sup;
  return ln * ln * (4.0 + 12e3 * np + 6e6 * np * np);
}

/// E[K^{3/2}] <= E[K^2]^{3/4} <= kn2_bound^{3/4}.
inline double k32_from_theorem(std::size_t N, double p_sup) { return std::pow(kn2_bound(N, p_sup), 0.75); }

inline Triple<double> wf_A_terms(const WFBoundInputs& in, A3Constant c = A3Constant::Theorem) {
  in.validate();
  const double N = static_cast<double>(in.N);
  const double np = N * in.p_sup;
  const double a1 = 4.0 * N * in.p_dev_sup + in.theta * in.kernel_dev_sup;
  const double a2 = 4.0 * in.p_sup * (np + 3.0);
  const double cube = np * np * np + np;
  double inner = 0.0;
  if (c == A3Constant::Theorem) {
    inner = std::sqrt(2.0) + 2.0 * std::cbrt(14.0) * std::cbrt(cube);
  } else {
    inner = std::sqrt(2.0) + 2.0 * std::cbrt(12.0 * cube);
  }
  const double a3 = in.k32 / (3.0 * std::sqrt(N)) * inner * inner * inner;
  return {a1, a2, a3};
}

struct BoundReport {
  Triple<double> L{};
  Triple<double> D{};
  Triple<double> A{};
  double bound = 0.0;
  bool vacuous = false;  // bound exceeds 1
  std::string test_class;
  std::string a3_constant;
  WFBoundInputs inputs;
};

/// (1/2)(D_1 A_1 + D_2 A_2 + D_3 A_3) for the stationary Wright-Fisher measure.
inline BoundReport thm_wf_bound(const TestFunctionClass& tf, const WFBoundInputs& in,
                                A3Constant c = A3Constant::Theorem) {
  BoundReport r;
  r.inputs = in;
  r.L = lm_constants<double>(tf);
  r.D = d_constants<double>(tf, in.theta);
  r.A = wf_A_terms(in, c);
  r.bound = 0.5 * (r.D[0] * r.A[0] + r.D[1] * r.A[1] + r.D[2] * r.A[2]);
  r.vacuous = r.bound > 1.0;
  r.test_class = std::holds_alternative<SmoothClass>(tf) ? "H1" : "H2";
  r.a3_constant = c == A3Constant::Theorem ? "theorem-14" : "lemma-12";
  return r;
}

struct CorollaryBound {
  double value = 0.0;
  Triple<double> coefficients{};  // multipliers of A_1, A_2, A_3 (= Dhat_i / 2)
  Triple<double> A{};
  bool vacuous = false;
};

/// Total-variation bound between the n-sample partition laws of the
/// stationary PIM Wright-Fisher measure and of DP(theta, pi).
inline CorollaryBound corollary_tv_bound(unsigned n, const WFBoundInputs& in, A3Constant c = A3Constant::Theorem) {
  in.validate();
  const double expected_p = in.theta / (2.0 * static_cast<double>(in.N));
  if (in.p_dev_sup != 0.0 || in.kernel_dev_sup != 0.0 ||
      std::abs(in.p_sup - expected_p) > 1e-12 * std::max(1.0, expected_p)) {
    throw ValidationError("corollary_tv_bound requires PIM inputs with p = theta/(2N) and kappa = pi");
  }
  CorollaryBound out;
  const auto dhat = dhat_constants<double>(n, in.theta);
  out.A = wf_A_terms(in, c);
  for (int i = 0; i < 3; ++i) out.coefficients[i] = 0.5 * dhat[i];
  out.value = out.coefficients[1] * out.A[1] + out.coefficients[2] * out.A[2];
  out.vacuous = out.value > 1.0;
  return out;
}

struct BinomialMomentBounds {
  double central4 = 0.0;  // E (X - np)^4 <= 3 n^2 p^2 + n p
  double raw3 = 0.0;      // E X^3 <= n^3 p^3 + 3 n^2 p^2 + n p
  double raw2 = 0.0;      // E X^2 <= n^2 p^2 + n p
};

inline BinomialMomentBounds binomial_moment_bounds(unsigned n, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p must lie in [0,1]");
  const double np = static_cast<double>(n) * p;
  return {3.0 * np * np + np, np * np * np + 3.0 * np * np + np, np * np + np};
}

/// Exact fourth central moment of Bin(n,p): np(1-p)(3(n-2)p(1-p) + 1).
inline double binomial_central4_exact(unsigned n, double p) {
  const double q = p * (1.0 - p);
  return static_cast<double>(n) * q * (3.0 * (static_cast<double>(n) - 2.0) * q + 1.0);
}

/// Exact third raw moment: n^3 p^3 + 3 n^2 p^2 (1-p) + n p (1 - 3p + 2p^2).
inline double binomial_raw3_exact(unsigned n, double p) {
  const double nn = static_cast<double>(n);
  return nn * nn * nn * p * p * p + 3.0 * nn * nn * p * p * (1.0 - p) + nn * p * (1.0 - 3.0 * p + 2.0 * p * p);
}

inline double binomial_raw2_exact(unsigned n, double p) {
  const double np = static_cast<double>(n) * p;
  return np * (1.0 - p) + np * np;
}

inline void to_json(nlohmann::json& j, const WFBoundInputs& in) {
  j = {{"N", in.N},
       {"theta", in.theta},
       {"p_sup", in.p_sup},
       {"p_dev_sup", in.p_dev_sup},
       {"kernel_dev_sup", in.kernel_dev_sup},
       {"k32", in.k32},
       {"k32_provenance", to_string(in.k32_provenance)}};
}

inline void to_json(nlohmann::json& j, const BoundReport& r) {
  j = {{"schema", "wfpd.bound_report/1"},
       {"test_class", r.test_class},
       {"a3_constant", r.a3_constant},
       {"inputs", r.inputs},
       {"L", r.L},
       {"D", r.D},
       {"A", r.A},
       {"bound", r.bound},
       {"vacuous", r.vacuous}};
}

inline void to_json(nlohmann::json& j, const CorollaryBound& c) {
  j = {{"value", c.value}, {"coefficients", c.coefficients}, {"A", c.A}, {"vacuous", c.vacuous}};
}

}  // namespace wfpd
