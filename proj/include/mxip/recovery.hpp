#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "grid.hpp"
#include "media.hpp"
#include "sparse_lu.hpp"

namespace mxip {

struct NewtonDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct JacobianSingular : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Node grid covering O with two ghost layers, enough for the 4th-order stencils at every node of O.
struct RecoveryGrid {
  Grid3 grid;
  IndexBox O;

  static RecoveryGrid around(const RVec3& olo, const RVec3& ohi, double h) {
    RecoveryGrid r;
    RVec3 pad = RVec3::Constant(2.0 * h);
    r.grid = Grid3::box(olo - pad, ohi + pad, h);
    r.O = index_box(r.grid, olo, ohi);
    return r;
  }
  bool in_o(int i, int j, int k) const { return O.contains(i, j, k); }
  bool on_boundary(int i, int j, int k) const {
    if (!in_o(i, j, k)) return false;
    return i == O.lo[0] || i == O.hi[0] || j == O.lo[1] || j == O.hi[1] || k == O.lo[2] || k == O.hi[2];
  }
  bool unknown(int i, int j, int k) const { return in_o(i, j, k) && !on_boundary(i, j, k); }
};

// alpha = log gamma, beta = log mu sampled at the nodes
struct LogFields {
  std::vector<cplx> alpha, beta;
};

inline LogFields sample_logs(const RecoveryGrid& rg, const CoefficientSet& c) {
  LogFields l;
  l.alpha.resize(rg.grid.size());
  l.beta.resize(rg.grid.size());
  for (std::size_t id = 0; id < rg.grid.size(); ++id) {
    RVec3 x = rg.grid.point(id);
    l.alpha[id] = std::log(c.gamma_value(x));
    l.beta[id] = std::log(cplx(c.mu_value(x)));
  }
  return l;
}

// g_beta = 1/2 Lap(b2 - b1) + 1/4[(Db1)^2 - (Db2)^2] + kappa1^2 - kappa2^2, g_alpha likewise; nonzero only on O
struct BracketPair {
  std::vector<cplx> g_alpha, g_beta;
};

// Pointwise from the coefficient jets.
inline BracketPair compute_brackets(const RecoveryGrid& rg, const CoefficientSet& c1, const CoefficientSet& c2) {
  BracketPair b;
  b.g_alpha.assign(rg.grid.size(), 0.0);
  b.g_beta.assign(rg.grid.size(), 0.0);
  for (std::size_t id = 0; id < rg.grid.size(); ++id) {
    auto [i, j, k] = rg.grid.unindex(id);
    if (!rg.in_o(i, j, k)) continue;
    RVec3 x = rg.grid.point(id);
    MediumPoint p1 = c1.point(x), p2 = c2.point(x);
    b.g_alpha[id] = bracket_alpha(p1, p2);
    b.g_beta[id] = bracket_beta(p1, p2);
  }
  return b;
}

namespace detail {
inline cplx discrete_bracket(const Stencil<cplx>& f1, const Stencil<cplx>& f2, int i, int j, int k, cplx k1sq,
                             cplx k2sq) {
  cplx g = 0.5 * (f2.laplacian(i, j, k) - f1.laplacian(i, j, k)) + k1sq - k2sq;
  for (int a = 0; a < 3; ++a) {
    cplx d1 = f1.d1(i, j, k, a), d2 = f2.d1(i, j, k, a);
    g += 0.25 * (d2 * d2 - d1 * d1);
  }
  return g;
}
}  // namespace detail

// Same expression with 4th-order differences of sampled logs; the operator the Newton solver inverts.
inline BracketPair discrete_brackets(const RecoveryGrid& rg, const LogFields& l1, const LogFields& l2, double omega) {
  const Grid3& g = rg.grid;
  BracketPair b;
  b.g_alpha.assign(g.size(), 0.0);
  b.g_beta.assign(g.size(), 0.0);
  Stencil<cplx> a1{g, l1.alpha, 4}, a2{g, l2.alpha, 4}, b1{g, l1.beta, 4}, b2{g, l2.beta, 4};
  double w2 = omega * omega;
  for (int i = rg.O.lo[0]; i <= rg.O.hi[0]; ++i)
    for (int j = rg.O.lo[1]; j <= rg.O.hi[1]; ++j)
      for (int k = rg.O.lo[2]; k <= rg.O.hi[2]; ++k) {
        std::size_t id = g.index(i, j, k);
        cplx k1 = w2 * std::exp(l1.alpha[id] + l1.beta[id]), k2 = w2 * std::exp(l2.alpha[id] + l2.beta[id]);
        b.g_alpha[id] = detail::discrete_bracket(a1, a2, i, j, k, k1, k2);
        b.g_beta[id] = detail::discrete_bracket(b1, b2, i, j, k, k1, k2);
      }
  return b;
}

// int_O e^{i xi.x} g dx by the trapezoid rule, for each probe; the maximum over probes and both brackets
struct FourierTest {
  std::vector<cplx> alpha, beta;
  double max_abs = 0.0;
};

inline FourierTest fourier_vanishing_test(const RecoveryGrid& rg, const BracketPair& bp,
                                          const std::vector<RVec3>& xis) {
  const Grid3& g = rg.grid;
  FourierTest r;
  for (const RVec3& xi : xis) {
    cplx sa = 0.0, sb = 0.0;
    for (int i = rg.O.lo[0]; i <= rg.O.hi[0]; ++i)
      for (int j = rg.O.lo[1]; j <= rg.O.hi[1]; ++j)
        for (int k = rg.O.lo[2]; k <= rg.O.hi[2]; ++k) {
          std::size_t id = g.index(i, j, k);
          cplx e = trapezoid_weight(g, rg.O, i, j, k) * std::exp(I * xi.dot(g.point(id)));
          sa += e * bp.g_alpha[id];
          sb += e * bp.g_beta[id];
        }
    r.alpha.push_back(sa);
    r.beta.push_back(sb);
    r.max_abs = std::max({r.max_abs, std::abs(sa), std::abs(sb)});
  }
  return r;
}

// Cancellations closing the Fourier identity:
// kappa1/omega (kappa2 mu~ + kappa1 gamma~) + (kappa2^2 - kappa1^2)(gamma1/gamma2)^{1/2} = 0 and the mu analogue.
struct Cancellation {
  cplx first = 0.0, second = 0.0;
  double scale = 0.0;  // largest single term
};

inline Cancellation cancellation_identities(const MediumPoint& p1, const MediumPoint& p2, double omega) {
  PairPoint pp = build_U(p1, p2, omega);
  cplx k1 = p1.kappa, k2 = p2.kappa;
  Cancellation c;
  cplx t1 = k1 / omega * (k2 * pp.mu_t + k1 * pp.gamma_t), t2 = (k2 * k2 - k1 * k1) * pp.u;
  cplx s1 = k1 / omega * (k2 * pp.gamma_t + k1 * pp.mu_t), s2 = (k2 * k2 - k1 * k1) * pp.v;
  c.first = t1 + t2;
  c.second = s1 + s2;
  c.scale = std::max({std::abs(t1), std::abs(t2), std::abs(s1), std::abs(s2)});
  return c;
}

// Integrand of the Fourier identity before the cancellations are applied (alpha form uses u, beta form v).
inline cplx assembled_integrand(const MediumPoint& p1, const MediumPoint& p2, double omega, bool alpha) {
  PairPoint pp = build_U(p1, p2, omega);
  const CJet& a1 = alpha ? p1.alpha : p1.beta;
  const CJet& a2 = alpha ? p2.alpha : p2.beta;
  cplx k1 = p1.kappa, k2 = p2.kappa;
  cplx w = alpha ? pp.u : pp.v;
  cplx sq1 = -dot(a1.g, a1.g), sq2 = -dot(a2.g, a2.g);  // (Df)^2
  cplx mix = alpha ? k1 / omega * (k2 * pp.mu_t + k1 * pp.gamma_t) : k1 / omega * (k2 * pp.gamma_t + k1 * pp.mu_t);
  return 0.5 * (a2.lap() - a1.lap()) + 0.25 * w * (sq1 - sq2) + mix +
         (k2 * k2 - k1 * k1 + 0.25 * sq2 - 0.25 * sq1) * (w - 1.0);
}

// D.(a Du) + p(u^2 v^2 - 1)u and D.(b Dv) + q(u^2 v^2 - 1)v, D = -i grad, on the nodes of O
struct SemilinearResidual {
  std::vector<cplx> r_u, r_v;
};

namespace detail {
// D.(a D f) = -(grad a . grad f + a Lap f)
inline cplx div_a_grad(const Stencil<cplx>& a, const Stencil<cplx>& f, int i, int j, int k) {
  cplx s = a.at(i, j, k) * f.laplacian(i, j, k);
  for (int d = 0; d < 3; ++d) s += a.d1(i, j, k, d) * f.d1(i, j, k, d);
  return -s;
}
}  // namespace detail

inline SemilinearResidual semilinear_residual(const RecoveryGrid& rg, const std::vector<cplx>& u,
                                              const std::vector<cplx>& v, const std::vector<cplx>& a,
                                              const std::vector<cplx>& b, const std::vector<cplx>& p,
                                              const std::vector<cplx>& q) {
  const Grid3& g = rg.grid;
  SemilinearResidual r;
  r.r_u.assign(g.size(), 0.0);
  r.r_v.assign(g.size(), 0.0);
  Stencil<cplx> su{g, u, 4}, sv{g, v, 4}, sa{g, a, 4}, sb{g, b, 4};
  for (int i = rg.O.lo[0]; i <= rg.O.hi[0]; ++i)
    for (int j = rg.O.lo[1]; j <= rg.O.hi[1]; ++j)
      for (int k = rg.O.lo[2]; k <= rg.O.hi[2]; ++k) {
        std::size_t id = g.index(i, j, k);
        cplx m = u[id] * u[id] * v[id] * v[id] - 1.0;
        r.r_u[id] = detail::div_a_grad(sa, su, i, j, k) + p[id] * m * u[id];
        r.r_v[id] = detail::div_a_grad(sb, sv, i, j, k) + q[id] * m * v[id];
      }
  return r;
}

// Directional derivative of the residual: D.(a D du) + p[(3u^2v^2 - 1)du + 2u^3 v dv] and the v analogue
inline SemilinearResidual semilinear_linearization(const RecoveryGrid& rg, const std::vector<cplx>& u,
                                                   const std::vector<cplx>& v, const std::vector<cplx>& du,
                                                   const std::vector<cplx>& dv, const std::vector<cplx>& a,
                                                   const std::vector<cplx>& b, const std::vector<cplx>& p,
                                                   const std::vector<cplx>& q) {
  const Grid3& g = rg.grid;
  SemilinearResidual r;
  r.r_u.assign(g.size(), 0.0);
  r.r_v.assign(g.size(), 0.0);
  Stencil<cplx> su{g, du, 4}, sv{g, dv, 4}, sa{g, a, 4}, sb{g, b, 4};
  for (int i = rg.O.lo[0]; i <= rg.O.hi[0]; ++i)
    for (int j = rg.O.lo[1]; j <= rg.O.hi[1]; ++j)
      for (int k = rg.O.lo[2]; k <= rg.O.hi[2]; ++k) {
        std::size_t id = g.index(i, j, k);
        cplx u2 = u[id] * u[id], v2 = v[id] * v[id];
        r.r_u[id] = detail::div_a_grad(sa, su, i, j, k) +
                    p[id] * ((3.0 * u2 * v2 - 1.0) * du[id] + 2.0 * u2 * u[id] * v[id] * dv[id]);
        r.r_v[id] = detail::div_a_grad(sb, sv, i, j, k) +
                    q[id] * ((3.0 * u2 * v2 - 1.0) * dv[id] + 2.0 * v2 * v[id] * u[id] * du[id]);
      }
  return r;
}

// Reference data of the system: a = gamma2, b = mu2, p = omega^2 mu2 gamma2^2, q = omega^2 mu2^2 gamma2
struct SemilinearCoefficients {
  std::vector<cplx> a, b, p, q;
};

inline SemilinearCoefficients semilinear_coefficients(const LogFields& ref, double omega) {
  SemilinearCoefficients c;
  std::size_t n = ref.alpha.size();
  c.a.resize(n);
  c.b.resize(n);
  c.p.resize(n);
  c.q.resize(n);
  for (std::size_t id = 0; id < n; ++id) {
    cplx g = std::exp(ref.alpha[id]), m = std::exp(ref.beta[id]);
    c.a[id] = g;
    c.b[id] = m;
    c.p[id] = omega * omega * m * g * g;
    c.q[id] = omega * omega * m * m * g;
  }
  return c;
}

// u = (gamma1/gamma2)^{1/2}, v = (mu1/mu2)^{1/2}
inline std::pair<std::vector<cplx>, std::vector<cplx>> ratio_fields(const LogFields& l1, const LogFields& l2) {
  std::vector<cplx> u(l1.alpha.size()), v(l1.alpha.size());
  for (std::size_t id = 0; id < u.size(); ++id) {
    u[id] = std::exp(0.5 * (l1.alpha[id] - l2.alpha[id]));
    v[id] = std::exp(0.5 * (l1.beta[id] - l2.beta[id]));
  }
  return {u, v};
}

// Substitution u = 1 + a^{-1/2} z, v = 1 + b^{-1/2} w and the identities used to reach the z, w system.
struct SubstitutionGaps {
  double div_identity_a = 0.0;  // D.(a D(a^{-1/2} z)) - a^{1/2}(-Lap z + Lap(a^{1/2})/a^{1/2} z)
  double div_identity_b = 0.0;
  double product_identity = 0.0;  // u^2 v^2 - 1 - (ab)^{-1/2}(zw + b^{1/2} z + a^{1/2} w)(uv + 1)
  double z_equation = 0.0;        // z-system residual minus a^{-1/2} times the u residual
  double w_equation = 0.0;
  double C = 0.0;                 // constant of the differential inequalities from sup|p~|, sup|q~|
  double inequality_excess = 0.0; // max(|Lap z| - C(|z| + |w|) - |a^{-1/2} r_u|) and the w analogue
  double boundary_zw = 0.0;       // max |z|, |w| on dO
  double scale = 0.0;             // max |Lap z|, |Lap w|
};

inline SubstitutionGaps substitution_check(const RecoveryGrid& rg, const std::vector<cplx>& z,
                                           const std::vector<cplx>& w, const std::vector<cplx>& a,
                                           const std::vector<cplx>& b, const std::vector<cplx>& p,
                                           const std::vector<cplx>& q) {
  const Grid3& g = rg.grid;
  std::size_t n = g.size();
  for (std::size_t id = 0; id < n; ++id)
    if (!(a[id].real() > 0.0) || !(b[id].real() > 0.0))
      throw std::invalid_argument("substitution_check: a and b need positive real part");
  std::vector<cplx> ra(n), rb(n), az(n), bw(n), u(n), v(n);
  for (std::size_t id = 0; id < n; ++id) {
    ra[id] = std::sqrt(a[id]);
    rb[id] = std::sqrt(b[id]);
    az[id] = z[id] / ra[id];
    bw[id] = w[id] / rb[id];
    u[id] = 1.0 + az[id];
    v[id] = 1.0 + bw[id];
  }
  SemilinearResidual res = semilinear_residual(rg, u, v, a, b, p, q);
  Stencil<cplx> sz{g, z, 4}, sw{g, w, 4}, sa{g, a, 4}, sb{g, b, 4}, sra{g, ra, 4}, srb{g, rb, 4}, saz{g, az, 4},
      sbw{g, bw, 4};
  SubstitutionGaps r;
  std::vector<cplx> lz(n), lw(n), pt(n), qt(n), ka(n), kb(n);
  double sup_ka = 0.0, sup_kb = 0.0, sup_pt = 0.0, sup_qt = 0.0, sup_w = 0.0, sup_z = 0.0, sup_ra = 0.0, sup_rb = 0.0;
  auto each_o = [&](auto&& f) {
    for (int i = rg.O.lo[0]; i <= rg.O.hi[0]; ++i)
      for (int j = rg.O.lo[1]; j <= rg.O.hi[1]; ++j)
        for (int k = rg.O.lo[2]; k <= rg.O.hi[2]; ++k) f(i, j, k, g.index(i, j, k));
  };
  each_o([&](int i, int j, int k, std::size_t id) {
    lz[id] = sz.laplacian(i, j, k);
    lw[id] = sw.laplacian(i, j, k);
    ka[id] = sra.laplacian(i, j, k) / ra[id];
    kb[id] = srb.laplacian(i, j, k) / rb[id];
    cplx uv1 = u[id] * v[id] + 1.0, ab = 1.0 / std::sqrt(a[id] * b[id]);
    pt[id] = p[id] / ra[id] * ab * uv1 * u[id];
    qt[id] = q[id] / rb[id] * ab * uv1 * v[id];
    cplx lhs_a = detail::div_a_grad(sa, saz, i, j, k), rhs_a = ra[id] * (-lz[id] + ka[id] * z[id]);
    cplx lhs_b = detail::div_a_grad(sb, sbw, i, j, k), rhs_b = rb[id] * (-lw[id] + kb[id] * w[id]);
    r.div_identity_a = std::max(r.div_identity_a, std::abs(lhs_a - rhs_a));
    r.div_identity_b = std::max(r.div_identity_b, std::abs(lhs_b - rhs_b));
    cplx s = z[id] * w[id] + rb[id] * z[id] + ra[id] * w[id];
    r.product_identity =
        std::max(r.product_identity, std::abs(u[id] * u[id] * v[id] * v[id] - 1.0 - ab * s * uv1));
    cplx ez = -lz[id] + ka[id] * z[id] + pt[id] * s, ew = -lw[id] + kb[id] * w[id] + qt[id] * s;
    r.z_equation = std::max(r.z_equation, std::abs(ez - res.r_u[id] / ra[id]));
    r.w_equation = std::max(r.w_equation, std::abs(ew - res.r_v[id] / rb[id]));
    sup_ka = std::max(sup_ka, std::abs(ka[id]));
    sup_kb = std::max(sup_kb, std::abs(kb[id]));
    sup_pt = std::max(sup_pt, std::abs(pt[id]));
    sup_qt = std::max(sup_qt, std::abs(qt[id]));
    sup_z = std::max(sup_z, std::abs(z[id]));
    sup_w = std::max(sup_w, std::abs(w[id]));
    sup_ra = std::max(sup_ra, std::abs(ra[id]));
    sup_rb = std::max(sup_rb, std::abs(rb[id]));
    r.scale = std::max({r.scale, std::abs(lz[id]), std::abs(lw[id])});
    if (rg.on_boundary(i, j, k)) r.boundary_zw = std::max({r.boundary_zw, std::abs(z[id]), std::abs(w[id])});
  });
  // |Lap z| <= |Lap a^{1/2}/a^{1/2}||z| + |p~|(|z||w| + |b^{1/2}||z| + |a^{1/2}||w|)
  double cz = std::max(sup_ka + sup_pt * (sup_w + sup_rb), sup_pt * sup_ra);
  double cw = std::max(sup_qt * (sup_w + sup_rb), sup_kb + sup_qt * (sup_z + sup_ra));
  cw = std::max(cw, sup_kb + sup_qt * sup_ra);
  r.C = std::max(cz, cw);
  each_o([&](int, int, int, std::size_t id) {
    double zw = std::abs(z[id]) + std::abs(w[id]);
    r.inequality_excess = std::max({r.inequality_excess, std::abs(lz[id]) - r.C * zw - std::abs(res.r_u[id] / ra[id]),
                                    std::abs(lw[id]) - r.C * zw - std::abs(res.r_v[id] / rb[id])});
  });
  return r;
}

// Newton solve of discrete_brackets(l1, ref) = g for the unknown logs l1 at the interior nodes of O;
// l1 = ref on dO and the ghost layers.
struct NewtonOptions {
  int max_iter = 20;
  double step_tol = 1e-11;  // sup-norm of the Newton update
  double armijo = 1e-4;
  int max_backtrack = 30;
  double linear_tol = 1e-13;  // BiCGSTAB relative residual
  int linear_max_iter = 2000;
};

struct NewtonIterate {
  double residual = 0.0;  // sup |bracket(l1) - g| before the step
  double step = 0.0;      // sup |delta|
  double length = 1.0;    // accepted line-search factor
  double error = -1.0;    // sup relative error of (gamma1, mu1) against a supplied truth, after the step
};

struct NewtonResult {
  LogFields logs;
  std::vector<cplx> gamma1, mu1;
  std::vector<NewtonIterate> log;
  int iterations = 0;
  double final_residual = 0.0;
};

class BracketNewton {
 public:
  BracketNewton(const RecoveryGrid& rg, const LogFields& ref, double omega) : rg_(rg), ref_(ref), omega_(omega) {
    const Grid3& g = rg.grid;
    slot_.assign(g.size(), -1);
    for (std::size_t id = 0; id < g.size(); ++id) {
      auto [i, j, k] = g.unindex(id);
      if (rg.unknown(i, j, k)) {
        slot_[id] = int(nodes_.size());
        nodes_.push_back(id);
      }
    }
  }

  std::size_t unknowns() const { return 2 * nodes_.size(); }

  // F(l) = bracket(l, ref) - g at the unknown nodes, alpha rows first
  CVecX residual(const LogFields& l, const BracketPair& g) const {
    BracketPair b = discrete_brackets(rg_, l, ref_, omega_);
    std::size_t n = nodes_.size();
    CVecX F(2 * n);
    for (std::size_t s = 0; s < n; ++s) {
      F(s) = b.g_alpha[nodes_[s]] - g.g_alpha[nodes_[s]];
      F(n + s) = b.g_beta[nodes_[s]] - g.g_beta[nodes_[s]];
    }
    return F;
  }

  SpMat jacobian(const LogFields& l) const {
    const Grid3& gr = rg_.grid;
    std::size_t n = nodes_.size();
    std::vector<Eigen::Triplet<cplx>> t;
    t.reserve(2 * n * 15);
    Stencil<cplx> sa{gr, l.alpha, 4}, sb{gr, l.beta, 4};
    double h = gr.h, w2 = omega_ * omega_;
    for (std::size_t s = 0; s < n; ++s) {
      std::size_t id = nodes_[s];
      auto [i, j, k] = gr.unindex(id);
      cplx c = w2 * std::exp(l.alpha[id] + l.beta[id]);
      for (int f = 0; f < 2; ++f) {
        const Stencil<cplx>& st = f == 0 ? sa : sb;
        int row = int(f * n + s);
        CVec3 gf(st.d1(i, j, k, 0), st.d1(i, j, k, 1), st.d1(i, j, k, 2));
        t.emplace_back(row, int(s), c);
        t.emplace_back(row, int(n + s), c);
        for (int a = 0; a < 3; ++a)
          for (int o = -2; o <= 2; ++o) {
            int idx[3] = {i, j, k};
            idx[a] += o;
            int m = slot_[gr.index(idx[0], idx[1], idx[2])];
            if (m < 0) continue;
            cplx wt = -0.5 * kD2o4[o + 2] / (h * h) - 0.5 * gf(a) * kD1o4[o + 2] / h;
            t.emplace_back(row, int(f * n + m), wt);
          }
      }
    }
    SpMat J(2 * n, 2 * n);
    J.setFromTriplets(t.begin(), t.end());
    return J;
  }

  LogFields updated(const LogFields& l, const CVecX& d, double s) const {
    LogFields r = l;
    std::size_t n = nodes_.size();
    for (std::size_t q = 0; q < n; ++q) {
      r.alpha[nodes_[q]] += s * d(q);
      r.beta[nodes_[q]] += s * d(n + q);
    }
    return r;
  }

  LogFields initial() const { return ref_; }

  NewtonResult solve(const BracketPair& g, const NewtonOptions& opt = {}, const LogFields* truth = nullptr,
                     std::optional<LogFields> start = std::nullopt) const {
    NewtonResult res;
    LogFields l = start ? *start : ref_;
    CVecX F = residual(l, g);
    for (int it = 1; it <= opt.max_iter; ++it) {
      NewtonIterate rec;
      rec.residual = F.cwiseAbs().maxCoeff();
      CVecX d = linear_solve(jacobian(l), -F, opt);
      rec.step = d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
      double f0 = F.squaredNorm(), s = 1.0;
      LogFields trial;
      CVecX Ft;
      int bt = 0;
      for (;; ++bt) {
        if (bt > opt.max_backtrack) throw NewtonDiverged("line search exhausted");
        trial = updated(l, d, s);
        Ft = residual(trial, g);
        if (Ft.squaredNorm() <= (1.0 - 2.0 * opt.armijo * s) * f0 || f0 == 0.0) break;
        s *= 0.5;
      }
      if (!Ft.allFinite()) throw NewtonDiverged("non-finite residual");
      l = std::move(trial);
      F = std::move(Ft);
      rec.length = s;
      if (truth) rec.error = relative_error(l, *truth);
      res.log.push_back(rec);
      res.iterations = it;
      if (rec.step * s <= opt.step_tol) break;
      if (it == opt.max_iter) throw NewtonDiverged("no convergence within the iteration limit");
    }
    res.final_residual = F.size() ? F.cwiseAbs().maxCoeff() : 0.0;
    res.gamma1.resize(l.alpha.size());
    res.mu1.resize(l.alpha.size());
    for (std::size_t id = 0; id < l.alpha.size(); ++id) {
      res.gamma1[id] = std::exp(l.alpha[id]);
      res.mu1[id] = std::exp(l.beta[id]);
    }
    res.logs = std::move(l);
    return res;
  }

  // BiCGSTAB preconditioned by incomplete LU with threshold
  static CVecX linear_solve(const SpMat& J, const CVecX& b, const NewtonOptions& opt) {
    if (b.size() == 0 || b.cwiseAbs().maxCoeff() == 0.0) return CVecX::Zero(b.size());
    Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<cplx>> solver;
    solver.preconditioner().setDroptol(1e-4);
    solver.preconditioner().setFillfactor(20);
    solver.setTolerance(opt.linear_tol);
    solver.setMaxIterations(opt.linear_max_iter);
    solver.compute(J);
    if (solver.info() != Eigen::Success) throw JacobianSingular("incomplete factorization of the bracket Jacobian failed");
    CVecX x = solver.solve(b);
    if (solver.info() != Eigen::Success || !x.allFinite())
      throw JacobianSingular("linear solve did not converge (residual " + std::to_string(solver.error()) + ")");
    return x;
  }

  // sup over O of |gamma - gamma*|/|gamma*| and the mu analogue
  double relative_error(const LogFields& l, const LogFields& truth) const {
    double e = 0.0;
    const Grid3& g = rg_.grid;
    for (std::size_t id = 0; id < g.size(); ++id) {
      auto [i, j, k] = g.unindex(id);
      if (!rg_.in_o(i, j, k)) continue;
      e = std::max({e, std::abs(std::exp(l.alpha[id] - truth.alpha[id]) - 1.0),
                    std::abs(std::exp(l.beta[id] - truth.beta[id]) - 1.0)});
    }
    return e;
  }

 private:
  const RecoveryGrid& rg_;
  LogFields ref_;
  double omega_;
  std::vector<int> slot_;
  std::vector<std::size_t> nodes_;
};

}  // namespace mxip
