#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "cgo.hpp"
#include "scenario.hpp"

namespace mxip {

enum class TermKind { L41, L42, L43, L44 };

inline const char* term_name(TermKind k) {
  switch (k) {
    case TermKind::L41: return "L41";
    case TermKind::L42: return "L42";
    case TermKind::L43: return "L43";
    case TermKind::L44: return "L44-cross";
  }
  return "?";
}

inline TermKind parse_term(const std::string& s) {
  for (TermKind k : {TermKind::L41, TermKind::L42, TermKind::L43, TermKind::L44})
    if (s == term_name(k) || (k == TermKind::L44 && s == "L44")) return k;
  throw std::invalid_argument("unknown term '" + s + "'");
}

struct Amplitudes {
  CVec3 a1, b1, a2, b2;
};

// b1 = conj(b2) = zcheck, a1 = conj(a2) = zhat
inline Amplitudes choice_a(const CVec3& zhat, const CVec3& zcheck) {
  return {zhat, zcheck, zhat.conjugate(), zcheck.conjugate()};
}
// a1 = conj(a2) = zcheck, b1 = conj(b2) = zhat
inline Amplitudes choice_b(const CVec3& zhat, const CVec3& zcheck) {
  return {zcheck, zhat, zcheck.conjugate(), zhat.conjugate()};
}

// Under choice (a) (resp. (b)) the limits satisfy L41 + L42 + L43 = omega (zhat.zcheck)^2 int_O e^{i xi.x} g
// with g the beta (resp. alpha) bracket.
inline cplx choice_identity_factor(const CVec3& zhat, const CVec3& zcheck, double omega) {
  cplx z = dot(zhat, zcheck);
  return omega * z * z;
}

// Generic probe: |xi| = r, |xi'|/|xi| = 1/2, azimuth phi.
inline RVec3 probe_xi(double r, double phi) {
  return r * RVec3(0.5 * std::cos(phi), 0.5 * std::sin(phi), std::sqrt(0.75));
}

inline std::vector<RVec3> default_probes() {
  return {probe_xi(M_PI, 1.0), probe_xi(2.0 * M_PI, 2.2), probe_xi(3.0 * M_PI, 4.1)};
}

// Pair data of (medium 1, medium 2) at the nodes of O.
struct PairOnO {
  std::vector<std::size_t> ids;
  std::vector<double> w;
  std::vector<MediumPoint> p1, p2;
  std::vector<PairPoint> pp;
  std::vector<cplx> lap_u, lap_v;
};

inline PairOnO build_pair_on_o(const SpectralBox& box, const MediumOnBox& m1, const CoefficientSet& c2) {
  PairOnO r;
  const Grid3& g = box.grid;
  double omega = c2.omega;
  r.ids = box.o_nodes();
  std::size_t n = r.ids.size();
  r.w.resize(n);
  r.p1.resize(n);
  r.p2.resize(n);
  r.pp.resize(n);
  r.lap_u.resize(n);
  r.lap_v.resize(n);
  for (std::size_t q = 0; q < n; ++q) {
    std::size_t id = r.ids[q];
    auto [i, j, k] = g.unindex(id);
    r.w[q] = trapezoid_weight(g, box.O, i, j, k);
    r.p1[q] = m1.at(id);
    r.p2[q] = c2.point(g.point(id));
    r.pp[q] = build_U(r.p1[q], r.p2[q], omega);
    CVec3 ga = r.p1[q].alpha.g - r.p2[q].alpha.g, gb = r.p1[q].beta.g - r.p2[q].beta.g;
    r.lap_u[q] = r.pp[q].u * (0.5 * (r.p1[q].alpha.lap() - r.p2[q].alpha.lap()) + 0.25 * dot(ga, ga));
    r.lap_v[q] = r.pp[q].v * (0.5 * (r.p1[q].beta.lap() - r.p2[q].beta.lap()) + 0.25 * dot(gb, gb));
  }
  return r;
}

// Richardson extrapolation in 1/tau through the last npts values (polynomial of degree npts-1).
inline cplx richardson(const std::vector<double>& taus, const std::vector<cplx>& vals, int npts) {
  int n = int(taus.size());
  if (npts < 1 || npts > n) throw std::invalid_argument("richardson: bad point count");
  Eigen::MatrixXcd A(npts, npts);
  Eigen::VectorXcd b(npts);
  for (int r = 0; r < npts; ++r) {
    double s = 1.0 / taus[n - npts + r];
    for (int c = 0; c < npts; ++c) A(r, c) = std::pow(s, c);
    b(r) = vals[n - npts + r];
  }
  return A.partialPivLu().solve(b)(0);
}

struct LimitTermReport {
  TermKind kind = TermKind::L41;
  RVec3 xi = RVec3::Zero();
  std::vector<double> taus;
  std::vector<cplx> finite;
  cplx closed_form = 0.0;
  cplx extrap2 = 0.0, extrap3 = 0.0;
  double slope = 0.0;  // log|T - limit| against log tau

  double gap2() const { return rel(extrap2); }
  double gap3() const { return rel(extrap3); }
  // |T(2tau) - T(tau)| over the schedule
  std::vector<double> increments() const {
    std::vector<double> d;
    for (std::size_t i = 1; i < finite.size(); ++i) d.push_back(std::abs(finite[i] - finite[i - 1]));
    return d;
  }

 private:
  double rel(cplx e) const {
    double s = std::abs(closed_form);
    return s > 0.0 ? std::abs(e - closed_form) / s : std::abs(e);
  }
};

struct BoundaryTerms {
  double value = 0.0;   // max |int_{dO} e^{i xi.x} (zhat.nu)(f - 1) dS| over f in {u, v, 1/u, 1/v}
  double normal = 0.0;  // max |int_{dO} e^{i xi.x} (nu.grad) f dS| over f in {u, v}
};

// Finite-tau terms by quadrature of CGO parts against U; closed-form limits from transport solutions and
// coefficient derivatives. The two routes share only the coefficient fields.
class LimitStudy {
 public:
  struct Probe {
    RVec3 xi;
    PhaseGeometry g;
    std::unique_ptr<FourierInverse> inv1, inv2;
    std::vector<cplx> wphase;  // w e^{i xi.x} on O
  };

  LimitStudy(const SpectralBox& box, const CoefficientSet& c1, const CoefficientSet& c2, CgoConfig cfg = {})
      : box_(box),
        c1_(c1),
        c2_(c2),
        cfg_(cfg),
        m1_(MediumOnBox::build(box, c1)),
        m2c_(MediumOnBox::build(box, c2.conjugated())),
        pair_(build_pair_on_o(box, m1_, c2)) {
    if (c1.conj_gamma || c2.conj_gamma) throw std::invalid_argument("LimitStudy: media must be unconjugated");
    if (std::abs(c1.omega - c2.omega) > 0.0 || std::abs(c1.k() - c2.k()) > 1e-14)
      throw std::invalid_argument("LimitStudy: media must share omega and background");
  }

  const PairOnO& pair() const { return pair_; }
  double omega() const { return c1_.omega; }
  double k() const { return c1_.k(); }

  Probe make_probe(const RVec3& xi) const {
    Probe p;
    p.xi = xi;
    p.g = make_phase_pair(xi, 1.0, k());
    p.inv1 = std::make_unique<FourierInverse>(box_, p.g.zhat);
    p.inv2 = std::make_unique<FourierInverse>(box_, p.g.zcheck);
    const Grid3& g = box_.grid;
    p.wphase.resize(pair_.ids.size());
    for (std::size_t q = 0; q < pair_.ids.size(); ++q)
      p.wphase[q] = pair_.w[q] * std::exp(I * xi.dot(g.point(pair_.ids[q])));
    return p;
  }

  // all four finite-tau terms at one tau
  std::array<cplx, 4> finite(const Probe& pr, double tau, const Amplitudes& am) const {
    const Grid3& g = box_.grid;
    PhaseGeometry ph = make_phase_pair(pr.xi, tau, k());
    CgoSolution s1 = build_cgo(m1_, *pr.inv1, ph.zeta1, tau, am.a1, am.b1, cfg_);
    CgoSolution s2 = build_cgo(m2c_, *pr.inv2, ph.zeta2, tau, am.a2, am.b2, cfg_);
    std::array<cplx, 4> t{0.0, 0.0, 0.0, 0.0};
    for (std::size_t q = 0; q < pair_.ids.size(); ++q) {
      std::size_t id = pair_.ids[q];
      const Mat8& U = pair_.pp[q].U;
      Vec8 uz0 = U * s1.Z0, uzm = U * s1.Zm1[id];
      Vec8 y02 = Y0_at(s2, m2c_, id);
      // Eigen's dot conjugates its left operand: a.dot(b) = a^* b
      t[0] += pr.wphase[q] * s2.Y1.dot(uz0);
      t[1] += pr.wphase[q] * y02.dot(uz0);
      t[2] += pr.wphase[q] * s2.Y1.dot(uzm);
      auto [i, j, kk] = g.unindex(id);
      std::size_t mid = g.index(i, j, g.mirror_k(kk));
      RVec3 x = g.point(id), xr = g.point(mid);
      Vec8 f2 = reflect_components(s2.Y1 + Y0_at(s2, m2c_, mid));
      cplx phase = std::exp(I * dot(ph.zeta1, to_c(x)) - I * dot(ph.zeta2.conjugate(), to_c(xr)));
      t[3] += pair_.w[q] * phase * f2.dot(uz0 + uzm);
    }
    return t;
  }

  cplx finite(TermKind kind, const Probe& pr, double tau, const Amplitudes& am) const {
    return finite(pr, tau, am)[int(kind)];
  }

  // closed-form limits; L44 is identically 0
  std::array<cplx, 4> limits(const Probe& pr, const Amplitudes& am) const {
    const CVec3 zh = pr.g.zhat, zc = pr.g.zcheck;
    const double om = omega(), kb = k();
    Vec8 M1 = make_Mhat(zh, am.a1, am.b1), M2 = make_Mhat(zc, am.a2, am.b2);
    Field8 R1 = transport_Rhat(m1_, *pr.inv1, M1);
    Field8 R2c = transport_Rhat(m2c_, *pr.inv2, M2);
    CVec3 a2b = am.a2.conjugate(), b2b = am.b2.conjugate();
    cplx sb2 = dot(zh, b2b), sa2 = dot(zh, a2b), sb1 = dot(zh, am.b1), sa1 = dot(zh, am.a1);
    CVec3 za1 = cross(zh, am.a1), zb1 = cross(zh, am.b1), za2 = cross(zh, a2b), zb2 = cross(zh, b2b);
    cplx l41 = 0.0, l42 = 0.0, l43 = 0.0;
    for (std::size_t q = 0; q < pair_.ids.size(); ++q) {
      std::size_t id = pair_.ids[q];
      const MediumPoint &p1 = pair_.p1[q], &p2 = pair_.p2[q];
      const PairPoint& pp = pair_.pp[q];
      cplx k1 = p1.kappa, k2 = p2.kappa, gt = pp.gamma_t, mt = pp.mu_t, u = pp.u, v = pp.v;
      CVec3 Du = -I * pp.grad_u, Dv = -I * pp.grad_v;
      CVec3 Du21 = -Du / (u * u), Dv21 = -Dv / (v * v);
      cplx A = k2 * gt + k1 * mt, B = k2 * mt + k1 * gt;
      Vec8 T1 = -(build_Q(p1, kb) * M1);
      Vec8 T2 = (build_Q(m2c_.at(id), kb) * M2).conjugate();
      Vec8 R2 = R2c[id].conjugate();
      CVec3 R1H = hpart(R1[id]), R1E = epart(R1[id]), R2H = hpart(R2), R2E = epart(R2);

      cplx f41 = kb * (sb2 * sb1 + sa2 * sa1) * (k1 + k2) * (mt + gt) - om * sb2 * sb1 * pair_.lap_v[q] -
                 om * sa2 * sa1 * pair_.lap_u[q] +
                 2.0 * kb * om * (-sb2 * dot(za1, Dv21) + sa2 * dot(zb1, Du21)) +
                 2.0 * kb * om * (-sb1 * dot(za2, Dv) + sa1 * dot(zb2, Du));

      cplx f42 = -k2 * (sa2 * sa1 * A + sb2 * sb1 * B) +
                 om * (sa2 * sa1 * dot(p2.Dalpha(), Du) + sb2 * sb1 * dot(p2.Dbeta(), Dv)) +
                 dot(zh, R2E) * sa1 * A + dot(zh, R2H) * sb1 * B +
                 2.0 * om * (sb1 * dot(cross(R2E, zh), Dv) - sa1 * dot(cross(R2H, zh), Du)) -
                 om * sb1 * T2(4) * (v - 1.0) - om * sa1 * T2(0) * (u - 1.0);

      cplx f43 = A * sb2 * dot(zh, R1H) + B * sa2 * dot(zh, R1E) +
                 2.0 * om * (sa2 * dot(cross(zh, R1H), Du21) - sb2 * dot(cross(zh, R1E), Dv21)) -
                 om * sb2 * T1(4) * (v - 1.0) - om * sa2 * T1(0) * (u - 1.0);

      l41 += pr.wphase[q] * f41;
      l42 += pr.wphase[q] * f42;
      l43 += pr.wphase[q] * f43;
    }
    return {l41, l42, l43, 0.0};
  }

  cplx limit(TermKind kind, const Probe& pr, const Amplitudes& am) const { return limits(pr, am)[int(kind)]; }

  std::array<LimitTermReport, 4> convergence_study(const Probe& pr, const Amplitudes& am,
                                                   const std::vector<double>& taus) const {
    if (taus.size() < 3) throw std::invalid_argument("convergence_study: need at least three tau values");
    std::array<LimitTermReport, 4> rep;
    std::array<cplx, 4> lim = limits(pr, am);
    for (int t = 0; t < 4; ++t) {
      rep[t].kind = TermKind(t);
      rep[t].xi = pr.xi;
      rep[t].taus = taus;
      rep[t].closed_form = lim[t];
    }
    for (double tau : taus) {
      std::array<cplx, 4> f = finite(pr, tau, am);
      for (int t = 0; t < 4; ++t) rep[t].finite.push_back(f[t]);
    }
    for (auto& r : rep) {
      r.extrap2 = richardson(taus, r.finite, 2);
      r.extrap3 = richardson(taus, r.finite, 3);
      std::vector<double> d;
      for (cplx f : r.finite) d.push_back(std::max(std::abs(f - r.closed_form), 1e-300));
      r.slope = loglog_slope(taus, d);
    }
    return rep;
  }

  // Fourier transform over O of a bracket: int_O e^{i xi.x} g dx
  cplx bracket_transform(const Probe& pr, bool alpha) const {
    cplx s = 0.0;
    for (std::size_t q = 0; q < pair_.ids.size(); ++q)
      s += pr.wphase[q] * (alpha ? bracket_alpha(pair_.p1[q], pair_.p2[q]) : bracket_beta(pair_.p1[q], pair_.p2[q]));
    return s;
  }

  // max |int_O e^{i xi.x}(zhat.D) f dx| for f in {u, v, 1/u, 1/v}; vanishes when the contrast is compact in O
  double minus_one_insertion(const Probe& pr) const {
    cplx s[4] = {0.0, 0.0, 0.0, 0.0};
    const CVec3& zh = pr.g.zhat;
    for (std::size_t q = 0; q < pair_.ids.size(); ++q) {
      const PairPoint& pp = pair_.pp[q];
      CVec3 Du = -I * pp.grad_u, Dv = -I * pp.grad_v;
      s[0] += pr.wphase[q] * dot(zh, Du);
      s[1] += pr.wphase[q] * dot(zh, Dv);
      s[2] += pr.wphase[q] * dot(zh, Du) / (-pp.u * pp.u);
      s[3] += pr.wphase[q] * dot(zh, Dv) / (-pp.v * pp.v);
    }
    double m = 0.0;
    for (cplx v : s) m = std::max(m, std::abs(v));
    return m;
  }

  // Surface integrals over dO discarded when integrating (zhat.D) and the Laplacian by parts.
  BoundaryTerms boundary_terms(const Probe& pr) const {
    const Grid3& g = box_.grid;
    const IndexBox& O = box_.O;
    const CVec3& zh = pr.g.zhat;
    cplx val[4][6] = {}, nrm[2][6] = {};
    for (std::size_t q = 0; q < pair_.ids.size(); ++q) {
      std::size_t id = pair_.ids[q];
      auto [i, j, k] = g.unindex(id);
      int idx[3] = {i, j, k};
      RVec3 x = g.point(id);
      cplx e = std::exp(I * pr.xi.dot(x));
      const PairPoint& pp = pair_.pp[q];
      cplx f[4] = {pp.u - 1.0, pp.v - 1.0, 1.0 / pp.u - 1.0, 1.0 / pp.v - 1.0};
      for (int a = 0; a < 3; ++a)
        for (int side = 0; side < 2; ++side) {
          if (idx[a] != (side ? O.hi[a] : O.lo[a])) continue;
          double w = g.h * g.h;
          for (int b = 0; b < 3; ++b)
            if (b != a && (idx[b] == O.lo[b] || idx[b] == O.hi[b])) w *= 0.5;
          double sgn = side ? 1.0 : -1.0;
          int face = 2 * a + side;
          for (int c = 0; c < 4; ++c) val[c][face] += w * e * sgn * zh(a) * f[c];
          nrm[0][face] += w * e * sgn * pp.grad_u(a);
          nrm[1][face] += w * e * sgn * pp.grad_v(a);
        }
    }
    BoundaryTerms r;
    for (int c = 0; c < 4; ++c) {
      cplx s = 0.0;
      for (int f = 0; f < 6; ++f) s += val[c][f];
      r.value = std::max(r.value, std::abs(s));
    }
    for (int c = 0; c < 2; ++c) {
      cplx s = 0.0;
      for (int f = 0; f < 6; ++f) s += nrm[c][f];
      r.normal = std::max(r.normal, std::abs(s));
    }
    return r;
  }

  const MediumOnBox& medium1() const { return m1_; }
  const MediumOnBox& medium2_conj() const { return m2c_; }

 private:
  const SpectralBox& box_;
  CoefficientSet c1_, c2_;
  CgoConfig cfg_;
  MediumOnBox m1_, m2c_;
  PairOnO pair_;
};

// R2^ = conj of the transport solution of the conjugated system (zcheck, a2, b2, conj gamma2); checks
// zhat.R2^E = (zhat.conj a2)(kappa2 - k) and zhat.R2^H = (zhat.conj b2)(kappa2 - k) on O.
inline TransportIdentityGap conjugated_transport_gap(const MediumOnBox& m2c, const FourierInverse& inv2,
                                                     const CVec3& zhat, const CVec3& a2, const CVec3& b2) {
  if (!m2c.coeffs.conj_gamma) throw std::invalid_argument("conjugated_transport_gap: medium must carry conj(gamma2)");
  Field8 R2c = transport_Rhat(m2c, inv2, make_Mhat(inv2.zhat(), a2, b2));
  TransportIdentityGap r;
  double k = m2c.coeffs.k();
  cplx za = dot(zhat, a2.conjugate()), zb = dot(zhat, b2.conjugate());
  for (std::size_t id : m2c.box->o_nodes()) {
    Vec8 R2 = R2c[id].conjugate();
    cplx dk = std::conj(m2c.at(id).kappa) - k;
    r.e_gap = std::max(r.e_gap, std::abs(dot(zhat, epart(R2)) - za * dk));
    r.h_gap = std::max(r.h_gap, std::abs(dot(zhat, hpart(R2)) - zb * dk));
    r.scale = std::max({r.scale, std::abs(za * dk), std::abs(zb * dk)});
  }
  return r;
}

}  // namespace mxip
