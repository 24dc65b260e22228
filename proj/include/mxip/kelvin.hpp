#pragma once

#include <array>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "forward.hpp"
#include "media.hpp"
#include "scenario.hpp"

namespace mxip {

struct DomainContainsOrigin : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GeometryViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// F(x) = x/|x|^2 with J(i,a) = dF_i/dx_a and H[i](a,b) = d2F_i/dx_a dx_b.
struct MapJet {
  RVec3 y;
  RMat3 J;
  std::array<RMat3, 3> H;
};

inline RVec3 kelvin_map(const RVec3& x) {
  double r2 = x.squaredNorm();
  if (!(r2 > 0.0)) throw DomainContainsOrigin("Kelvin map evaluated at the origin");
  return x / r2;
}

inline RMat3 kelvin_jacobian(const RVec3& x) {
  double r2 = x.squaredNorm();
  if (!(r2 > 0.0)) throw DomainContainsOrigin("Kelvin map evaluated at the origin");
  return RMat3::Identity() / r2 - 2.0 * x * x.transpose() / (r2 * r2);
}

inline MapJet kelvin_jet(const RVec3& x) {
  MapJet m;
  m.y = kelvin_map(x);
  m.J = kelvin_jacobian(x);
  double r2 = x.squaredNorm(), r4 = r2 * r2, r6 = r4 * r2;
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        m.H[i](a, b) = -2.0 * ((i == a) * x(b) + (i == b) * x(a) + (a == b) * x(i)) / r4 + 8.0 * x(i) * x(a) * x(b) / r6;
  return m;
}

// x -> R x + c
struct RigidMotion {
  RMat3 R = RMat3::Identity();
  RVec3 c = RVec3::Zero();
  RVec3 operator()(const RVec3& x) const { return R * x + c; }
};

// T(x~) = (x~1 + s, s - x~2, 1 - x~3): proper rigid motion taking {x~3 > 1} to {y3 < 0} and {x~3 = 1} to {y3 = 0}.
// T(0) = (s, s, 1) is where the planar coefficients see the point at infinity; s keeps it off the computational boxes.
inline constexpr double kPlaneShift = 2.5;

inline RigidMotion plane_frame(double shift = kPlaneShift) {
  RigidMotion t;
  t.R = RVec3(1.0, -1.0, -1.0).asDiagonal();
  t.c = RVec3(shift, shift, 1.0);
  return t;
}

inline RigidMotion plane_frame_inverse(double shift = kPlaneShift) {
  RigidMotion t = plane_frame(shift);
  t.c = RVec3(-shift, shift, 1.0);
  return t;
}

// Reflection R across {x~3 = 1}.
inline RVec3 reflect_plane(const RVec3& x) { return RVec3(x(0), x(1), 2.0 - x(2)); }

// ---- differential forms in components ----
// 1-forms: (a1, a2, a3) on dx^i. 2-forms: (b23, b31, b12). 0- and 3-forms: scalars.

struct OneForm {
  CVec3 c = CVec3::Zero();
};
struct TwoForm {
  CVec3 c = CVec3::Zero();
};

inline OneForm one_form_of(const CVec3& v) { return OneForm{v}; }
inline CVec3 vector_of(const OneForm& a) { return a.c; }
// flux 2-form *_e v of a vector field and back
inline TwoForm flux_form_of(const CVec3& v) { return TwoForm{v}; }
inline CVec3 vector_of(const TwoForm& b) { return b.c; }

inline Mat3 antisym(const CVec3& b) {
  Mat3 m = Mat3::Zero();
  m(1, 2) = b(0);
  m(2, 1) = -b(0);
  m(2, 0) = b(1);
  m(0, 2) = -b(1);
  m(0, 1) = b(2);
  m(1, 0) = -b(2);
  return m;
}
inline CVec3 axial(const Mat3& m) { return CVec3(m(1, 2), m(2, 0), m(0, 1)); }

inline cplx wedge(const OneForm& a, const TwoForm& b) { return dot(a.c, b.c); }
inline TwoForm wedge(const OneForm& a, const OneForm& b) { return TwoForm{cross(a.c, b.c)}; }

// Pullbacks at a point through a map with Jacobian J.
inline cplx pullback0(cplx f) { return f; }
inline OneForm pullback1(const OneForm& a, const RMat3& J) { return OneForm{J.transpose().cast<cplx>() * a.c}; }
inline TwoForm pullback2(const TwoForm& b, const RMat3& J) {
  Mat3 Jc = J.cast<cplx>();
  return TwoForm{axial(Jc.transpose() * antisym(b.c) * Jc)};
}
inline cplx pullback3(cplx f, const RMat3& J) { return J.determinant() * f; }

// Hodge star of a k-form for the metric G, from raised indices and the Levi-Civita symbol.
inline CVec3 hodge_star(int k, const CVec3& comps, const RMat3& G) {
  double sg = std::sqrt(G.determinant());
  Mat3 Gi = G.inverse().cast<cplx>();
  switch (k) {
    case 0:
      return CVec3(sg * comps(0), 0.0, 0.0);
    case 1: {
      CVec3 up = Gi * comps;
      return sg * up;
    }
    case 2: {
      Mat3 up = Gi * antisym(comps) * Gi.transpose();
      return sg * axial(up);
    }
    case 3:
      return CVec3(sg * Gi.determinant() * comps(0), 0.0, 0.0);
  }
  throw std::invalid_argument("hodge_star: degree must be 0..3");
}

inline RMat3 pulled_back_metric(const RMat3& J) { return J.transpose() * J; }

// +1 for orientation-preserving maps, -1 for reversing ones (the Kelvin map).
inline double orientation_of(const RMat3& J) { return J.determinant() > 0.0 ? 1.0 : -1.0; }
inline constexpr double kKelvinOrientation = -1.0;

// ---- Maxwell in forms: dE = i omega mu *H, dH = -i omega gamma *E ----

struct FieldJet {
  CVec3 v = CVec3::Zero();
  Mat3 D = Mat3::Zero();  // D(j, l) = d_l v_j
  TwoForm d() const { return TwoForm{CVec3(D(2, 1) - D(1, 2), D(0, 2) - D(2, 0), D(1, 0) - D(0, 1))}; }
};

struct MaxwellForms {
  std::function<FieldJet(const RVec3&)> E, H;
  std::function<cplx(const RVec3&)> gamma, mu;
  double omega = 1.0;
};

inline MaxwellForms plane_wave_forms(const PlaneWave& w, cplx gamma) {
  MaxwellForms f;
  f.omega = w.omega;
  CVec3 q = w.q, hp = cross(w.q, w.p) / (w.omega * w.mu);
  auto jet = [q](const CVec3& amp) {
    return [q, amp](const RVec3& x) {
      FieldJet j;
      cplx ph = std::exp(I * dot(q, to_c(x)));
      j.v = amp * ph;
      j.D = I * j.v * q.transpose();
      return j;
    };
  };
  f.E = jet(w.p);
  f.H = jet(hp);
  double mu = w.mu;
  f.gamma = [gamma](const RVec3&) { return gamma; };
  f.mu = [mu](const RVec3&) { return cplx(mu); };
  return f;
}

inline MaxwellForms zero_forms(double omega = 1.0) {
  MaxwellForms f;
  f.omega = omega;
  f.E = f.H = [](const RVec3&) { return FieldJet{}; };
  f.gamma = f.mu = [](const RVec3&) { return cplx(1.0); };
  return f;
}

// Pullback of a 1-form jet by F, with derivatives from the exact Jacobian and Hessian of F.
inline FieldJet pullback_jet(const FieldJet& e, const MapJet& m) {
  FieldJet r;
  r.v = m.J.transpose().cast<cplx>() * e.v;
  Mat3 Jc = m.J.cast<cplx>();
  r.D = Jc.transpose() * e.D * Jc;
  for (int j = 0; j < 3; ++j) r.D += e.v(j) * m.H[j].cast<cplx>();
  return r;
}

// (E, H, gamma, mu) on F(U) -> (F*E, s F*H, gamma(F)|x~|^-2, mu(F)|x~|^-2) on U; s = -1 is the orientation sign.
inline MaxwellForms kelvin_transform(const MaxwellForms& f, double sign = kKelvinOrientation) {
  MaxwellForms t;
  t.omega = f.omega;
  auto E = f.E, H = f.H;
  auto g = f.gamma, mu = f.mu;
  t.E = [E](const RVec3& x) {
    MapJet m = kelvin_jet(x);
    return pullback_jet(E(m.y), m);
  };
  t.H = [H, sign](const RVec3& x) {
    MapJet m = kelvin_jet(x);
    FieldJet j = pullback_jet(H(m.y), m);
    j.v *= sign;
    j.D *= sign;
    return j;
  };
  t.gamma = [g](const RVec3& x) { return g(kelvin_map(x)) / x.squaredNorm(); };
  t.mu = [mu](const RVec3& x) { return mu(kelvin_map(x)) / x.squaredNorm(); };
  return t;
}

struct MaxwellResidual {
  double faraday = 0.0, ampere = 0.0, scale = 0.0;
  double relative() const { return std::max(faraday, ampere) / std::max(scale, 1e-300); }
};

// Pointwise residual with exact derivatives.
inline MaxwellResidual pointwise_residual(const MaxwellForms& f, const RVec3& x) {
  FieldJet e = f.E(x), h = f.H(x);
  cplx g = f.gamma(x), mu = f.mu(x);
  CVec3 a = e.d().c - I * f.omega * mu * h.v, b = h.d().c + I * f.omega * g * e.v;
  MaxwellResidual r;
  r.faraday = a.norm();
  r.ampere = b.norm();
  r.scale = std::max(std::abs(f.omega * mu) * h.v.norm(), std::abs(f.omega * g) * e.v.norm());
  return r;
}

// Sup residual on the interior nodes of a box with second-order central differences of the sampled fields.
inline MaxwellResidual fd_residual(const MaxwellForms& f, const RVec3& lo, const RVec3& hi, double h) {
  Grid3 g = Grid3::box(lo, hi, h);
  std::vector<CVec3> E(g.size()), H(g.size());
  for (std::size_t id = 0; id < g.size(); ++id) {
    RVec3 x = g.point(id);
    E[id] = f.E(x).v;
    H[id] = f.H(x).v;
  }
  auto curl = [&](const std::vector<CVec3>& F, int i, int j, int k) {
    const int idx[3] = {i, j, k};
    Mat3 D;
    for (int l = 0; l < 3; ++l) {
      int p[3] = {idx[0], idx[1], idx[2]}, m[3] = {idx[0], idx[1], idx[2]};
      ++p[l];
      --m[l];
      D.col(l) = (F[g.index(p[0], p[1], p[2])] - F[g.index(m[0], m[1], m[2])]) / (2.0 * h);
    }
    FieldJet fj;
    fj.D = D;
    return fj.d().c;
  };
  MaxwellResidual r;
  for (int i = 1; i < g.n[0] - 1; ++i)
    for (int j = 1; j < g.n[1] - 1; ++j)
      for (int k = 1; k < g.n[2] - 1; ++k) {
        std::size_t id = g.index(i, j, k);
        RVec3 x = g.point(id);
        cplx ga = f.gamma(x), mu = f.mu(x);
        r.faraday = std::max(r.faraday, (curl(E, i, j, k) - I * f.omega * mu * H[id]).norm());
        r.ampere = std::max(r.ampere, (curl(H, i, j, k) + I * f.omega * ga * E[id]).norm());
        r.scale = std::max({r.scale, std::abs(f.omega * mu) * H[id].norm(), std::abs(f.omega * ga) * E[id].norm()});
      }
  return r;
}

struct TransformStudy {
  std::vector<double> h, residual;
  double pointwise = 0.0;
  double order() const {
    std::size_t n = h.size();
    return std::log(residual[n - 2] / residual[n - 1]) / std::log(h[n - 2] / h[n - 1]);
  }
};

// Residual of the transformed system on a box U under refinement; the source fields live on F(U).
inline TransformStudy transformed_residual_study(const MaxwellForms& src, const RVec3& lo, const RVec3& hi,
                                                 const std::vector<double>& hs, double sign = kKelvinOrientation) {
  bool straddles = true;
  for (int a = 0; a < 3; ++a)
    if (lo(a) > 0.0 || hi(a) < 0.0) straddles = false;
  if (straddles) throw DomainContainsOrigin("transform box contains the origin");
  MaxwellForms t = kelvin_transform(src, sign);
  TransformStudy s;
  for (double h : hs) {
    s.h.push_back(h);
    s.residual.push_back(fd_residual(t, lo, hi, h).relative());
  }
  Grid3 g = Grid3::box(lo, hi, hs.front());
  for (std::size_t id = 0; id < g.size(); ++id) s.pointwise = std::max(s.pointwise, pointwise_residual(t, g.point(id)).relative());
  return s;
}

// ---- geometry ----

struct KelvinContext {
  RVec3 x0 = RVec3(0.0, 0.0, 0.5);
  double radius = 0.5;
  std::function<double(const RVec3&)> rho;  // Omega = {rho > 0}

  static KelvinContext make(std::function<double(const RVec3&)> rho) {
    KelvinContext k;
    k.rho = std::move(rho);
    if (!(k.rho(RVec3::Zero()) < 0.0)) throw DomainContainsOrigin("origin lies in the closure of the domain");
    return k;
  }

  bool in_omega(const RVec3& x) const { return rho(x) > 0.0; }
  bool in_ball(const RVec3& x) const { return (x - x0).norm() < radius; }
  double rho_tilde(const RVec3& xt) const { return rho(kelvin_map(xt)); }

  // outward unit normal -grad rho/|grad rho| with 4th-order differences
  static RVec3 normal_of(const std::function<double(const RVec3&)>& f, const RVec3& x, double d = 1e-3) {
    RVec3 g;
    for (int a = 0; a < 3; ++a) {
      RVec3 e = d * RVec3::Unit(a);
      g(a) = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * d);
    }
    return -g.normalized();
  }
  RVec3 normal(const RVec3& x) const { return normal_of(rho, x); }
  RVec3 normal_tilde(const RVec3& xt) const {
    return normal_of([this](const RVec3& y) { return rho_tilde(y); }, xt);
  }
  // nu~ = |x~|^2 F* nu
  static RVec3 transported_normal(const RVec3& xt, const RVec3& nu) {
    return xt.squaredNorm() * kelvin_jacobian(xt).transpose() * nu;
  }
};

// sup over points of |F*e - |x~|^-4 e| relative to |x~|^-4
inline double conformality_gap(const std::vector<RVec3>& pts) {
  double worst = 0.0;
  for (const RVec3& x : pts) {
    double s = 1.0 / (x.squaredNorm() * x.squaredNorm());
    worst = std::max(worst, (pulled_back_metric(kelvin_jacobian(x)) - s * RMat3::Identity()).cwiseAbs().maxCoeff() / s);
  }
  return worst;
}

inline double involution_gap(const std::vector<RVec3>& pts) {
  double worst = 0.0;
  for (const RVec3& x : pts) worst = std::max(worst, (kelvin_map(kelvin_map(x)) - x).norm() / x.norm());
  return worst;
}

// Samples of dB(x0, 1/2) at distance at least min_dist from the origin. F amplifies the rounding of a sample
// by |x|^-2, so sets meant to resemble an inaccessible part keep a margin from the origin.
inline std::vector<RVec3> sphere_samples(int n, std::uint64_t seed, double min_dist = 0.05) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> nd;
  std::vector<RVec3> pts;
  while (int(pts.size()) < n) {
    RVec3 u(nd(g), nd(g), nd(g));
    u.normalize();
    RVec3 x = RVec3(0, 0, 0.5) + 0.5 * u;
    if (x.norm() < min_dist) continue;
    pts.push_back(x);
  }
  return pts;
}

// sup distance of F(samples) from {x~3 = 1}
inline double sphere_plane_gap(const std::vector<RVec3>& pts) {
  double worst = 0.0;
  for (const RVec3& x : pts) worst = std::max(worst, std::abs(kelvin_map(x)(2) - 1.0));
  return worst;
}

// ---- impedance maps sampled pointwise on the boundary ----

// Tangential 1-forms per boundary point stacked as 3-vectors; M maps *(nu ^ H) data to *(nu ^ E).
struct BoundaryImpedance {
  std::vector<RVec3> x, nu;
  std::vector<bool> in_gamma;
  Eigen::MatrixXcd M;

  std::size_t points() const { return x.size(); }
  std::vector<int> gamma_dofs() const {
    std::vector<int> d;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (in_gamma[i])
        for (int a = 0; a < 3; ++a) d.push_back(int(3 * i + a));
    return d;
  }
  Eigen::MatrixXcd restricted() const { return M(gamma_dofs(), gamma_dofs()); }
};

inline Eigen::MatrixXd blockdiag_jacobians(const std::vector<RVec3>& pts, bool transpose) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(3 * Eigen::Index(pts.size()), 3 * Eigen::Index(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    RMat3 J = kelvin_jacobian(pts[i]);
    P.block<3, 3>(3 * i, 3 * i) = transpose ? RMat3(J.transpose()) : J;
  }
  return P;
}

// L~(T~) = s F* L((F^-1)* T~) at x~_i = F(x_i), nu~ = |x~|^2 F* nu; s = -1 is the orientation sign.
inline BoundaryImpedance transform_impedance(const BoundaryImpedance& L, double sign = kKelvinOrientation,
                                             double tol = 1e-10) {
  if (L.M.rows() != 3 * Eigen::Index(L.points()) || L.M.cols() != L.M.rows())
    throw std::invalid_argument("transform_impedance: matrix does not match the boundary samples");
  BoundaryImpedance t;
  t.in_gamma = L.in_gamma;
  for (std::size_t i = 0; i < L.points(); ++i) {
    if (std::abs(L.nu[i].norm() - 1.0) > tol) throw GeometryViolation("transform_impedance: normal is not unit");
    RVec3 xt = kelvin_map(L.x[i]);
    RVec3 nt = KelvinContext::transported_normal(xt, L.nu[i]);
    if (std::abs(nt.norm() - 1.0) > tol) throw GeometryViolation("transform_impedance: transported normal is not unit");
    t.x.push_back(xt);
    t.nu.push_back(nt);
  }
  Eigen::MatrixXd P = blockdiag_jacobians(t.x, true), Pinv = blockdiag_jacobians(L.x, true);
  t.M = sign * (P.cast<cplx>() * L.M * Pinv.cast<cplx>());
  return t;
}

// sup |nu . T| over points of stacked tangential data, relative to |T|
inline double tangentiality_gap(const std::vector<RVec3>& nu, const Eigen::VectorXcd& T) {
  double worst = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    CVec3 t = T.segment<3>(3 * Eigen::Index(i));
    if (t.norm() == 0.0) continue;
    worst = std::max(worst, std::abs(dot(to_c(nu[i]), t)) / t.norm());
  }
  return worst;
}

// Least-squares map reproducing the traces of a family of solutions: columns of T -> columns of S.
inline Eigen::MatrixXcd map_from_traces(const Eigen::MatrixXcd& T, const Eigen::MatrixXcd& S) {
  return S * T.completeOrthogonalDecomposition().pseudoInverse();
}

// Stacked *(nu ^ H) and *(nu ^ E) of a solution at boundary samples.
inline std::pair<Eigen::VectorXcd, Eigen::VectorXcd> boundary_traces(const MaxwellForms& f,
                                                                     const std::vector<RVec3>& x,
                                                                     const std::vector<RVec3>& nu) {
  Eigen::VectorXcd t(3 * Eigen::Index(x.size())), s(3 * Eigen::Index(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    CVec3 n = to_c(nu[i]);
    t.segment<3>(3 * i) = cross(n, f.H(x[i]).v);
    s.segment<3>(3 * i) = cross(n, f.E(x[i]).v);
  }
  return {t, s};
}

// ---- spherical scenarios and their planar reduction ----

// x -> inner(post(F(pre(x)))) |pre(x)|^-2
struct KelvinPulledSource : ScalarSource {
  std::shared_ptr<const ScalarSource> inner;
  RigidMotion pre, post;
  double bg;

  KelvinPulledSource(std::shared_ptr<const ScalarSource> s, RigidMotion pre_, RigidMotion post_)
      : inner(std::move(s)), pre(pre_), post(post_), bg(inner->background()) {}

  RealJet jet(const RVec3& x) const override {
    RVec3 z = pre(x);
    MapJet k = kelvin_jet(z);
    RMat3 J = post.R * k.J * pre.R;
    std::array<RMat3, 3> Hm;
    for (int i = 0; i < 3; ++i) {
      RMat3 Hz = RMat3::Zero();
      for (int j = 0; j < 3; ++j) Hz += post.R(i, j) * k.H[j];
      Hm[i] = pre.R.transpose() * Hz * pre.R;
    }
    RealJet f = inner->jet(post(k.y));
    RealJet c;
    c.v = f.v;
    c.g = J.transpose() * f.g;
    c.H = J.transpose() * f.H * J;
    for (int i = 0; i < 3; ++i) c.H += f.g(i) * Hm[i];
    double r2 = z.squaredNorm();
    double w = 1.0 / r2;
    RVec3 wg = pre.R.transpose() * (-2.0 * z / (r2 * r2));
    RMat3 wH = pre.R.transpose() * (-2.0 * RMat3::Identity() / (r2 * r2) + 8.0 * z * z.transpose() / (r2 * r2 * r2)) * pre.R;
    RealJet r;
    r.v = c.v * w;
    r.g = c.g * w + c.v * wg;
    r.H = c.H * w + c.g * wg.transpose() + wg * c.g.transpose() + c.v * wH;
    return r;
  }
  double value(const RVec3& x) const override {
    RVec3 z = pre(x);
    return inner->value(post(kelvin_map(z))) / z.squaredNorm();
  }
  double background() const override { return bg; }
};

inline CoefficientSet kelvin_pulled(const CoefficientSet& c, const RigidMotion& pre, const RigidMotion& post) {
  auto wrap = [&](const std::shared_ptr<const ScalarSource>& s) {
    return std::make_shared<KelvinPulledSource>(s, pre, post);
  };
  CoefficientSet r = build_coefficients(wrap(c.eps), wrap(c.sigma), wrap(c.mu), c.omega, c.eps0, c.mu0);
  r.conj_gamma = c.conj_gamma;
  return r;
}

// Domain inside B0 touching dB0 on Gamma0, with physical coefficients on R^3 (origin excluded).
struct SphericalScenario {
  Scenario media;
  std::function<double(const RVec3&)> rho;
  RVec3 olo, ohi;  // planar box claimed to equal T(F^-1(Omega))
};

// rho of Omega = F(T^-1(box)), positive inside
inline std::function<double(const RVec3&)> kelvin_box_rho(const RVec3& lo, const RVec3& hi) {
  RigidMotion T = plane_frame();
  return [T, lo, hi](const RVec3& x) {
    if (x.squaredNorm() == 0.0) return -std::numeric_limits<double>::infinity();
    RVec3 y = T(kelvin_map(x));
    double r = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) r = std::min({r, y(a) - lo(a), hi(a) - y(a)});
    return r;
  };
}

// Spherical scenario whose reduction is the given even planar scenario: mu(x) = p(T(F(x))) |F(x)|^2.
inline SphericalScenario spherical_from_planar(const Scenario& planar, const RVec3& olo, const RVec3& ohi) {
  SphericalScenario s;
  RigidMotion id, T = plane_frame();
  s.media.c1 = kelvin_pulled(planar.c1, id, T);
  s.media.c2 = kelvin_pulled(planar.c2, id, T);
  s.rho = kelvin_box_rho(olo, ohi);
  s.olo = olo;
  s.ohi = ohi;
  return s;
}

struct PlanarReduction {
  Scenario media;
  RVec3 olo, ohi;
  double plane_gap = 0.0;     // distance of mapped Gamma0 samples from {y3 = 0}
  double evenness_gap = 0.0;  // sup relative |c(y) - c(y1, y2, -y3)|
  int boundary_samples = 0;
};

// Transformed coefficients mu(F(T^-1 y)) |T^-1 y|^-2 on the planar side, with geometry and evenness checks.
inline PlanarReduction sphere_scenario_reduce(const SphericalScenario& s, int samples = 2000, std::uint64_t seed = 5,
                                              double tol = 1e-10) {
  const RVec3 x0(0, 0, 0.5);
  auto on_sphere = sphere_samples(samples, seed);
  bool all_boundary = true;
  for (const RVec3& x : on_sphere)
    if (std::abs(s.rho(x)) > tol) all_boundary = false;
  if (all_boundary) throw GeometryViolation("inaccessible part is the whole sphere");
  if (!(s.rho(RVec3::Zero()) < 0.0)) throw GeometryViolation("origin lies in the closure of the domain");

  RigidMotion Tinv = plane_frame_inverse();
  PlanarReduction r;
  r.olo = s.olo;
  r.ohi = s.ohi;
  if (std::abs(s.ohi(2)) > 1e-14) throw GeometryViolation("planar box must end at y3 = 0");

  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RVec3 L = s.ohi - s.olo;
  for (int n = 0; n < samples; ++n) {
    RVec3 y = s.olo + RVec3(u(g), u(g), u(g)).cwiseProduct(L);
    RVec3 x = kelvin_map(Tinv(y));
    if (!(s.rho(x) > 0.0) || !((x - x0).norm() < 0.5))
      throw GeometryViolation("planar box does not correspond to a domain inside the ball");
    RVec3 yo = y;
    yo(n % 3) = (n % 2) ? s.ohi(n % 3) + 0.05 * L(n % 3) : s.olo(n % 3) - 0.05 * L(n % 3);
    if (s.rho(kelvin_map(Tinv(yo))) > 0.0) throw GeometryViolation("domain extends beyond the planar box");
    RVec3 yt = y;
    yt(2) = 0.0;
    RVec3 xt = kelvin_map(Tinv(yt));
    r.plane_gap = std::max(r.plane_gap, std::abs((xt - x0).norm() - 0.5));
    ++r.boundary_samples;
  }

  r.media.c1 = kelvin_pulled(s.media.c1, Tinv, RigidMotion{});
  r.media.c2 = kelvin_pulled(s.media.c2, Tinv, RigidMotion{});
  for (int n = 0; n < samples; ++n) {
    RVec3 y = s.olo + RVec3(u(g), u(g), u(g)).cwiseProduct(L);
    RVec3 ym(y(0), y(1), -y(2));
    for (const CoefficientSet* c : {&r.media.c1, &r.media.c2}) {
      cplx a = c->gamma_value(y), b = c->gamma_value(ym);
      double m = c->mu_value(y), mm = c->mu_value(ym);
      r.evenness_gap = std::max({r.evenness_gap, std::abs(a - b) / std::abs(a), std::abs(m - mm) / std::abs(m)});
    }
  }
  if (r.evenness_gap > tol) throw ReflectionIncompatible("reduced coefficients are not even across the plane");
  return r;
}

}  // namespace mxip
