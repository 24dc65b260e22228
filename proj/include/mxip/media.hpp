#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "algebra8.hpp"
#include "grid.hpp"

namespace mxip {

struct PositivityViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SupportNotCompact : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ReflectionIncompatible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using RMat3 = Eigen::Matrix3d;

struct RealJet {
  double v = 0.0;
  RVec3 g = RVec3::Zero();
  RMat3 H = RMat3::Zero();
};

struct CJet {
  cplx v = 0.0;
  CVec3 g = CVec3::Zero();
  Mat3 H = Mat3::Zero();
  cplx lap() const { return H.trace(); }
};

inline CJet log_jet(const CJet& f) {
  CJet r;
  r.v = std::log(f.v);
  r.g = f.g / f.v;
  r.H = f.H / f.v - r.g * r.g.transpose();
  return r;
}

// Real scalar field with value, gradient and Hessian.
struct ScalarSource {
  virtual ~ScalarSource() = default;
  virtual RealJet jet(const RVec3& x) const = 0;
  virtual double value(const RVec3& x) const { return jet(x).v; }
  virtual double background() const = 0;
};

struct Bump {
  double amp;
  RVec3 centre;
};

// base + sum amp*exp(-|x-c|^2/w^2), optionally with mirror images c3 -> -c3
struct GaussianProfile : ScalarSource {
  double base = 0.0;
  double width = 0.09;
  std::vector<Bump> bumps;
  bool mirror = false;

  GaussianProfile(double base_, std::vector<Bump> b, double w = 0.09, bool mirror_ = false)
      : base(base_), width(w), bumps(std::move(b)), mirror(mirror_) {}

  RealJet jet(const RVec3& x) const override {
    RealJet r;
    r.v = base;
    double w2 = width * width;
    auto add = [&](double amp, const RVec3& c) {
      RVec3 d = x - c;
      double e = amp * std::exp(-d.squaredNorm() / w2);
      r.v += e;
      r.g += -2.0 / w2 * e * d;
      r.H += e * (4.0 / (w2 * w2) * d * d.transpose() - 2.0 / w2 * RMat3::Identity());
    };
    for (const auto& b : bumps) {
      add(b.amp, b.centre);
      if (mirror) add(b.amp, RVec3(b.centre(0), b.centre(1), -b.centre(2)));
    }
    return r;
  }
  double background() const override { return base; }
};

// Value-only closed-form field.
struct FunctionProfile : ScalarSource {
  std::function<double(const RVec3&)> f;
  double bg;
  FunctionProfile(std::function<double(const RVec3&)> f_, double bg_) : f(std::move(f_)), bg(bg_) {}
  RealJet jet(const RVec3&) const override {
    throw std::logic_error("FunctionProfile: derivatives unavailable, sample it first");
  }
  double value(const RVec3& x) const override { return f(x); }
  double background() const override { return bg; }
};

// Grid samples with 4th-order central differences; background outside the grid.
struct SampledProfile : ScalarSource {
  Grid3 grid;
  std::vector<double> v;
  double bg = 0.0;

  SampledProfile(Grid3 g, std::vector<double> vals, double bg_) : grid(g), v(std::move(vals)), bg(bg_) {}

  static SampledProfile sample(const Grid3& g, const ScalarSource& s) {
    std::vector<double> vals(g.size());
    for (std::size_t id = 0; id < g.size(); ++id) vals[id] = s.value(g.point(id));
    return SampledProfile(g, std::move(vals), s.background());
  }

  RealJet jet(const RVec3& x) const override {
    int i = grid.node_of(0, x(0)), j = grid.node_of(1, x(1)), k = grid.node_of(2, x(2));
    RealJet r;
    if (i < 0 || j < 0 || k < 0) {
      bool inside = true;
      for (int a = 0; a < 3; ++a)
        if (x(a) >= grid.origin(a) - 1e-12 && x(a) <= grid.upper()(a) + 1e-12) continue;
        else inside = false;
      if (inside) throw std::invalid_argument("SampledProfile: evaluation point is not a grid node");
      r.v = bg;
      return r;
    }
    Stencil<double> st{grid, v, 4};
    r.v = v[grid.index(i, j, k)];
    if (!st.interior(i, j, k)) {
      if (std::abs(r.v - bg) > 1e-12) throw SupportNotCompact("SampledProfile: contrast reaches grid edge");
      return r;
    }
    for (int a = 0; a < 3; ++a) {
      r.g(a) = st.d1(i, j, k, a);
      r.H(a, a) = st.d2(i, j, k, a);
      for (int b = a + 1; b < 3; ++b) r.H(a, b) = r.H(b, a) = st.dmix(i, j, k, a, b);
    }
    return r;
  }
  double value(const RVec3& x) const override {
    int i = grid.node_of(0, x(0)), j = grid.node_of(1, x(1)), k = grid.node_of(2, x(2));
    if (i < 0 || j < 0 || k < 0) return jet(x).v;
    return v[grid.index(i, j, k)];
  }
  double background() const override { return bg; }
};

// f(x1,x2,-|x3|): even extension of the x3 <= 0 side.
struct EvenExtension : ScalarSource {
  std::shared_ptr<const ScalarSource> inner;
  explicit EvenExtension(std::shared_ptr<const ScalarSource> s) : inner(std::move(s)) {}
  RealJet jet(const RVec3& x) const override {
    if (x(2) <= 0.0) return inner->jet(x);
    RealJet r = inner->jet(RVec3(x(0), x(1), -x(2)));
    r.g(2) = -r.g(2);
    r.H(0, 2) = r.H(2, 0) = -r.H(0, 2);
    r.H(1, 2) = r.H(2, 1) = -r.H(1, 2);
    return r;
  }
  double value(const RVec3& x) const override { return inner->value(RVec3(x(0), x(1), -std::abs(x(2)))); }
  double background() const override { return inner->background(); }
};

// Log-derivative data of one medium at one point.
struct MediumPoint {
  cplx gamma, mu, kappa;
  CJet alpha, beta;
  CVec3 Dalpha() const { return -I * alpha.g; }
  CVec3 Dbeta() const { return -I * beta.g; }
  CVec3 Dkappa() const { return -I * kappa * 0.5 * (alpha.g + beta.g); }
};

struct CoefficientSet {
  double omega = 1.0, eps0 = 1.0, mu0 = 1.0;
  std::shared_ptr<const ScalarSource> eps, sigma, mu;
  bool conj_gamma = false;

  double k() const { return omega * std::sqrt(eps0 * mu0); }

  CoefficientSet conjugated() const {
    CoefficientSet c = *this;
    c.conj_gamma = !c.conj_gamma;
    return c;
  }

  cplx gamma_value(const RVec3& x) const {
    cplx g(eps->value(x), sigma->value(x) / omega);
    return conj_gamma ? std::conj(g) : g;
  }
  double mu_value(const RVec3& x) const { return mu->value(x); }

  MediumPoint point(const RVec3& x) const {
    RealJet e = eps->jet(x), s = sigma->jet(x), m = mu->jet(x);
    if (!(e.v > 0.0) || !(m.v > 0.0) || s.v < 0.0) throw PositivityViolation("coefficient positivity fails");
    double sg = conj_gamma ? -1.0 : 1.0;
    CJet g;
    g.v = cplx(e.v, sg * s.v / omega);
    g.g = e.g.cast<cplx>() + I * sg / omega * s.g.cast<cplx>();
    g.H = e.H.cast<cplx>() + I * sg / omega * s.H.cast<cplx>();
    CJet mj;
    mj.v = m.v;
    mj.g = m.g.cast<cplx>();
    mj.H = m.H.cast<cplx>();
    MediumPoint p;
    p.gamma = g.v;
    p.mu = mj.v;
    p.alpha = log_jet(g);
    p.beta = log_jet(mj);
    p.kappa = omega * std::exp(0.5 * (p.alpha.v + p.beta.v));
    return p;
  }
};

inline std::shared_ptr<const ScalarSource> constant_source(double c) {
  return std::make_shared<GaussianProfile>(c, std::vector<Bump>{});
}

// Positivity everywhere on g; contrast below tol on the two outer node layers.
inline void validate_coefficients(const CoefficientSet& c, const Grid3& g, double tol = 1e-10) {
  for (std::size_t id = 0; id < g.size(); ++id) {
    RVec3 x = g.point(id);
    double e = c.eps->value(x), s = c.sigma->value(x), m = c.mu->value(x);
    if (!(e > 0.0) || !(m > 0.0) || s < 0.0) throw PositivityViolation("positivity fails at grid node");
    auto [i, j, k] = g.unindex(id);
    bool edge = false;
    for (int a = 0; a < 3; ++a) {
      int ix = a == 0 ? i : (a == 1 ? j : k);
      if (ix < 2 || ix > g.n[a] - 3) edge = true;
    }
    if (edge && (std::abs(e - c.eps0) > tol || std::abs(m - c.mu0) > tol || std::abs(s) > tol))
      throw SupportNotCompact("coefficient contrast reaches the grid boundary");
  }
}

inline CoefficientSet build_coefficients(std::shared_ptr<const ScalarSource> eps,
                                         std::shared_ptr<const ScalarSource> sigma,
                                         std::shared_ptr<const ScalarSource> mu, double omega, double eps0,
                                         double mu0, const Grid3* check = nullptr) {
  if (!(omega > 0.0)) throw std::invalid_argument("omega must be positive");
  CoefficientSet c;
  c.omega = omega;
  c.eps0 = eps0;
  c.mu0 = mu0;
  c.eps = std::move(eps);
  c.sigma = std::move(sigma);
  c.mu = std::move(mu);
  if (check) validate_coefficients(c, *check);
  return c;
}

// One-sided 4th-order d/dx3 at x3 = 0 from the x3 <= 0 side.
inline double normal_derivative_gamma0(const ScalarSource& s, const RVec3& x, double h) {
  const double w[5] = {25.0, -48.0, 36.0, -16.0, 3.0};
  double d = 0.0;
  for (int o = 0; o < 5; ++o) d += w[o] * s.value(RVec3(x(0), x(1), -o * h));
  return d / (12.0 * h);
}

inline std::shared_ptr<const ScalarSource> extend_even_source(std::shared_ptr<const ScalarSource> s,
                                                              const Grid3& g, double tol) {
  if (!g.reflection_symmetric()) throw std::invalid_argument("extend_even: grid is not reflection symmetric");
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j) {
      RVec3 x = g.point(i, j, 0);
      x(2) = 0.0;
      if (std::abs(normal_derivative_gamma0(*s, x, g.h)) > tol)
        throw ReflectionIncompatible("odd normal derivative on the reflection plane");
    }
  return std::make_shared<EvenExtension>(std::move(s));
}

inline CoefficientSet extend_even(const CoefficientSet& c, const Grid3& g, double tol = 1e-6) {
  CoefficientSet r = c;
  r.eps = extend_even_source(c.eps, g, tol);
  r.sigma = extend_even_source(c.sigma, g, tol);
  r.mu = extend_even_source(c.mu, g, tol);
  return r;
}

// sup over boundary samples of |c1 - c2| and |d_nu (c1 - c2)|
struct BoundaryMismatch {
  double value = 0.0, normal = 0.0;
};

inline BoundaryMismatch boundary_mismatch(const CoefficientSet& c1, const CoefficientSet& c2,
                                          const std::vector<std::pair<RVec3, RVec3>>& samples) {
  BoundaryMismatch r;
  for (const auto& [x, nu] : samples) {
    MediumPoint p1 = c1.point(x), p2 = c2.point(x);
    r.value = std::max({r.value, std::abs(p1.gamma - p2.gamma), std::abs(p1.mu - p2.mu)});
    CVec3 dg = p1.gamma * p1.alpha.g - p2.gamma * p2.alpha.g;
    CVec3 dm = p1.mu * p1.beta.g - p2.mu * p2.beta.g;
    r.normal = std::max({r.normal, std::abs(dot(dg, nu)), std::abs(dot(dm, nu))});
  }
  return r;
}

// Potentials of the augmented system at one point.
inline Mat8 build_V(const MediumPoint& p, double omega) {
  return diag8(omega * p.mu, omega * p.gamma) +
         0.5 * (p_mix_alt(p.Dbeta(), p.Dalpha()) + p_mix(p.Dbeta(), p.Dalpha()));
}

inline Mat8 build_W(const MediumPoint& p) {
  return p.kappa * Mat8::Identity() + 0.5 * p_mix_alt(p.Dbeta(), p.Dalpha());
}

inline Mat4 hessian_block(const CJet& f) {
  Mat4 m = Mat4::Zero();
  cplx lap = f.lap();
  m(0, 0) = lap;
  m.block<3, 3>(1, 1) = 2.0 * f.H - lap * Mat3::Identity();
  return m;
}

inline Mat8 build_Qtilde(const MediumPoint& p) {
  CVec3 Da = p.Dalpha(), Db = p.Dbeta(), Dk = p.Dkappa();
  cplx k2 = p.kappa * p.kappa;
  Mat4 A = Mat4::Zero();
  A.block<1, 3>(0, 1) = 2.0 * Dk.transpose();
  A.block<3, 1>(1, 0) = 2.0 * Dk;
  Mat8 s = blocks((k2 + 0.25 * dot(Da, Da)) * Mat4::Identity(), A, A, (k2 + 0.25 * dot(Db, Db)) * Mat4::Identity());
  return 0.5 * blocks(hessian_block(p.alpha), Mat4::Zero(), Mat4::Zero(), hessian_block(p.beta)) - s;
}

inline Mat8 build_Qtilde_prime(const MediumPoint& p) {
  CVec3 Da = p.Dalpha(), Db = p.Dbeta(), Dk = p.Dkappa();
  cplx k2 = p.kappa * p.kappa;
  Mat4 B = Mat4::Zero();
  B.block<3, 3>(1, 1) = 2.0 * cross_matrix(Dk);
  Mat8 s = blocks((k2 + 0.25 * dot(Db, Db)) * Mat4::Identity(), B, -B, (k2 + 0.25 * dot(Da, Da)) * Mat4::Identity());
  return -0.5 * blocks(hessian_block(p.beta), Mat4::Zero(), Mat4::Zero(), hessian_block(p.alpha)) - s;
}

inline Mat8 build_Q(const MediumPoint& p, double k) { return k * k * Mat8::Identity() + build_Qtilde(p); }

// Pair quantities mu~, gamma~, mu^, gamma^ and the potential U.
struct PairPoint {
  cplx u, v;  // (gamma1/gamma2)^{1/2}, (mu1/mu2)^{1/2}
  CVec3 grad_u, grad_v;
  cplx mu_t, gamma_t, mu_h, gamma_h;
  CVec3 Dmu_t, Dgamma_t, Dmu_h, Dgamma_h;
  Mat8 U;
};

inline PairPoint build_U(const MediumPoint& p1, const MediumPoint& p2, double omega) {
  PairPoint r;
  r.u = std::exp(0.5 * (p1.alpha.v - p2.alpha.v));
  r.v = std::exp(0.5 * (p1.beta.v - p2.beta.v));
  r.grad_u = r.u * 0.5 * (p1.alpha.g - p2.alpha.g);
  r.grad_v = r.v * 0.5 * (p1.beta.g - p2.beta.g);
  r.gamma_t = omega * (r.u - 1.0 / r.u);
  r.gamma_h = omega * (r.u + 1.0 / r.u);
  r.mu_t = omega * (r.v - 1.0 / r.v);
  r.mu_h = omega * (r.v + 1.0 / r.v);
  r.Dgamma_t = -I * omega * (1.0 + 1.0 / (r.u * r.u)) * r.grad_u;
  r.Dgamma_h = -I * omega * (1.0 - 1.0 / (r.u * r.u)) * r.grad_u;
  r.Dmu_t = -I * omega * (1.0 + 1.0 / (r.v * r.v)) * r.grad_v;
  r.Dmu_h = -I * omega * (1.0 - 1.0 / (r.v * r.v)) * r.grad_v;
  r.U = p2.kappa * diag8(r.gamma_t, r.mu_t) + p1.kappa * diag8(r.mu_t, r.gamma_t) +
        p_mix_alt(r.Dgamma_h, r.Dmu_h) + p_mix(r.Dgamma_t, r.Dmu_t);
  return r;
}

// Bracket expressions 1/2 Lap(f2 - f1) + 1/4[(Df1)^2 - (Df2)^2] + kappa1^2 - kappa2^2, (Df)^2 = -grad f . grad f
inline cplx bracket_of(const CJet& f1, const CJet& f2, cplx k1, cplx k2) {
  return 0.5 * (f2.lap() - f1.lap()) + 0.25 * (dot(f2.g, f2.g) - dot(f1.g, f1.g)) + k1 * k1 - k2 * k2;
}
inline cplx bracket_alpha(const MediumPoint& p1, const MediumPoint& p2) {
  return bracket_of(p1.alpha, p2.alpha, p1.kappa, p2.kappa);
}
inline cplx bracket_beta(const MediumPoint& p1, const MediumPoint& p2) {
  return bracket_of(p1.beta, p2.beta, p1.kappa, p2.kappa);
}

}  // namespace mxip
