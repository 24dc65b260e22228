#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "algebra8.hpp"
#include "fft.hpp"
#include "grid.hpp"
#include "media.hpp"

namespace mxip {

struct DegenerateXi : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NearZeroSymbol : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PhaseGeometry {
  RVec3 xi, eta1, eta2;
  std::array<RVec3, 3> fbasis;
  double tau = 1.0, k = 0.0;
  CVec3 zeta1, zeta2, zhat, zcheck, xi1_tau, xi2_tau;
};

inline PhaseGeometry make_phase_pair(const RVec3& xi, double tau, double k) {
  double xp = std::hypot(xi(0), xi(1));
  if (!(xp > 0.0)) throw DegenerateXi("make_phase_pair: |xi'| = 0");
  if (tau < 1.0) throw std::invalid_argument("make_phase_pair: tau < 1");
  double nx = xi.norm();
  PhaseGeometry g;
  g.xi = xi;
  g.tau = tau;
  g.k = k;
  g.eta1 = RVec3(xi(1), -xi(0), 0.0) / xp;
  g.eta2 = RVec3(-xi(0) * xi(2), -xi(1) * xi(2), xp * xp) / (xp * nx);
  g.fbasis[1] = RVec3(xi(0), xi(1), 0.0) / xp;
  g.fbasis[2] = RVec3(0.0, 0.0, 1.0);
  g.fbasis[0] = g.fbasis[1].cross(g.fbasis[2]);
  double s = std::sqrt(tau * tau + 0.25 * nx * nx);
  double t = std::sqrt(tau * tau + k * k);
  CVec3 x = to_c(xi), e1 = to_c(g.eta1), e2 = to_c(g.eta2);
  g.zeta1 = 0.5 * x + I * s * e1 + t * e2;
  g.zeta2 = -0.5 * x - I * s * e1 + t * e2;
  g.zhat = e2 + I * e1;
  g.zcheck = e2 - I * e1;
  g.xi1_tau = 2.0 * (g.zeta1 - tau * g.zhat);
  g.xi2_tau = 2.0 * (g.zeta2 - tau * g.zcheck);
  return g;
}

inline Vec8 amplitude_m(const CVec3& a, const CVec3& b) { return make_vec8(0.0, b, 0.0, a); }

// Z0 = (1/tau)(k I + (P'(zeta)+P(zeta))/2) m, m = (0,b,0,a)
inline Vec8 make_Z0(const CVec3& zeta, double tau, double k, const CVec3& a, const CVec3& b) {
  Mat8 A = k * Mat8::Identity() + 0.5 * (p_mix_alt(zeta) + p_mix(zeta));
  return A * amplitude_m(a, b) / tau;
}

// lim Z0 = (zhat.a, 0, zhat.b, 0)
inline Vec8 make_Mhat(const CVec3& zhat, const CVec3& a, const CVec3& b) {
  return make_vec8(dot(zhat, a), CVec3::Zero(), dot(zhat, b), CVec3::Zero());
}

struct CgoConfig {
  double delta = -0.5;
  double eps_weight = 0.25;
  double rho = 1.25;
  void validate(double circumradius) const {
    if (!(delta > -1.0 && delta < 0.0)) throw std::invalid_argument("CgoConfig: need -1 < delta < 0");
    if (!(delta + eps_weight > -1.0 && delta + eps_weight < 0.0))
      throw std::invalid_argument("CgoConfig: need -1 < delta + eps < 0");
    if (!(rho > circumradius)) throw std::invalid_argument("CgoConfig: rho must exceed circumradius of O");
  }
};

// C4 cutoff: 1 on |x| < rho, 0 on |x| > 2 rho.
inline double cutoff_chi(double r, double rho) {
  if (r <= rho) return 1.0;
  if (r >= 2.0 * rho) return 0.0;
  double t = (r - rho) / rho;
  double p = t * t * t * t * t * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + t * 70.0))));
  return 1.0 - p;
}

// Padded periodic box around O (pad factor 2 per axis) with O node range and far shell.
struct SpectralBox {
  Grid3 grid;
  IndexBox O;
  RVec3 olo, ohi, centre;
  std::vector<char> shell;
  std::shared_ptr<Fft3> fft;

  static SpectralBox around(const RVec3& olo, const RVec3& ohi, double h) {
    SpectralBox b;
    b.olo = olo;
    b.ohi = ohi;
    RVec3 L = ohi - olo;
    b.grid = Grid3::box(olo - 0.5 * L, ohi + 0.5 * L, h, true);
    b.O = index_box(b.grid, olo, ohi);
    b.centre = 0.5 * (olo + ohi);
    b.shell.assign(b.grid.size(), 0);
    for (std::size_t id = 0; id < b.grid.size(); ++id) {
      RVec3 x = b.grid.point(id);
      bool inner = true;
      for (int a = 0; a < 3; ++a)
        if (x(a) < olo(a) - 0.25 * L(a) - 1e-12 || x(a) > ohi(a) + 0.25 * L(a) + 1e-12) inner = false;
      b.shell[id] = !inner;
    }
    b.fft = std::make_shared<Fft3>(b.grid);
    return b;
  }

  std::vector<std::size_t> o_nodes() const {
    std::vector<std::size_t> ids;
    for (int i = O.lo[0]; i <= O.hi[0]; ++i)
      for (int j = O.lo[1]; j <= O.hi[1]; ++j)
        for (int k = O.lo[2]; k <= O.hi[2]; ++k) ids.push_back(grid.index(i, j, k));
    return ids;
  }
  double circumradius() const { return 0.5 * (ohi - olo).norm(); }
};

// (zhat.D)^{-1} on the padded box. (zhat.D) acts within planes y3 = const normal to xi; the charge of f on
// each plane is moved onto a planar Gaussian whose Cauchy transform is closed-form, the periodic remainder
// is inverted by FFT and shifted to zero mean on the far shell.
class FourierInverse {
 public:
  double floor_rel = 1e-6;
  double sG = 0.2;

  FourierInverse(const SpectralBox& box, const CVec3& zhat) : box_(box), zhat_(zhat) {
    const Grid3& g = box.grid;
    symbol_.resize(g.size());
    small_.assign(g.size(), 0);
    double mmax = 0.0;
    for (int a = 0; a < 3; ++a) mmax = std::max(mmax, std::abs(wavenumber(g.n[a] / 2, g.n[a], g.h)));
    mmax *= std::sqrt(3.0);
    for (std::size_t id = 0; id < g.size(); ++id) {
      auto [i, j, k] = g.unindex(id);
      RVec3 m(wavenumber(i, g.n[0], g.h), wavenumber(j, g.n[1], g.h), wavenumber(k, g.n[2], g.h));
      symbol_[id] = dot(zhat, m);
      if (std::abs(symbol_[id]) < floor_rel * mmax) {
        small_[id] = 1;
        if (id != 0) ++extra_null_;
      }
    }
    RVec3 e2 = zhat.real(), e1 = zhat.imag(), e3 = e2.cross(e1);
    g2_.resize(g.size());
    phi_.resize(g.size());
    y3_.resize(g.size());
    for (std::size_t id = 0; id < g.size(); ++id) {
      RVec3 d = g.point(id) - box.centre;
      double y1 = d.dot(e2), y2 = d.dot(e1), r2 = y1 * y1 + y2 * y2;
      y3_[id] = d.dot(e3);
      g2_[id] = std::exp(-r2 / (sG * sG)) / (M_PI * sG * sG);
      phi_[id] = r2 > 0.0 ? 0.5 * I * (-std::expm1(-r2 / (sG * sG))) / (M_PI * cplx(y1, y2)) : cplx(0.0);
    }
    auto [lo, hi] = std::minmax_element(y3_.begin(), y3_.end());
    double ymax = std::max(-*lo, *hi);
    dt_ = 2.0 * M_PI / (3.0 * ymax);
    nt_ = int(std::ceil(M_PI / g.h / dt_));
    double dy = g.h / 8.0;
    for (double y = *lo - 2.0 * dy; y <= *hi + 3.0 * dy; y += dy) ys_.push_back(y);
  }

  int extra_null_modes() const { return extra_null_; }
  const CVec3& zhat() const { return zhat_; }

  // charge of f per unit y3: its Fourier transform along e3 is summed directly over the nodes, tapered at
  // the grid Nyquist wavenumber, resynthesized on a fine line and interpolated to every node
  std::vector<cplx> slice_charge(const std::vector<cplx>& f) const {
    const Grid3& g = box_.grid;
    double h3 = g.h * g.h * g.h;
    std::vector<cplx> chat(2 * nt_ + 1, 0.0);
    for (std::size_t id = 0; id < g.size(); ++id) {
      if (f[id] == cplx(0.0)) continue;
      cplx step = std::exp(-I * dt_ * y3_[id]);
      cplx e = f[id] * h3 * std::exp(I * double(nt_) * dt_ * y3_[id]);
      for (int k = 0; k <= 2 * nt_; ++k) {
        chat[k] += e;
        e *= step;
      }
    }
    double T = nt_ * dt_;
    for (int k = 0; k <= 2 * nt_; ++k) {
      double t = std::abs((k - nt_) * dt_) / T;
      if (t > 0.8) chat[k] *= std::pow(std::cos(0.5 * M_PI * (t - 0.8) / 0.2), 2);
    }
    std::vector<cplx> line(ys_.size());
    for (std::size_t j = 0; j < ys_.size(); ++j) {
      cplx step = std::exp(I * dt_ * ys_[j]);
      cplx e = std::exp(-I * double(nt_) * dt_ * ys_[j]), acc = 0.0;
      for (int k = 0; k <= 2 * nt_; ++k) {
        acc += chat[k] * e;
        e *= step;
      }
      line[j] = acc * dt_ / (2.0 * M_PI);
    }
    std::vector<cplx> c(g.size());
    double dy = ys_[1] - ys_[0];
    for (std::size_t id = 0; id < g.size(); ++id) {
      double t = (y3_[id] - ys_[0]) / dy;
      int j = std::clamp(int(t), 1, int(ys_.size()) - 3);
      double u = t - j;
      // Catmull-Rom
      cplx p0 = line[j - 1], p1 = line[j], p2 = line[j + 1], p3 = line[j + 2];
      c[id] = p1 + 0.5 * u * (p2 - p0 + u * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + u * (3.0 * (p1 - p2) + p3 - p0)));
    }
    return c;
  }

  // in place: f -> u with (zhat.D) u = f
  void apply(std::vector<cplx>& f, bool decaying = true) const {
    const Grid3& g = box_.grid;
    std::vector<cplx> c;
    if (decaying) {
      c = slice_charge(f);
      for (std::size_t id = 0; id < g.size(); ++id) f[id] -= c[id] * g2_[id];
    }
    box_.fft->forward(f);
    double fmax = 0.0;
    for (const auto& v : f) fmax = std::max(fmax, std::abs(v));
    for (std::size_t id = 0; id < g.size(); ++id) {
      if (small_[id]) {
        if (id != 0 && std::abs(f[id]) > 1e-10 * fmax)
          throw NearZeroSymbol("FourierInverse: retained mode with vanishing symbol");
        f[id] = 0.0;
      } else {
        f[id] /= symbol_[id];
      }
    }
    box_.fft->inverse(f);
    if (decaying) {
      cplx mean = 0.0;
      std::size_t cnt = 0;
      for (std::size_t id = 0; id < g.size(); ++id)
        if (box_.shell[id]) {
          mean += f[id];
          ++cnt;
        }
      mean /= double(cnt);
      for (std::size_t id = 0; id < g.size(); ++id) f[id] += c[id] * phi_[id] - mean;
    }
  }

  // spectral (zhat.D) u - f for u = apply(f); the planar Gaussian part is differentiated in closed form
  double residual(const std::vector<cplx>& u, const std::vector<cplx>& f) const {
    const Grid3& g = box_.grid;
    std::vector<cplx> c = slice_charge(f);
    std::vector<cplx> up(g.size());
    for (std::size_t id = 0; id < g.size(); ++id) up[id] = u[id] - c[id] * phi_[id];
    box_.fft->forward(up);
    for (std::size_t id = 0; id < g.size(); ++id) up[id] *= symbol_[id];
    box_.fft->inverse(up);
    double num = 0.0, den = 0.0;
    for (std::size_t id = 0; id < g.size(); ++id) {
      cplx r = up[id] + c[id] * g2_[id] - f[id];
      num = std::max(num, std::abs(r));
      den = std::max(den, std::abs(f[id]));
    }
    return den > 0.0 ? num / den : num;
  }

 private:
  const SpectralBox& box_;
  CVec3 zhat_;
  std::vector<cplx> symbol_;
  std::vector<char> small_;
  std::vector<double> g2_, y3_;
  std::vector<cplx> phi_;
  std::vector<double> ys_;
  double dt_ = 1.0;
  int nt_ = 0;
  int extra_null_ = 0;
};

// Medium sampled on the box, stored only where it differs from the background.
struct MediumOnBox {
  const SpectralBox* box = nullptr;
  CoefficientSet coeffs;
  std::vector<int> slot;  // -1 where background
  std::vector<std::size_t> support;
  std::vector<MediumPoint> pts;
  MediumPoint bg;

  static MediumOnBox build(const SpectralBox& box, const CoefficientSet& c, double tol = 1e-15) {
    MediumOnBox m;
    m.box = &box;
    m.coeffs = c;
    m.slot.assign(box.grid.size(), -1);
    MediumPoint p0 = c.point(box.grid.point(0));
    m.bg = p0;
    double la0 = std::log(std::abs(c.eps0)), lb0 = std::log(c.mu0);
    for (std::size_t id = 0; id < box.grid.size(); ++id) {
      MediumPoint p = c.point(box.grid.point(id));
      double dev = std::abs(p.alpha.v - la0) + std::abs(p.beta.v - lb0) + max_abs(p.alpha.g) + max_abs(p.beta.g) +
                   max_abs(p.alpha.H) + max_abs(p.beta.H);
      if (dev > tol) {
        m.slot[id] = int(m.pts.size());
        m.support.push_back(id);
        m.pts.push_back(p);
      }
    }
    m.bg = c.point(RVec3(1e9, 1e9, 1e9));
    return m;
  }

  const MediumPoint& at(std::size_t id) const { return slot[id] < 0 ? bg : pts[slot[id]]; }
};

using Field8 = std::vector<Vec8>;

inline void extract(const Field8& F, int c, std::vector<cplx>& out) {
  out.resize(F.size());
  for (std::size_t i = 0; i < F.size(); ++i) out[i] = F[i](c);
}

// u = (zhat.D)^{-1} f componentwise
inline Field8 inverse_field(const FourierInverse& inv, const Field8& f) {
  Field8 u(f.size(), Vec8::Zero());
  std::vector<cplx> buf;
  for (int c = 0; c < 8; ++c) {
    extract(f, c, buf);
    bool zero = std::all_of(buf.begin(), buf.end(), [](cplx v) { return v == cplx(0.0); });
    if (zero) continue;
    inv.apply(buf);
    for (std::size_t i = 0; i < f.size(); ++i) u[i](c) = buf[i];
  }
  return u;
}

// -Q(x) v on the box (zero off support)
inline Field8 minus_Q_times(const MediumOnBox& m, const Vec8& v) {
  Field8 f(m.box->grid.size(), Vec8::Zero());
  double k = m.coeffs.k();
  for (std::size_t s = 0; s < m.support.size(); ++s) f[m.support[s]] = -(build_Q(m.pts[s], k) * v);
  return f;
}

struct CgoSolution {
  double tau = 1.0, k = 0.0;
  CVec3 zeta, zhat, a, b;
  Vec8 m, Z0, Y1;
  Field8 Zm1;  // on the padded box
};

// Z = e^{i zeta.x}(Z0 + Z_{-1}), Z_{-1} = (1/2tau) chi (zhat.D)^{-1}(-Q Z0)
inline CgoSolution build_cgo(const MediumOnBox& m, const FourierInverse& inv, const CVec3& zeta, double tau,
                             const CVec3& a, const CVec3& b, const CgoConfig& cfg = {}) {
  const SpectralBox& box = *m.box;
  cfg.validate(box.circumradius());
  CgoSolution s;
  s.tau = tau;
  s.k = m.coeffs.k();
  s.zeta = zeta;
  s.zhat = inv.zhat();
  s.a = a;
  s.b = b;
  s.m = amplitude_m(a, b);
  s.Z0 = make_Z0(zeta, tau, s.k, a, b);
  s.Y1 = p_mix(zeta) * s.Z0;
  s.Zm1 = inverse_field(inv, minus_Q_times(m, s.Z0));
  for (std::size_t id = 0; id < s.Zm1.size(); ++id) {
    double chi = cutoff_chi((box.grid.point(id) - box.centre).norm(), cfg.rho);
    s.Zm1[id] *= chi / (2.0 * tau);
  }
  return s;
}

// Y0 = P(zeta) Z_{-1} - W^t Z0
inline Vec8 Y0_at(const CgoSolution& s, const MediumOnBox& m, std::size_t id) {
  Vec8 wz = m.slot[id] < 0 ? Vec8(s.k * s.Z0) : Vec8(build_W(m.at(id)).transpose() * s.Z0);
  return p_mix(s.zeta) * s.Zm1[id] - wz;
}

// R^ = lim tau Z_{-1} = (1/2)(zhat.D)^{-1}(-Q M^)
inline Field8 transport_Rhat(const MediumOnBox& m, const FourierInverse& inv, const Vec8& Mhat) {
  Field8 R = inverse_field(inv, minus_Q_times(m, Mhat));
  for (auto& r : R) r *= 0.5;
  return R;
}

// Transport residual ||2(zhat.D)R + Q M|| / ||Q M||, spectrally
inline double transport_residual(const MediumOnBox& m, const FourierInverse& inv, const Vec8& Mhat,
                                 const Field8& R) {
  Field8 f = minus_Q_times(m, Mhat);
  double worst = 0.0, scale = 0.0;
  std::vector<cplx> fc, uc;
  for (int c = 0; c < 8; ++c) {
    extract(f, c, fc);
    double fm = 0.0;
    for (auto v : fc) fm = std::max(fm, std::abs(v));
    scale = std::max(scale, fm);
  }
  for (int c = 0; c < 8; ++c) {
    extract(f, c, fc);
    double fm = 0.0;
    for (auto v : fc) fm = std::max(fm, std::abs(v));
    if (fm == 0.0) continue;
    extract(R, c, uc);
    for (auto& v : uc) v *= 2.0;
    worst = std::max(worst, inv.residual(uc, fc) * fm / scale);
  }
  return worst;
}

// Entire-function identities zhat.R^E = (zhat.a)(kappa-k), zhat.R^H = (zhat.b)(kappa-k) on O
struct TransportIdentityGap {
  double e_gap = 0.0, h_gap = 0.0, scale = 0.0;
  double relative() const { return scale > 0.0 ? std::max(e_gap, h_gap) / scale : std::max(e_gap, h_gap); }
};

inline TransportIdentityGap transport_identity_gap(const MediumOnBox& m, const CVec3& zhat, const CVec3& a,
                                                   const CVec3& b, const Field8& R) {
  TransportIdentityGap r;
  double k = m.coeffs.k();
  cplx za = dot(zhat, a), zb = dot(zhat, b);
  for (std::size_t id : m.box->o_nodes()) {
    cplx dk = m.at(id).kappa - k;
    r.e_gap = std::max(r.e_gap, std::abs(dot(zhat, epart(R[id])) - za * dk));
    r.h_gap = std::max(r.h_gap, std::abs(dot(zhat, hpart(R[id])) - zb * dk));
    r.scale = std::max({r.scale, std::abs(za * dk), std::abs(zb * dk)});
  }
  return r;
}

// diag(-I4dot, I4dot), I4dot = diag(1,1,1,-1)
inline Vec8 reflect_components(const Vec8& v) {
  Vec8 r = v;
  r(0) = -v(0);
  r(1) = -v(1);
  r(2) = -v(2);
  r(3) = v(3);
  r(7) = -v(7);
  return r;
}

// X^dot(x) = diag(-I4dot, I4dot) X(x1, x2, -x3)
inline Field8 reflect_solution(const Grid3& g, const Field8& X) {
  if (!g.reflection_symmetric()) throw std::invalid_argument("reflect_solution: grid not reflection symmetric");
  Field8 r(X.size());
  for (int i = 0; i < g.n[0]; ++i)
    for (int j = 0; j < g.n[1]; ++j)
      for (int k = 0; k < g.n[2]; ++k) r[g.index(i, j, k)] = reflect_components(X[g.index(i, j, g.mirror_k(k))]);
  return r;
}

// Amplitude F = Y1 + Y0 at every box node (Y = e^{i zeta.x} F).
inline Field8 amplitude_Y(const CgoSolution& s, const MediumOnBox& m) {
  Field8 F(s.Zm1.size());
  for (std::size_t id = 0; id < F.size(); ++id) F[id] = s.Y1 + Y0_at(s, m, id);
  return F;
}

struct CgoNorms {
  double tau = 0.0;
  double zm1 = 0.0, y1 = 0.0, y0 = 0.0, residual_rel = 0.0, scalar_rel = 0.0;
};

// L2(O) norms of the parts and the conjugated residual (P(zeta) + P(D) + W)(Y1 + Y0) relative to ||Y1 + Y0||.
inline CgoNorms cgo_norms(const CgoSolution& s, const MediumOnBox& m) {
  const SpectralBox& box = *m.box;
  const Grid3& g = box.grid;
  CgoNorms r;
  r.tau = s.tau;
  IndexBox ob = box.O;
  IndexBox wide = ob;
  for (int a = 0; a < 3; ++a) {
    wide.lo[a] -= 2;
    wide.hi[a] += 2;
  }
  Field8 F(g.size(), Vec8::Zero());
  for (int i = wide.lo[0]; i <= wide.hi[0]; ++i)
    for (int j = wide.lo[1]; j <= wide.hi[1]; ++j)
      for (int k = wide.lo[2]; k <= wide.hi[2]; ++k) {
        std::size_t id = g.index(i, j, k);
        F[id] = s.Y1 + Y0_at(s, m, id);
      }
  Mat8 Pz = p_mix(s.zeta);
  std::array<Mat8, 3> Pe;
  for (int a = 0; a < 3; ++a) Pe[a] = p_mix(to_c(RVec3::Unit(a)));
  double nz = 0, n1 = 0, n0 = 0, nr = 0, nf = 0, ns = 0;
  for (int i = ob.lo[0]; i <= ob.hi[0]; ++i)
    for (int j = ob.lo[1]; j <= ob.hi[1]; ++j)
      for (int k = ob.lo[2]; k <= ob.hi[2]; ++k) {
        std::size_t id = g.index(i, j, k);
        double w = trapezoid_weight(g, ob, i, j, k);
        Vec8 y0 = F[id] - s.Y1;
        nz += w * s.Zm1[id].squaredNorm();
        n1 += w * s.Y1.squaredNorm();
        n0 += w * y0.squaredNorm();
        nf += w * F[id].squaredNorm();
        ns += w * (std::norm(F[id](0)) + std::norm(F[id](4)));
        Vec8 dF = Vec8::Zero();
        for (int a = 0; a < 3; ++a) {
          Vec8 d = Vec8::Zero();
          for (int o = -2; o <= 2; ++o) {
            if (o == 0) continue;
            int id3[3] = {i, j, k};
            id3[a] += o;
            d += kD1o4[o + 2] * F[g.index(id3[0], id3[1], id3[2])];
          }
          dF += -I * (Pe[a] * d) / g.h;
        }
        Vec8 W = m.slot[id] < 0 ? Vec8(s.k * F[id]) : Vec8(build_W(m.at(id)) * F[id]);
        Vec8 res = Pz * F[id] + dF + W;
        nr += w * res.squaredNorm();
      }
  r.zm1 = std::sqrt(nz);
  r.y1 = std::sqrt(n1);
  r.y0 = std::sqrt(n0);
  r.residual_rel = std::sqrt(nr / nf);
  r.scalar_rel = std::sqrt(ns / nf);
  return r;
}

// L2_delta norm with weight (1+|x|^2)^delta over O
inline double weighted_norm(const SpectralBox& box, const Field8& F, double delta) {
  const Grid3& g = box.grid;
  double s = 0.0;
  for (int i = box.O.lo[0]; i <= box.O.hi[0]; ++i)
    for (int j = box.O.lo[1]; j <= box.O.hi[1]; ++j)
      for (int k = box.O.lo[2]; k <= box.O.hi[2]; ++k) {
        std::size_t id = g.index(i, j, k);
        double w = trapezoid_weight(g, box.O, i, j, k) * std::pow(1.0 + g.point(id).squaredNorm(), delta);
        s += w * F[id].squaredNorm();
      }
  return std::sqrt(s);
}

// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double n = double(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Physical reflected field frak X = diag(mu^-1/2, gamma^-1/2)(Y + Y^dot) on O, Y = e^{i zeta.x}(Y1 + Y0).
struct ReflectedField {
  std::vector<std::size_t> ids;  // box node ids of O
  Field8 X;
};

inline ReflectedField assemble_reflected(const CgoSolution& s, const MediumOnBox& m) {
  const SpectralBox& box = *m.box;
  const Grid3& g = box.grid;
  if (!g.reflection_symmetric()) throw std::invalid_argument("assemble_reflected: box not reflection symmetric");
  ReflectedField r;
  r.ids = box.o_nodes();
  r.X.resize(r.ids.size());
  auto Y = [&](std::size_t id) {
    RVec3 x = g.point(id);
    return Vec8(std::exp(I * dot(s.zeta, x)) * (s.Y1 + Y0_at(s, m, id)));
  };
  for (std::size_t n = 0; n < r.ids.size(); ++n) {
    std::size_t id = r.ids[n];
    auto [i, j, k] = g.unindex(id);
    Vec8 y = Y(id) + reflect_components(Y(g.index(i, j, g.mirror_k(k))));
    const MediumPoint& p = m.at(id);
    r.X[n] = diag8(1.0 / std::sqrt(p.mu), 1.0 / std::sqrt(p.gamma)) * y;
  }
  return r;
}

// max |nu ^ frak H| on x3 = 0 relative to max |frak H| over O
inline double gamma0_tangential_h(const ReflectedField& r, const Grid3& g) {
  double tang = 0.0, full = 0.0;
  for (std::size_t n = 0; n < r.ids.size(); ++n) {
    CVec3 H = hpart(r.X[n]);
    full = std::max(full, H.norm());
    if (std::abs(g.point(r.ids[n])(2)) < 1e-12) tang = std::max(tang, std::hypot(std::abs(H(0)), std::abs(H(1))));
  }
  return full > 0.0 ? tang / full : tang;
}

struct ReflectedPair {
  CgoSolution s1, s2;
  ReflectedField x1, x2;
  double tangential1 = 0.0, tangential2 = 0.0;
};

// First solution against (mu1, gamma1) with zeta1, second against (mu2, conj gamma2) with zeta2.
inline ReflectedPair assemble_reflected_pair(const MediumOnBox& m1, const MediumOnBox& m2, const FourierInverse& inv1,
                                             const FourierInverse& inv2, const PhaseGeometry& g, const CVec3& a1,
                                             const CVec3& b1, const CVec3& a2, const CVec3& b2,
                                             const CgoConfig& cfg = {}) {
  if (m1.coeffs.conj_gamma || !m2.coeffs.conj_gamma)
    throw std::invalid_argument("assemble_reflected_pair: second medium must carry conj(gamma2)");
  if ((inv1.zhat() - g.zhat).norm() > 1e-12 || (inv2.zhat() - g.zcheck).norm() > 1e-12)
    throw std::invalid_argument("assemble_reflected_pair: multiplier directions do not match the phase pair");
  ReflectedPair r;
  r.s1 = build_cgo(m1, inv1, g.zeta1, g.tau, a1, b1, cfg);
  r.s2 = build_cgo(m2, inv2, g.zeta2, g.tau, a2, b2, cfg);
  r.x1 = assemble_reflected(r.s1, m1);
  r.x2 = assemble_reflected(r.s2, m2);
  r.tangential1 = gamma0_tangential_h(r.x1, m1.box->grid);
  r.tangential2 = gamma0_tangential_h(r.x2, m2.box->grid);
  return r;
}

// Smallest tau in the schedule from which the scalar share of Y stays below tol.
inline std::optional<double> scalar_vanishing_threshold(const std::vector<CgoNorms>& n, double tol = 0.05) {
  std::optional<double> t;
  for (auto it = n.rbegin(); it != n.rend(); ++it) {
    if (it->scalar_rel >= tol) break;
    t = it->tau;
  }
  return t;
}

}  // namespace mxip
