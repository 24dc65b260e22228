#include <gtest/gtest.h>

#include <random>

#include "mxip/recovery.hpp"
#include "mxip/scenario.hpp"

using namespace mxip;

namespace {

const RVec3 kOlo(0, 0, -1), kOhi(1, 1, 1);
constexpr double kOmega = 2.0;

double max_on_o(const RecoveryGrid& rg, const std::vector<cplx>& f) {
  double m = 0.0;
  for (std::size_t id = 0; id < f.size(); ++id) {
    auto [i, j, k] = rg.grid.unindex(id);
    if (rg.in_o(i, j, k)) m = std::max(m, std::abs(f[id]));
  }
  return m;
}

double max_diff_on_o(const RecoveryGrid& rg, const std::vector<cplx>& a, const std::vector<cplx>& b) {
  std::vector<cplx> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return max_on_o(rg, d);
}

CoefficientSet constant_medium(double eps, double sigma, double mu) {
  return build_coefficients(constant_source(eps), constant_source(sigma), constant_source(mu), kOmega, 1.0, 1.0);
}

struct Closed {
  RecoveryGrid rg;
  Scenario sc = recovery_scenario(kOmega);
  LogFields truth, ref;
  BracketPair g;
  explicit Closed(double h) : rg(RecoveryGrid::around(kOlo, kOhi, h)) {
    truth = sample_logs(rg, sc.c1);
    ref = sample_logs(rg, sc.c2);
    g = discrete_brackets(rg, truth, ref, kOmega);
  }
};

Closed& coarse() {
  static Closed c(1.0 / 16);
  return c;
}

}  // namespace

TEST(Brackets, EqualMediaGiveZero) {
  auto& c = coarse();
  BracketPair a = compute_brackets(c.rg, c.sc.c2, c.sc.c2);
  BracketPair d = discrete_brackets(c.rg, c.ref, c.ref, kOmega);
  EXPECT_EQ(max_on_o(c.rg, a.g_alpha), 0.0);
  EXPECT_EQ(max_on_o(c.rg, a.g_beta), 0.0);
  EXPECT_EQ(max_on_o(c.rg, d.g_alpha), 0.0);
  EXPECT_EQ(max_on_o(c.rg, d.g_beta), 0.0);
}

TEST(Brackets, EqualPermeabilityLeavesOnlyWavenumberTerm) {
  auto& c = coarse();
  RVec3 m(0.5, 0.5, -0.5);
  CoefficientSet c1 = gaussian_medium(kOmega, {{0.2, m}}, {{0.1, m}}, {{0.3, m}});
  CoefficientSet c2 = gaussian_medium(kOmega, {{-0.1, m}}, {{0.1, m}}, {{0.1, RVec3(0.45, 0.5, -0.5)}});
  double worst = 0.0;
  for (std::size_t id = 0; id < c.rg.grid.size(); id += 7) {
    RVec3 x = c.rg.grid.point(id);
    MediumPoint p1 = c1.point(x), p2 = c2.point(x);
    cplx expect = p1.kappa * p1.kappa - p2.kappa * p2.kappa;
    worst = std::max(worst, std::abs(bracket_beta(p1, p2) - expect));
    EXPECT_NEAR(std::abs(expect - kOmega * kOmega * p1.mu * (p1.gamma - p2.gamma)), 0.0, 1e-12);
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(Brackets, DiscreteOperatorConvergesToJetForm) {
  std::vector<double> err;
  for (double h : {1.0 / 16, 1.0 / 32}) {
    RecoveryGrid rg = RecoveryGrid::around(kOlo, kOhi, h);
    Scenario sc = recovery_scenario(kOmega);
    BracketPair a = compute_brackets(rg, sc.c1, sc.c2);
    BracketPair d = discrete_brackets(rg, sample_logs(rg, sc.c1), sample_logs(rg, sc.c2), kOmega);
    err.push_back(std::max(max_diff_on_o(rg, a.g_alpha, d.g_alpha), max_diff_on_o(rg, a.g_beta, d.g_beta)));
  }
  EXPECT_GT(err[0] / err[1], 8.0);
}

TEST(Cancellation, HoldsForRandomPositiveSamples) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> pos(0.2, 5.0), sig(0.0, 3.0);
  for (int t = 0; t < 500; ++t) {
    MediumPoint p1 = constant_medium(pos(g), sig(g), pos(g)).point(RVec3::Zero());
    MediumPoint p2 = constant_medium(pos(g), sig(g), pos(g)).point(RVec3::Zero());
    Cancellation c = cancellation_identities(p1, p2, kOmega);
    EXPECT_LT(std::abs(c.first), 1e-12 * std::max(1.0, c.scale));
    EXPECT_LT(std::abs(c.second), 1e-12 * std::max(1.0, c.scale));
  }
}

TEST(Cancellation, AssembledIntegrandEqualsBracket) {
  auto& c = coarse();
  double worst = 0.0, scale = 0.0;
  for (std::size_t id = 0; id < c.rg.grid.size(); ++id) {
    RVec3 x = c.rg.grid.point(id);
    MediumPoint p1 = c.sc.c1.point(x), p2 = c.sc.c2.point(x);
    for (bool alpha : {true, false}) {
      cplx b = alpha ? bracket_alpha(p1, p2) : bracket_beta(p1, p2);
      worst = std::max(worst, std::abs(assembled_integrand(p1, p2, kOmega, alpha) - b));
      scale = std::max(scale, std::abs(b));
    }
  }
  EXPECT_GT(scale, 1.0);
  EXPECT_LT(worst, 1e-12 * scale);
}

TEST(FourierTest, ZeroAndNonzeroBrackets) {
  auto& c = coarse();
  std::vector<RVec3> xis = {RVec3::Zero(), RVec3(0, 0, 2.0), RVec3(M_PI, 0.3, 1.0), RVec3(1.1, -2.0, 3.7)};
  BracketPair zero = discrete_brackets(c.rg, c.ref, c.ref, kOmega);
  EXPECT_EQ(fourier_vanishing_test(c.rg, zero, xis).max_abs, 0.0);
  FourierTest f = fourier_vanishing_test(c.rg, c.g, xis);
  EXPECT_GT(f.max_abs, 1e-3);
  // transform at xi = 0 is the trapezoid volume integral
  cplx vol = 0.0;
  const Grid3& g = c.rg.grid;
  for (int i = c.rg.O.lo[0]; i <= c.rg.O.hi[0]; ++i)
    for (int j = c.rg.O.lo[1]; j <= c.rg.O.hi[1]; ++j)
      for (int k = c.rg.O.lo[2]; k <= c.rg.O.hi[2]; ++k)
        vol += trapezoid_weight(g, c.rg.O, i, j, k) * c.g.g_alpha[g.index(i, j, k)];
  EXPECT_LT(std::abs(f.alpha[0] - vol), 1e-12 * std::max(1.0, std::abs(vol)));
}

TEST(Semilinear, UnitFieldsGiveZeroResidual) {
  auto& c = coarse();
  SemilinearCoefficients k = semilinear_coefficients(c.ref, kOmega);
  std::vector<cplx> one(c.rg.grid.size(), 1.0);
  SemilinearResidual r = semilinear_residual(c.rg, one, one, k.a, k.b, k.p, k.q);
  // difference weights of a constant cancel to rounding
  EXPECT_LT(max_on_o(c.rg, r.r_u), 1e-12);
  EXPECT_LT(max_on_o(c.rg, r.r_v), 1e-12);
}

TEST(Semilinear, ResidualEqualsWeightedBrackets) {
  // D.(gamma2 Du) + omega^2 mu2 gamma2^2 (u^2v^2 - 1)u = gamma2 u g_alpha, and mu2 v g_beta for v
  std::vector<double> err;
  for (double h : {1.0 / 16, 1.0 / 32}) {
    RecoveryGrid rg = RecoveryGrid::around(kOlo, kOhi, h);
    Scenario sc = recovery_scenario(kOmega);
    LogFields l1 = sample_logs(rg, sc.c1), l2 = sample_logs(rg, sc.c2);
    auto [u, v] = ratio_fields(l1, l2);
    SemilinearCoefficients k = semilinear_coefficients(l2, kOmega);
    SemilinearResidual r = semilinear_residual(rg, u, v, k.a, k.b, k.p, k.q);
    BracketPair b = compute_brackets(rg, sc.c1, sc.c2);
    double e = 0.0;
    for (std::size_t id = 0; id < u.size(); ++id) {
      auto [i, j, kk] = rg.grid.unindex(id);
      if (!rg.in_o(i, j, kk)) continue;
      e = std::max({e, std::abs(r.r_u[id] - k.a[id] * u[id] * b.g_alpha[id]),
                    std::abs(r.r_v[id] - k.b[id] * v[id] * b.g_beta[id])});
    }
    err.push_back(e);
  }
  EXPECT_LT(err[1], 0.05 * 37.0);
  EXPECT_GT(err[0] / err[1], 8.0);
}

TEST(Semilinear, LinearizationMatchesDifferenceQuotient) {
  auto& c = coarse();
  auto [u, v] = ratio_fields(c.truth, c.ref);
  SemilinearCoefficients k = semilinear_coefficients(c.ref, kOmega);
  std::mt19937_64 g(9);
  std::normal_distribution<double> n;
  std::vector<cplx> du(u.size()), dv(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    du[i] = cplx(n(g), n(g));
    dv[i] = cplx(n(g), n(g));
  }
  double eps = 1e-5;
  auto shift = [&](double s) {
    std::vector<cplx> a = u, b = v;
    for (std::size_t i = 0; i < u.size(); ++i) {
      a[i] += s * du[i];
      b[i] += s * dv[i];
    }
    return semilinear_residual(c.rg, a, b, k.a, k.b, k.p, k.q);
  };
  SemilinearResidual rp = shift(eps), rm = shift(-eps);
  SemilinearResidual lin = semilinear_linearization(c.rg, u, v, du, dv, k.a, k.b, k.p, k.q);
  double e = 0.0, s = 0.0;
  for (std::size_t id = 0; id < u.size(); ++id) {
    cplx fu = (rp.r_u[id] - rm.r_u[id]) / (2.0 * eps), fv = (rp.r_v[id] - rm.r_v[id]) / (2.0 * eps);
    e = std::max({e, std::abs(fu - lin.r_u[id]), std::abs(fv - lin.r_v[id])});
    s = std::max({s, std::abs(lin.r_u[id]), std::abs(lin.r_v[id])});
  }
  EXPECT_GT(s, 1.0);
  EXPECT_LT(e / s, 1e-6);
}

namespace {
struct SmoothSet {
  std::vector<cplx> z, w, a, b, p, q;
};
SmoothSet smooth_set(const RecoveryGrid& rg, double zscale) {
  SmoothSet s;
  std::size_t n = rg.grid.size();
  for (auto* f : {&s.z, &s.w, &s.a, &s.b, &s.p, &s.q}) f->resize(n);
  for (std::size_t id = 0; id < n; ++id) {
    RVec3 x = rg.grid.point(id);
    s.z[id] = zscale * cplx(std::sin(2.0 * x(0) + x(1)) * std::cos(x(2)), 0.3 * std::cos(x(0) - x(2)));
    s.w[id] = zscale * cplx(std::exp(-x.squaredNorm()), 0.2 * std::sin(3.0 * x(1)));
    s.a[id] = cplx(1.5 + 0.3 * std::sin(x(0) + 2.0 * x(2)), 0.4 * std::cos(x(1)));
    s.b[id] = cplx(1.2 + 0.2 * std::cos(2.0 * x(0) - x(1)), 0.1 * std::sin(x(2)));
    s.p[id] = cplx(1.0 + x(0), 0.5);
    s.q[id] = cplx(0.7, x(1) - x(2));
  }
  return s;
}
}  // namespace

TEST(Substitution, ZeroFieldsGiveZeroGaps) {
  RecoveryGrid rg = RecoveryGrid::around(RVec3(0, 0, 0), RVec3(1, 1, 1), 1.0 / 8);
  SmoothSet s = smooth_set(rg, 0.0);
  SubstitutionGaps g = substitution_check(rg, s.z, s.w, s.a, s.b, s.p, s.q);
  EXPECT_EQ(g.product_identity, 0.0);
  EXPECT_LT(g.z_equation, 1e-12);
  EXPECT_LT(g.w_equation, 1e-12);
  EXPECT_EQ(g.div_identity_a, 0.0);
  EXPECT_EQ(g.boundary_zw, 0.0);
  EXPECT_LE(g.inequality_excess, 0.0);
}

TEST(Substitution, IdentitiesHoldForSmoothFields) {
  std::vector<double> div;
  for (double h : {1.0 / 8, 1.0 / 16}) {
    RecoveryGrid rg = RecoveryGrid::around(RVec3(0, 0, 0), RVec3(1, 1, 1), h);
    SmoothSet s = smooth_set(rg, 0.4);
    SubstitutionGaps g = substitution_check(rg, s.z, s.w, s.a, s.b, s.p, s.q);
    EXPECT_LT(g.product_identity, 1e-12);
    EXPECT_LT(g.z_equation, 1e-3);
    EXPECT_LT(g.w_equation, 1e-3);
    EXPECT_LE(g.inequality_excess, 1e-3);
    EXPECT_GT(g.C, 0.0);
    div.push_back(std::max(g.div_identity_a, g.div_identity_b));
  }
  EXPECT_LT(div[1], 1e-3);
  EXPECT_GT(div[0] / div[1], 8.0);
}

TEST(Substitution, RejectsNonPositiveCoefficients) {
  RecoveryGrid rg = RecoveryGrid::around(RVec3(0, 0, 0), RVec3(1, 1, 1), 1.0 / 4);
  SmoothSet s = smooth_set(rg, 0.1);
  s.a[3] = cplx(-0.1, 1.0);
  EXPECT_THROW(substitution_check(rg, s.z, s.w, s.a, s.b, s.p, s.q), std::invalid_argument);
}

TEST(Substitution, TrueRatiosVanishOnBoundary) {
  auto& c = coarse();
  auto [u, v] = ratio_fields(c.truth, c.ref);
  SemilinearCoefficients k = semilinear_coefficients(c.ref, kOmega);
  std::vector<cplx> z(u.size()), w(u.size());
  for (std::size_t id = 0; id < u.size(); ++id) {
    z[id] = std::sqrt(k.a[id]) * (u[id] - 1.0);
    w[id] = std::sqrt(k.b[id]) * (v[id] - 1.0);
  }
  SubstitutionGaps g = substitution_check(c.rg, z, w, k.a, k.b, k.p, k.q);
  EXPECT_LT(g.boundary_zw, 1e-10);
  EXPECT_GT(g.scale, 1.0);
  EXPECT_LT(g.product_identity, 1e-12);
}

TEST(Newton, JacobianMatchesDifferenceQuotient) {
  auto& c = coarse();
  BracketNewton nw(c.rg, c.ref, kOmega);
  LogFields l = c.truth;
  SpMat J = nw.jacobian(l);
  std::mt19937_64 g(3);
  std::normal_distribution<double> n;
  CVecX d(nw.unknowns());
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = cplx(n(g), n(g));
  double eps = 1e-6;
  CVecX fd = (nw.residual(nw.updated(l, d, eps), c.g) - nw.residual(nw.updated(l, d, -eps), c.g)) / (2.0 * eps);
  CVecX jd = J * d;
  EXPECT_LT((fd - jd).cwiseAbs().maxCoeff() / jd.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Newton, ZeroBracketsReturnReferenceInOneIteration) {
  auto& c = coarse();
  BracketNewton nw(c.rg, c.ref, kOmega);
  BracketPair zero = discrete_brackets(c.rg, c.ref, c.ref, kOmega);
  NewtonResult r = nw.solve(zero);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_EQ(nw.relative_error(r.logs, c.ref), 0.0);
  EXPECT_EQ(r.final_residual, 0.0);
}

TEST(Newton, ClosedLoopRecoversTruth) {
  auto& c = coarse();
  BracketNewton nw(c.rg, c.ref, kOmega);
  double contrast = nw.relative_error(c.ref, c.truth);
  EXPECT_GT(contrast, 0.05);
  EXPECT_LT(contrast, 0.15);
  NewtonResult r = nw.solve(c.g, {}, &c.truth);
  EXPECT_LE(r.iterations, 8);
  EXPECT_LT(nw.relative_error(r.logs, c.truth), 1e-6);
  EXPECT_LT(r.final_residual, 1e-9);
  // quadratic convergence: e_{n+1} / e_n^2 bounded while the error is above the floor
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    double e0 = r.log[i - 1].error, e1 = r.log[i].error;
    if (e1 < 1e-10) break;
    EXPECT_LT(e1 / (e0 * e0), 1.0);
  }
  // the recovered fields are the exponentials of the recovered logs
  for (std::size_t id = 0; id < r.gamma1.size(); id += 101)
    EXPECT_LT(std::abs(r.gamma1[id] - std::exp(r.logs.alpha[id])), 1e-15 * std::abs(r.gamma1[id]));
}

TEST(Newton, PerturbedStartWithZeroBracketsReturnsToReference) {
  auto& c = coarse();
  BracketNewton nw(c.rg, c.ref, kOmega);
  BracketPair zero = discrete_brackets(c.rg, c.ref, c.ref, kOmega);
  LogFields start = c.truth;  // carries the truth contrast, boundary values equal the reference
  NewtonResult r = nw.solve(zero, {}, nullptr, start);
  EXPECT_LE(r.iterations, 8);
  EXPECT_LT(nw.relative_error(r.logs, c.ref), 1e-9);
}

TEST(Newton, IterationLimitRaisesDiverged) {
  auto& c = coarse();
  BracketNewton nw(c.rg, c.ref, kOmega);
  NewtonOptions opt;
  opt.max_iter = 1;
  EXPECT_THROW(nw.solve(c.g, opt), NewtonDiverged);
}
