#include <gtest/gtest.h>

#include <random>

#include "mxip/asymptotics.hpp"
#include "mxip/kelvin.hpp"
#include "mxip/recovery.hpp"

using namespace mxip;

namespace {

const RVec3 kPlo(0, 0, -1), kPhi(1, 1, 0);
const RVec3 kTlo(0.2, -0.6, 1.2), kThi(0.6, -0.2, 1.6);

std::vector<RVec3> random_points(int n, std::uint64_t seed, double lo = -3.0, double hi = 3.0, double rmin = 0.05) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<RVec3> p;
  while (int(p.size()) < n) {
    RVec3 x(u(g), u(g), u(g));
    if (x.norm() > rmin) p.push_back(x);
  }
  return p;
}

CVec3 rand_c3(std::mt19937_64& g) {
  std::normal_distribution<double> n;
  return CVec3(cplx(n(g), n(g)), cplx(n(g), n(g)), cplx(n(g), n(g)));
}

RMat3 fd_jacobian(const RVec3& x, double d = 1e-5) {
  RMat3 J;
  for (int a = 0; a < 3; ++a) {
    RVec3 e = d * RVec3::Unit(a);
    J.col(a) = (kelvin_map(x + e) - kelvin_map(x - e)) / (2 * d);
  }
  return J;
}

const cplx kGamma(1.0, 0.3);
MaxwellForms forward_wave() {
  return plane_wave_forms(PlaneWave::make(2.0, kGamma, 1.0, RVec3(1, 2, 0.5), RVec3(0, 0, 1)), kGamma);
}

// faces of the planar box sampled away from edges, mapped to the physical boundary
struct BoundarySet {
  std::vector<RVec3> x, nu, xt, nut_exact;
  std::vector<bool> in_gamma;
};

BoundarySet boundary_set(int per_face, std::uint64_t seed) {
  BoundarySet b;
  KelvinContext ctx = KelvinContext::make(kelvin_box_rho(kPlo, kPhi));
  RigidMotion Ti = plane_frame_inverse();
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.15, 0.85);
  for (int pl = 0; pl < 6; ++pl)
    for (int n = 0; n < per_face; ++n) {
      int a = pl / 2;
      RVec3 y(u(g), u(g), -u(g));
      y(a) = pl % 2 ? kPhi(a) : kPlo(a);
      RVec3 ny = (pl % 2 ? 1.0 : -1.0) * RVec3::Unit(a);
      RVec3 xt = Ti(y);
      RVec3 x = kelvin_map(xt);
      b.x.push_back(x);
      b.nu.push_back(ctx.normal(x));
      b.xt.push_back(xt);
      b.nut_exact.push_back(Ti.R * ny);
      b.in_gamma.push_back(pl != kTopPlane);
    }
  return b;
}

}  // namespace

TEST(KelvinMap, InvolutionAndExactJacobian) {
  auto pts = random_points(2000, 1);
  EXPECT_LT(involution_gap(pts), 1e-14);
  double worst = 0.0, hworst = 0.0;
  for (const RVec3& x : pts) {
    RMat3 J = kelvin_jacobian(x);
    worst = std::max(worst, (J - fd_jacobian(x)).cwiseAbs().maxCoeff() * x.squaredNorm());
    EXPECT_NEAR(J.determinant(), -std::pow(x.squaredNorm(), -3), 1e-12 * std::pow(x.squaredNorm(), -3));
    MapJet m = kelvin_jet(x);
    double d = 1e-5;
    for (int b = 0; b < 3; ++b) {
      RVec3 e = d * RVec3::Unit(b);
      RMat3 dJ = (kelvin_jacobian(x + e) - kelvin_jacobian(x - e)) / (2 * d);
      for (int i = 0; i < 3; ++i)
        hworst = std::max(hworst, (m.H[i].col(b) - dJ.row(i).transpose()).norm() * std::pow(x.norm(), 3));
    }
  }
  EXPECT_LT(worst, 1e-8);
  EXPECT_LT(hworst, 1e-7);
  EXPECT_THROW(kelvin_map(RVec3::Zero()), DomainContainsOrigin);
}

TEST(KelvinMap, PullbackOfDx1AtNorthPoleIsFirstJacobianRow) {
  RVec3 p(0, 0, 1);
  OneForm dx1 = one_form_of(CVec3(1, 0, 0));
  OneForm r = pullback1(dx1, kelvin_jacobian(p));
  EXPECT_LT((r.c - CVec3(1, 0, 0)).norm(), 1e-15);
  EXPECT_LT((kelvin_jacobian(p) - RMat3(RVec3(1, 1, -1).asDiagonal())).norm(), 1e-15);
  EXPECT_LT((kelvin_map(p) - p).norm(), 1e-15);
}

TEST(KelvinMap, ConformalAtTenThousandPoints) {
  EXPECT_LT(conformality_gap(random_points(10000, 2)), 1e-12);
  EXPECT_LT(conformality_gap(random_points(2000, 3, -1e-2, 1e-2, 1e-4)), 1e-12);
}

TEST(KelvinMap, SphereMapsToPlane) {
  auto s = sphere_samples(10000, 4);
  EXPECT_LT(sphere_plane_gap(s), 1e-12);
  // the inaccessible part of the box scenario
  RigidMotion Ti = plane_frame_inverse();
  std::mt19937_64 gg(40);
  std::uniform_real_distribution<double> uu(0.0, 1.0);
  std::vector<RVec3> cap;
  for (int n = 0; n < 10000; ++n) cap.push_back(kelvin_map(Ti(RVec3(uu(gg), uu(gg), 0.0))));
  for (const RVec3& x : cap) EXPECT_NEAR((x - RVec3(0, 0, 0.5)).norm(), 0.5, 1e-15);
  EXPECT_LT(sphere_plane_gap(cap), 1e-12);
  // inside the ball maps above the plane, outside below
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 2000; ++n) {
    RVec3 x(u(g), u(g), u(g));
    if (x.norm() < 1e-3 || std::abs((x - RVec3(0, 0, 0.5)).norm() - 0.5) < 1e-9) continue;
    bool inside = (x - RVec3(0, 0, 0.5)).norm() < 0.5;
    EXPECT_EQ(kelvin_map(x)(2) > 1.0, inside);
  }
}

TEST(Forms, AdaptersAreInverseIsomorphisms) {
  std::mt19937_64 g(6);
  for (int n = 0; n < 50; ++n) {
    CVec3 v = rand_c3(g), w = rand_c3(g);
    EXPECT_EQ(vector_of(one_form_of(v)), v);
    EXPECT_EQ(vector_of(flux_form_of(v)), v);
    EXPECT_EQ(axial(antisym(v)), v);
    // linearity and the wedge / cross correspondence
    EXPECT_LT((vector_of(one_form_of(v + 2.0 * w)) - (v + 2.0 * w)).norm(), 1e-15);
    EXPECT_LT((wedge(one_form_of(v), one_form_of(w)).c - cross(v, w)).norm(), 1e-14);
    EXPECT_LT(std::abs(wedge(one_form_of(v), flux_form_of(w)) - dot(v, w)), 1e-13);
  }
}

TEST(Forms, StarScalesWithConformalFactor) {
  RMat3 e = RMat3::Identity();
  CVec3 a(cplx(1, 2), cplx(-0.5, 0.1), cplx(3, -1));
  EXPECT_LT((hodge_star(1, a, 16.0 * e) - 4.0 * hodge_star(1, a, e)).norm(), 1e-14);
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u(0.01, 50.0);
  for (int n = 0; n < 100; ++n) {
    double c = u(g);
    CVec3 v = rand_c3(g);
    for (int k = 0; k <= 3; ++k) {
      CVec3 lhs = hodge_star(k, v, c * e), rhs = std::pow(c, 1.5 - k) * hodge_star(k, v, e);
      EXPECT_LT((lhs - rhs).norm(), 1e-12 * rhs.norm()) << "k = " << k;
    }
    // ** = 1 on every degree in three dimensions
    EXPECT_LT((hodge_star(2, hodge_star(1, v, e), e) - v).norm(), 1e-14);
  }
  EXPECT_THROW(hodge_star(4, a, e), std::invalid_argument);
}

TEST(Forms, PullbackIntertwinesStarUpToOrientation) {
  std::mt19937_64 g(8);
  for (const RVec3& x : random_points(200, 9)) {
    RMat3 J = kelvin_jacobian(x);
    RMat3 G = pulled_back_metric(J);
    EXPECT_EQ(orientation_of(J), kKelvinOrientation);
    CVec3 v = rand_c3(g);
    // F*(*_e eta) = -*_{F*e} F* eta for the orientation-reversing Kelvin map
    CVec3 a = pullback2(TwoForm{hodge_star(1, v, RMat3::Identity())}, J).c;
    CVec3 b = hodge_star(1, pullback1(OneForm{v}, J).c, G);
    EXPECT_LT((a + b).norm(), 1e-12 * a.norm());
    CVec3 c = pullback1(OneForm{hodge_star(2, v, RMat3::Identity())}, J).c;
    CVec3 d = hodge_star(2, pullback2(TwoForm{v}, J).c, G);
    EXPECT_LT((c + d).norm(), 1e-12 * c.norm());
    // F*e = |x|^-4 e turns the pulled-back star into |x|^-2 *_e on 1-forms
    EXPECT_LT((b - hodge_star(1, pullback1(OneForm{v}, J).c, RMat3::Identity()) / x.squaredNorm()).norm(),
              1e-12 * b.norm());
    EXPECT_NEAR(pullback3(1.0, J).real(), -std::pow(x.squaredNorm(), -3), 1e-12 * std::pow(x.squaredNorm(), -3));
  }
}

TEST(Forms, PullbackCommutesWithExteriorDerivative) {
  MaxwellForms w = forward_wave();
  for (const RVec3& x : random_points(200, 10, 0.3, 2.0)) {
    MapJet m = kelvin_jet(x);
    FieldJet e = w.E(m.y);
    CVec3 lhs = pullback_jet(e, m).d().c, rhs = pullback2(e.d(), m.J).c;
    EXPECT_LT((lhs - rhs).norm(), 1e-11 * std::max(1.0, rhs.norm()));
  }
}

TEST(Forms, ExactFormsPullBackToExactFormsUnderRefinement) {
  // f = sin(x1) e^{x2} x3: F*(df) against central differences of f o F
  auto f = [](const RVec3& x) { return std::sin(x(0)) * std::exp(x(1)) * x(2); };
  auto df = [](const RVec3& x) {
    return RVec3(std::cos(x(0)) * std::exp(x(1)) * x(2), std::sin(x(0)) * std::exp(x(1)) * x(2),
                 std::sin(x(0)) * std::exp(x(1)));
  };
  auto pts = random_points(100, 11, 0.3, 1.5);
  std::vector<double> err;
  for (double d : {1e-2, 5e-3}) {
    double worst = 0.0;
    for (const RVec3& x : pts) {
      RVec3 pb = kelvin_jacobian(x).transpose() * df(kelvin_map(x)), fd;
      for (int a = 0; a < 3; ++a) {
        RVec3 e = d * RVec3::Unit(a);
        fd(a) = (f(kelvin_map(x + e)) - f(kelvin_map(x - e))) / (2 * d);
      }
      worst = std::max(worst, (pb - fd).norm() / std::max(1.0, pb.norm()));
    }
    err.push_back(worst);
  }
  EXPECT_LT(err[0], 1e-2);
  EXPECT_NEAR(std::log2(err[0] / err[1]), 2.0, 0.2);
}

TEST(MaxwellTransform, ForwardDirectionResidualIsSecondOrder) {
  TransformStudy s = transformed_residual_study(forward_wave(), kTlo, kThi, {0.1, 0.05, 0.025});
  EXPECT_LT(s.pointwise, 1e-12);
  EXPECT_GT(s.order(), 1.8);
  EXPECT_LT(s.order(), 2.2);
  EXPECT_LT(s.residual.back(), s.residual.front());
}

TEST(MaxwellTransform, ReverseDirectionFromScaledSystem) {
  // a plane wave of the scaled system with constant coefficients on the transformed side
  cplx gh(0.8, 0.2);
  double muh = 1.3;
  MaxwellForms scaled = plane_wave_forms(PlaneWave::make(1.5, gh, muh, RVec3(-1, 0.5, 2), RVec3(1, 0, 0)), gh);
  RVec3 lo(0.1, -0.4, 0.3), hi(0.4, -0.1, 0.6);
  TransformStudy s = transformed_residual_study(scaled, lo, hi, {0.025, 0.0125, 0.00625});
  EXPECT_LT(s.pointwise, 1e-12);
  EXPECT_GT(s.order(), 1.8);
  EXPECT_LT(s.order(), 2.2);
  // the pulled-back medium is the variable one mu(x) = mu^ |x|^-2
  MaxwellForms back = kelvin_transform(scaled);
  RVec3 x(0.2, -0.3, 0.5);
  EXPECT_LT(std::abs(back.mu(x) - muh / x.squaredNorm()), 1e-13);
  EXPECT_LT(std::abs(back.gamma(x) - gh / x.squaredNorm()), 1e-13);
}

TEST(MaxwellTransform, RoundTripReturnsOriginalFields) {
  MaxwellForms w = forward_wave();
  MaxwellForms tt = kelvin_transform(kelvin_transform(w));
  for (const RVec3& x : random_points(100, 12, 0.3, 1.5)) {
    EXPECT_LT((tt.E(x).v - w.E(x).v).norm(), 1e-12 * w.E(x).v.norm());
    EXPECT_LT((tt.H(x).v - w.H(x).v).norm(), 1e-12 * w.H(x).v.norm());
    EXPECT_LT((tt.E(x).D - w.E(x).D).norm(), 1e-11 * std::max(1.0, w.E(x).D.norm()));
    EXPECT_LT(std::abs(tt.gamma(x) - w.gamma(x)), 1e-14);
  }
}

TEST(MaxwellTransform, UnsignedLawLeavesOrderOneResidual) {
  TransformStudy s = transformed_residual_study(forward_wave(), kTlo, kThi, {0.05, 0.025}, 1.0);
  EXPECT_GT(s.pointwise, 0.5);
  EXPECT_GT(s.residual.back(), 0.5);
}

TEST(MaxwellTransform, ZeroFieldsGiveZeroResidual) {
  TransformStudy s = transformed_residual_study(zero_forms(2.0), kTlo, kThi, {0.1});
  EXPECT_EQ(s.residual[0], 0.0);
  EXPECT_EQ(s.pointwise, 0.0);
}

TEST(MaxwellTransform, BoxContainingOriginIsRejected) {
  EXPECT_THROW(transformed_residual_study(forward_wave(), RVec3(-0.1, -0.1, -0.1), RVec3(0.1, 0.1, 0.1), {0.05}),
               DomainContainsOrigin);
}

TEST(Context, NormalsTransportWithConformalFactor) {
  BoundarySet b = boundary_set(8, 13);
  KelvinContext ctx = KelvinContext::make(kelvin_box_rho(kPlo, kPhi));
  for (std::size_t i = 0; i < b.x.size(); ++i) {
    EXPECT_NEAR(std::abs(ctx.rho(b.x[i])), 0.0, 1e-12);
    RVec3 nt = KelvinContext::transported_normal(b.xt[i], b.nu[i]);
    EXPECT_LT((nt - b.nut_exact[i]).norm(), 1e-9);
    EXPECT_LT((ctx.normal_tilde(b.xt[i]) - b.nut_exact[i]).norm(), 1e-9);
  }
}

TEST(Context, OriginInClosureIsRejected) {
  EXPECT_THROW(KelvinContext::make([](const RVec3& x) { return 0.25 - (x - RVec3(0, 0, 0.5)).squaredNorm(); }),
               DomainContainsOrigin);
  EXPECT_NO_THROW(KelvinContext::make(kelvin_box_rho(kPlo, kPhi)));
}

class ImpedanceTransform : public ::testing::Test {
 protected:
  void SetUp() override {
    b = boundary_set(5, 14);
    std::mt19937_64 g(15);
    std::normal_distribution<double> n;
    int K = 8;
    Eigen::MatrixXcd T(3 * b.x.size(), K), S(3 * b.x.size(), K);
    for (int k = 0; k < K; ++k) {
      RVec3 dir(n(g), n(g), n(g)), pol(n(g), n(g), n(g));
      waves.push_back(plane_wave_forms(PlaneWave::make(2.0, kGamma, 1.0, dir, pol), kGamma));
      auto [t, s] = boundary_traces(waves.back(), b.x, b.nu);
      T.col(k) = t;
      S.col(k) = s;
    }
    L.x = b.x;
    L.nu = b.nu;
    L.in_gamma = b.in_gamma;
    L.M = map_from_traces(T, S);
    Tcols = T;
    Scols = S;
  }
  BoundarySet b;
  std::vector<MaxwellForms> waves;
  BoundaryImpedance L;
  Eigen::MatrixXcd Tcols, Scols;
};

TEST_F(ImpedanceTransform, ReproducesTracesOfTransformedSolutions) {
  EXPECT_LT((L.M * Tcols - Scols).norm(), 1e-10 * Scols.norm());
  BoundaryImpedance Lt = transform_impedance(L);
  BoundaryImpedance wrong = transform_impedance(L, 1.0);
  for (const MaxwellForms& w : waves) {
    auto [t, s] = boundary_traces(kelvin_transform(w), Lt.x, Lt.nu);
    EXPECT_LT((Lt.M * t - s).norm(), 1e-9 * s.norm());
    EXPECT_GT((wrong.M * t - s).norm(), 0.5 * s.norm());
    EXPECT_LT(tangentiality_gap(Lt.nu, t), 1e-10);
    EXPECT_LT(tangentiality_gap(Lt.nu, s), 1e-10);
  }
  for (std::size_t i = 0; i < Lt.points(); ++i) EXPECT_LT((Lt.nu[i] - b.nut_exact[i]).norm(), 1e-9);
}

TEST_F(ImpedanceTransform, TangentialDataStayTangential) {
  BoundaryImpedance Lt = transform_impedance(L);
  std::mt19937_64 g(16);
  Eigen::VectorXcd T(3 * L.points());
  for (std::size_t i = 0; i < L.points(); ++i) {
    CVec3 v = rand_c3(g);
    CVec3 n = to_c(L.nu[i]);
    T.segment<3>(3 * i) = v - dot(n, v) * n;
  }
  EXPECT_LT(tangentiality_gap(L.nu, T), 1e-14);
  Eigen::VectorXcd Tt = blockdiag_jacobians(Lt.x, true).cast<cplx>() * T;
  EXPECT_LT(tangentiality_gap(Lt.nu, Tt), 1e-10);
}

TEST_F(ImpedanceTransform, RoundTripReturnsOriginalMatrix) {
  BoundaryImpedance back = transform_impedance(transform_impedance(L));
  EXPECT_LT((back.M - L.M).norm(), 1e-12 * L.M.norm());
  for (std::size_t i = 0; i < L.points(); ++i) {
    EXPECT_LT((back.x[i] - L.x[i]).norm(), 1e-14);
    EXPECT_LT((back.nu[i] - L.nu[i]).norm(), 1e-12);
  }
}

TEST_F(ImpedanceTransform, AgreementOnGammaIsTransported) {
  BoundaryImpedance L2 = L;
  std::mt19937_64 g(17);
  std::normal_distribution<double> n;
  auto gd = L.gamma_dofs();
  std::vector<bool> on(L.M.rows(), false);
  for (int d : gd) on[d] = true;
  for (Eigen::Index i = 0; i < L.M.rows(); ++i)
    for (Eigen::Index j = 0; j < L.M.cols(); ++j)
      if (!on[i] || !on[j]) L2.M(i, j) += cplx(n(g), n(g));
  EXPECT_GT((L2.M - L.M).norm(), 1.0);
  EXPECT_EQ((L2.restricted() - L.restricted()).norm(), 0.0);
  BoundaryImpedance A = transform_impedance(L), B = transform_impedance(L2);
  EXPECT_LT((A.restricted() - B.restricted()).norm(), 1e-13 * A.restricted().norm());
}

TEST_F(ImpedanceTransform, RejectsMismatchedSamples) {
  BoundaryImpedance bad = L;
  bad.x.pop_back();
  EXPECT_THROW(transform_impedance(bad), std::invalid_argument);
  bad = L;
  bad.nu[0] *= 2.0;
  EXPECT_THROW(transform_impedance(bad), GeometryViolation);
}

TEST(PulledSource, JetMatchesDifferencesOfValues) {
  Scenario p = bump_scenario();
  SphericalScenario s = spherical_from_planar(p, kPlo, kPhi);
  const ScalarSource& src = *s.media.c1.eps;
  double d = 1e-4;
  for (const RVec3& x : random_points(100, 18, 0.05, 0.6)) {
    RealJet j = src.jet(x);
    EXPECT_NEAR(j.v, src.value(x), 1e-14 * std::abs(j.v));
    for (int a = 0; a < 3; ++a) {
      RVec3 e = d * RVec3::Unit(a);
      double g = (src.value(x + e) - src.value(x - e)) / (2 * d);
      EXPECT_NEAR(j.g(a), g, 1e-6 * std::max(1.0, j.g.norm()));
      RealJet jp = src.jet(x + e), jm = src.jet(x - e);
      RVec3 hcol = (jp.g - jm.g) / (2 * d);
      EXPECT_LT((j.H.col(a) - hcol).norm(), 1e-5 * std::max(1.0, j.H.norm()));
    }
  }
}

TEST(PulledSource, ConstantSphericalMediumVariesAsInverseSquareOnPlane) {
  CoefficientSet c = build_coefficients(constant_source(2.0), constant_source(0.0), constant_source(1.5), 2.0, 2.0, 1.5);
  CoefficientSet r = kelvin_pulled(c, plane_frame_inverse(), RigidMotion{});
  RigidMotion Ti = plane_frame_inverse();
  for (const RVec3& y : random_points(100, 19, -1.0, 1.0)) {
    double w = 1.0 / Ti(y).squaredNorm();
    EXPECT_NEAR(r.mu_value(y), 1.5 * w, 1e-14 * w);
    EXPECT_NEAR(r.gamma_value(y).real(), 2.0 * w, 1e-14 * w);
  }
}

TEST(SphereReduction, RecoversEvenPlanarScenario) {
  Scenario p = bump_scenario();
  PlanarReduction r = sphere_scenario_reduce(spherical_from_planar(p, kPlo, kPhi));
  EXPECT_LT(r.plane_gap, 1e-12);
  EXPECT_LT(r.evenness_gap, 1e-12);
  EXPECT_GT(r.boundary_samples, 0);
  for (const RVec3& y : random_points(500, 20, -1.0, 1.0)) {
    MediumPoint a = r.media.c1.point(y), b = p.c1.point(y);
    EXPECT_LT(std::abs(a.gamma - b.gamma), 1e-13);
    EXPECT_LT(std::abs(a.mu - b.mu), 1e-13);
    EXPECT_LT(max_abs(a.alpha.g - b.alpha.g), 1e-11);
    EXPECT_LT(max_abs(a.beta.H - b.beta.H), 1e-10);
  }
}

TEST(SphereReduction, ReflectionAcrossPlaneMatchesSphericalMap) {
  // the even extension across y3 = 0 is R across x~3 = 1 on the transformed side
  RigidMotion T = plane_frame(), Ti = plane_frame_inverse();
  for (const RVec3& y : random_points(100, 21, -1.0, 1.0)) {
    RVec3 a = Ti(RVec3(y(0), y(1), -y(2))), b = reflect_plane(Ti(y));
    EXPECT_LT((a - b).norm(), 1e-14);
    EXPECT_LT((T(Ti(y)) - y).norm(), 1e-14);
  }
}

TEST(SphereReduction, ConstantSphericalMediumIsNotEvenAfterReduction) {
  CoefficientSet c = build_coefficients(constant_source(1.0), constant_source(0.0), constant_source(1.0), 2.0, 1.0, 1.0);
  SphericalScenario s;
  s.media = Scenario{c, c};
  s.rho = kelvin_box_rho(kPlo, kPhi);
  s.olo = kPlo;
  s.ohi = kPhi;
  EXPECT_THROW(sphere_scenario_reduce(s), ReflectionIncompatible);
}

TEST(SphereReduction, GeometryViolations) {
  SphericalScenario s = spherical_from_planar(bump_scenario(), kPlo, kPhi);
  SphericalScenario whole = s;
  whole.rho = [](const RVec3& x) { return 0.25 - (x - RVec3(0, 0, 0.5)).squaredNorm(); };
  EXPECT_THROW(sphere_scenario_reduce(whole), GeometryViolation);
  SphericalScenario origin = s;
  origin.rho = [](const RVec3& x) { return 0.1 - x.squaredNorm(); };
  EXPECT_THROW(sphere_scenario_reduce(origin), GeometryViolation);
  SphericalScenario shifted = s;
  shifted.olo = kPlo + RVec3(0.5, 0, 0);
  shifted.ohi = kPhi + RVec3(0.5, 0, 0);
  EXPECT_THROW(sphere_scenario_reduce(shifted), GeometryViolation);
}

TEST(SphereReduction, ReducedScenarioPassesLimitCheck) {
  Scenario p = bump_scenario();
  PlanarReduction r = sphere_scenario_reduce(spherical_from_planar(p, kPlo, kPhi));
  SpectralBox box = SpectralBox::around(RVec3(0, 0, -1), RVec3(1, 1, 1), 1.0 / 32);
  LimitStudy st(box, r.media.c1, r.media.c2);
  std::mt19937_64 g(100);
  Amplitudes am{rand_c3(g), rand_c3(g), rand_c3(g), rand_c3(g)};
  auto pr = st.make_probe(default_probes()[0]);
  auto rep = st.convergence_study(pr, am, {8, 16, 32, 64});
  for (int t = 0; t < 3; ++t) EXPECT_LT(rep[t].gap3(), 0.01) << term_name(rep[t].kind);
  EXPECT_LE(rep[3].slope, -0.9);
  cplx f = choice_identity_factor(pr.g.zhat, pr.g.zcheck, st.omega());
  auto l = st.limits(pr, choice_a(pr.g.zhat, pr.g.zcheck));
  cplx G = st.bracket_transform(pr, false);
  EXPECT_LT(std::abs(l[0] + l[1] + l[2] - f * G), 1e-9 * std::abs(f * G));
}

TEST(SphereReduction, ReducedScenarioClosesRecoveryLoop) {
  const double omega = 2.0;
  Scenario p = recovery_scenario(omega);
  PlanarReduction r = sphere_scenario_reduce(spherical_from_planar(p, kPlo, kPhi));
  RecoveryGrid rg = RecoveryGrid::around(kPlo, kPhi, 1.0 / 16);
  LogFields truth = sample_logs(rg, r.media.c1), ref = sample_logs(rg, r.media.c2);
  BracketNewton nw(rg, ref, omega);
  NewtonResult res = nw.solve(discrete_brackets(rg, truth, ref, omega), {}, &truth);
  EXPECT_LE(res.iterations, 8);
  EXPECT_LT(nw.relative_error(res.logs, truth), 1e-6);
  NewtonResult zero = nw.solve(discrete_brackets(rg, ref, ref, omega));
  EXPECT_EQ(zero.iterations, 1);
}
