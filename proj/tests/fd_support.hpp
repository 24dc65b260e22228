#pragma once

#include <functional>
#include <random>

#include "mxip/media.hpp"

namespace mxtest {

using namespace mxip;
using Field = std::function<Vec8(const RVec3&)>;

// P(D) f = -i sum_a P(e_a) d_a f with second-order central differences
inline Vec8 apply_PD(const Field& f, const RVec3& x, double h) {
  Vec8 r = Vec8::Zero();
  for (int a = 0; a < 3; ++a) {
    RVec3 e = RVec3::Unit(a) * h;
    r += -I * (p_mix(to_c(RVec3::Unit(a))) * (f(x + e) - f(x - e))) / (2.0 * h);
  }
  return r;
}

// Laplacian consistent with composing two central first differences (spacing 2h)
inline Vec8 wide_laplacian(const Field& f, const RVec3& x, double h) {
  Vec8 r = Vec8::Zero();
  for (int a = 0; a < 3; ++a) {
    RVec3 e = RVec3::Unit(a) * (2.0 * h);
    r += (f(x + e) - 2.0 * f(x) + f(x - e)) / (4.0 * h * h);
  }
  return r;
}

inline Vec8 rand_vec8(std::mt19937_64& g) {
  std::normal_distribution<double> n;
  Vec8 v;
  for (int i = 0; i < 8; ++i) v(i) = cplx(n(g), n(g));
  return v;
}

// smooth analytic 8-field with exact Laplacian
struct SmoothField {
  Vec8 c0, c1;
  RVec3 q0, q1;
  Vec8 operator()(const RVec3& x) const { return c0 * std::sin(q0.dot(x)) + c1 * std::exp(q1.dot(x)); }
  Vec8 laplacian(const RVec3& x) const {
    return -q0.squaredNorm() * c0 * std::sin(q0.dot(x)) + q1.squaredNorm() * c1 * std::exp(q1.dot(x));
  }
};

inline SmoothField rand_smooth(std::mt19937_64& g) {
  std::normal_distribution<double> n;
  SmoothField f;
  f.c0 = rand_vec8(g);
  f.c1 = rand_vec8(g);
  f.q0 = RVec3(n(g), n(g), n(g));
  f.q1 = 0.5 * RVec3(n(g), n(g), n(g));
  return f;
}

// Two-bump test medium with conductivity, centred in the unit cube below x3 = 0
inline CoefficientSet bump_medium(double omega = 2.0, double scale = 1.0) {
  RVec3 c(0.5, 0.5, -0.5);
  auto eps = std::make_shared<GaussianProfile>(1.0, std::vector<Bump>{{0.3 * scale, c}}, 0.1);
  auto mu = std::make_shared<GaussianProfile>(1.0, std::vector<Bump>{{0.2 * scale, c + RVec3(0.05, 0, 0)}}, 0.1);
  auto sig = std::make_shared<GaussianProfile>(0.0, std::vector<Bump>{{0.4 * scale, c - RVec3(0, 0.05, 0)}}, 0.1);
  return build_coefficients(eps, sig, mu, omega, 1.0, 1.0);
}

}  // namespace mxtest
