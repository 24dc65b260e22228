#pragma once

#include "media.hpp"

namespace mxip {

// Two even media with Gaussian contrast centred near (0.5, 0.5, -0.5) and mirrored across x3 = 0.
struct Scenario {
  CoefficientSet c1, c2;
};

inline CoefficientSet gaussian_medium(double omega, const std::vector<Bump>& eps, const std::vector<Bump>& mu,
                                      const std::vector<Bump>& sigma, double width = 0.09, double eps0 = 1.0,
                                      double mu0 = 1.0) {
  return build_coefficients(std::make_shared<GaussianProfile>(eps0, eps, width, true),
                            std::make_shared<GaussianProfile>(0.0, sigma, width, true),
                            std::make_shared<GaussianProfile>(mu0, mu, width, true), omega, eps0, mu0);
}

inline Scenario bump_scenario(double omega = 2.0) {
  RVec3 c(0.5, 0.5, -0.5);
  Scenario s;
  s.c1 = gaussian_medium(omega, {{0.3, c}}, {{0.2, c}}, {{0.4, c}});
  s.c2 = gaussian_medium(omega, {{0.1, RVec3(0.48, 0.52, -0.5)}}, {{-0.1, RVec3(0.52, 0.5, -0.48)}},
                         {{0.2, RVec3(0.5, 0.48, -0.52)}});
  return s;
}

inline Scenario constant_scenario(double omega = 2.0, double eps0 = 1.0, double mu0 = 1.0) {
  Scenario s;
  s.c1 = gaussian_medium(omega, {}, {}, {}, 0.09, eps0, mu0);
  s.c2 = s.c1;
  return s;
}

// Reference medium and a truth differing from it by smooth contrast of at most ~12%.
inline Scenario recovery_scenario(double omega = 2.0) {
  Scenario s;
  RVec3 c(0.5, 0.5, -0.5), d(0.45, 0.55, -0.45);
  s.c2 = gaussian_medium(omega, {{0.1, c}}, {{0.05, c}}, {{0.1, c}});
  s.c1 = build_coefficients(
      std::make_shared<GaussianProfile>(1.0, std::vector<Bump>{{0.1, c}, {0.12, d}}, 0.09, true),
      std::make_shared<GaussianProfile>(0.0, std::vector<Bump>{{0.1, c}, {0.08, d}}, 0.09, true),
      std::make_shared<GaussianProfile>(1.0, std::vector<Bump>{{0.05, c}, {-0.1, d}}, 0.09, true), omega, 1.0, 1.0);
  return s;
}

}  // namespace mxip
